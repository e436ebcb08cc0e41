"""Fast runs of the experiment drivers; the full-size runs live in the
acceptance suite."""

import math

import numpy as np
import pytest

from bergschatten import experiments as ex
from bergschatten.config import ExperimentConfig
from bergschatten.errors import ConfigError
from bergschatten.kernels import mean_oscillation, mo_zbar_closed
from bergschatten.symbols import named_symbol, zbar

DEEP = tuple(10.0**-k for k in range(2, 11))


def test_floor_exponent_and_integral():
    # n = 1, gamma = 2, p = 0.5: exponent p(n+1+gamma)/2 - n - 1 = -1
    assert ex.floor_exponent(1, 2.0, 0.5) == pytest.approx(-1.0)
    assert ex.floor_diverges(1, 2.0, 0.5)
    assert not ex.floor_diverges(1, 2.0, 0.7)
    for n, g in [(1, 0.0), (2, 1.0), (3, 0.5)]:
        cut = 2 * n / (n + 1 + g)
        assert ex.floor_diverges(n, g, cut) and not ex.floor_diverges(n, g, cut * 1.01)
    a, b = ex.floor_integral(1, 0.0, 1.0, 1e-3), ex.floor_integral(1, 0.0, 1.0, 1e-6)
    assert b > a > 0


def test_floor_integral_two_routes():
    from scipy.integrate import quad

    for n, g, p, eps in [(1, 0.5, 1.5, 1e-3), (1, 0.0, 0.8, 1e-2), (2, 1.0, 1.2, 1e-3), (3, 0.0, 2.0, 1e-2)]:
        e = ex.floor_exponent(n, g, p)
        # polar coordinates: dv = 2 pi^n / (n-1)! r^(2n-1) dr
        direct = quad(lambda r: (1 - r * r) ** e * r ** (2 * n - 1), 0, 1 - eps, limit=200)[0]
        direct *= 2 * math.pi**n / math.factorial(n - 1)
        assert ex.floor_integral(n, g, p, eps) == pytest.approx(direct, rel=1e-8)


def test_mo_evaluator_matches_kernels():
    mo = ex.MOEvaluator(zbar(), 0.0, None)
    for r in (0.0, 0.3, 0.9):
        assert mo.at(np.array([r])) == pytest.approx(float(mo_zbar_closed(r * r)), abs=1e-12)
    mo = ex.MOEvaluator(named_symbol("z2zbar"), 1.0, None)
    z = np.array([0.5 * np.exp(0.7j)])
    assert mo.at(z) == pytest.approx(mean_oscillation(named_symbol("z2zbar"), z, 1.0), rel=1e-8)


def test_expected_divergence_table():
    cfg = ExperimentConfig(gamma=2.0)
    f = named_symbol("zbar_vanishing4")
    assert ex.expected_divergent(f, cfg, 0.5, "mo") is True
    assert ex.expected_divergent(f, cfg, 0.7, "mo") is False
    # below the cutoff a boundary-vanishing symbol can still be in S_p
    assert ex.expected_divergent(f, cfg, 0.5, "schatten") is None
    assert ex.expected_divergent(zbar(), cfg, 0.7, "schatten") is True
    assert ex.expected_divergent(zbar(), cfg, 1.5, "schatten") is False


def test_cutoff_divergence_runs():
    r = ex.run_cutoff_divergence(ExperimentConfig(p_list=(1.0,)))
    assert r.passed and r.assertion("T_diverges[p=1.0]").passed
    r = ex.run_cutoff_divergence(ExperimentConfig(p_list=(1.5,)), eps=DEEP)
    assert r.passed and r.assertion("T_plateau[p=1.5]").passed
    r = ex.run_cutoff_divergence(ExperimentConfig(gamma=2.0, p_list=(0.5,)), eps=DEEP)
    assert r.passed
    r = ex.run_cutoff_divergence(ExperimentConfig(symbol=[[0, 0, 1.0, 0.0]], p_list=(1.0,)))
    assert r.constants.get("vacuous") or "vacuous" in r.to_json()


def test_geometry_suite_small():
    cfg = ExperimentConfig(lam={"dyadic_level": 1}, depth=8)
    r = ex.run_geometry_suite(cfg, checks=["mobius", "sandwich", "volume_law", "separation", "carleson"])
    assert r.passed, r.summary()
    with pytest.raises(ConfigError):
        ex.run_geometry_suite(cfg, checks=["nope"])


def test_reverse_cs_small():
    cfg = ExperimentConfig(depth=4, p_list=(1.5,))
    r = ex.run_reverse_cs(cfg, enforce_lambda=False, compare_depth=3)
    assert r.passed, r.summary()
    with pytest.raises(ConfigError):
        ex.run_reverse_cs(cfg, enforce_lambda=True)


def test_reverse_cs_constant_symbol_vanishes():
    from bergschatten.symbols import Symbol
    from bergschatten.tree import build_tree

    tree = build_tree(math.log(2) / 8, 10, n=1)
    out = ex.reverse_cs_sides(Symbol.constant(2.0), tree, tree.node_id(3, 2), 0.0)
    assert out["lhs"] == pytest.approx(0.0, abs=1e-20) and out["rhs"] == pytest.approx(0.0, abs=1e-20)


def test_discretization_chain_small():
    r = ex.run_discretization_chain(ExperimentConfig(depth=6))
    assert r.passed, r.summary()
    with pytest.raises(ConfigError):
        ex.run_discretization_chain(ExperimentConfig(depth=6, p_list=(0.9,)))


def test_main_ratio_guard_and_oracle():
    r = ex.run_main_theorem_ratio(ExperimentConfig(depth=6, D=[16, 32], p_list=(1.5,)))
    assert r.assertion("oracle_partial_sums[p=1.5]").passed
