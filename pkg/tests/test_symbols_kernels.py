import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergschatten.errors import DomainError
from bergschatten.kernels import (
    berezin,
    berezin_direct,
    berezin_series,
    cell_statistics,
    generalized_mean_oscillation,
    kernel,
    mean_oscillation,
    mo_floor_check,
    mo_zbar_closed,
    normalized_kernel,
)
from bergschatten.quadrature import Ball, QuadratureSpec, WeightedMeasure, integrate
from bergschatten.symbols import Symbol, named_symbol, zbar


# ------------------------------------------------------------------ symbols


def test_symbol_eval_and_algebra():
    f = named_symbol("z2zbar")
    z = np.array([[0.3 + 0.4j]])
    assert f(z)[0] == pytest.approx((0.3 + 0.4j) ** 2 * (0.3 - 0.4j))
    g = zbar() * Symbol.monomial(2, 0)
    assert g.expand() == f.expand()
    assert (f - f).is_zero()
    assert Symbol.constant(2.0).is_constant()
    assert f.conj()(z)[0] == pytest.approx(np.conj(f(z)[0]))
    assert Symbol.monomial(3, 0).is_holomorphic() and not zbar().is_holomorphic()


def test_boundary_power_expands():
    f = named_symbol("zbar_vanishing4")
    z = np.array([[0.5 - 0.2j]])
    t = abs(z[0, 0]) ** 2
    assert f(z)[0] == pytest.approx(np.conj(z[0, 0]) * (1 - t) ** 4)
    assert f.expand()(z)[0] == pytest.approx(f(z)[0], abs=1e-14)


def test_config_round_trip():
    for name in ("zbar", "z2zbar", "zbar_vanishing4", "boundary2"):
        f = named_symbol(name)
        assert Symbol.from_config(f.to_config()) == f
    with pytest.raises(DomainError):
        named_symbol("nope")
    with pytest.raises(DomainError):
        Symbol.from_config([[1, 0, 1.0]])


# ------------------------------------------------------------------ kernels


def test_kernel_values():
    assert kernel([0.5], [0.0], 0.0) == pytest.approx(1.0)
    assert kernel([0.5], [0.5], 0.0) == pytest.approx(16 / 9, rel=1e-14)
    assert normalized_kernel([0.0], [0.3j], 1.0) == pytest.approx(1.0)
    z = np.array([0.4 + 0.3j, 0.1j])
    w = np.array([-0.2j, 0.5])
    assert kernel(z, w, 1.5) == pytest.approx(np.conj(kernel(w, z, 1.5)), rel=1e-13)
    assert abs(normalized_kernel(z, z, 1.5)) ** 2 == pytest.approx((1 - np.vdot(z, z).real) ** -4.5, rel=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 2.0])
def test_normalized_kernel_unit_norm(gamma):
    z = np.array([0.6 + 0.2j])
    r = integrate(lambda w: np.abs(normalized_kernel(z, w, gamma)) ** 2, Ball(1.0), WeightedMeasure(1, gamma), QuadratureSpec(64, 64))
    assert r.value.real == pytest.approx(1.0, abs=1e-8)


def test_berezin_oracles():
    assert berezin(Symbol.constant(3.0), [0.4], 0.0) == pytest.approx(3.0, abs=1e-12)
    assert berezin(zbar().abs2(), [0.0], 0.0) == pytest.approx(0.5, abs=1e-12)
    for w in (0.3 + 0.1j, -0.7j, 0.9):
        assert berezin(zbar(), [w], 0.0) == pytest.approx(np.conj(w), abs=1e-10)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.5])
def test_berezin_three_routes(gamma):
    f = named_symbol("z2zbar") + 0.5 * named_symbol("boundary2")
    w = 0.55 - 0.3j
    a = berezin(f, [w], gamma)
    assert a == pytest.approx(berezin_series(f, w, gamma), abs=1e-10)
    assert a == pytest.approx(berezin_direct(f, [w], gamma), abs=1e-8)


def test_mo_oracles():
    assert mean_oscillation(Symbol.constant(1 + 1j), [0.3], 0.0) == pytest.approx(0.0, abs=1e-12)
    assert mean_oscillation(zbar(), [0.0], 0.0) == pytest.approx(2**-0.5, abs=1e-12)
    assert float(mo_zbar_closed(0.5)) == pytest.approx(0.43948, abs=1e-5)
    w = math.sqrt(0.5)
    assert mean_oscillation(zbar(), [w], 0.0) == pytest.approx(float(mo_zbar_closed(0.5)), abs=1e-10)


@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_mo_closed_form_general_gamma(gamma):
    for r in (0.0, 0.4, 0.8):
        assert mean_oscillation(zbar(), [r], gamma) == pytest.approx(float(mo_zbar_closed(r * r, gamma=gamma)), abs=1e-9)


def test_generalized_mo_index_zero():
    rng = np.random.default_rng(1)
    f = named_symbol("z2zbar") + named_symbol("zbar")
    for _ in range(5):
        z = [complex(*rng.uniform(-0.6, 0.6, 2))]
        assert generalized_mean_oscillation(f, z, 1.0, 0) == pytest.approx(mean_oscillation(f, z, 1.0), abs=1e-10)
    assert generalized_mean_oscillation(Symbol.constant(2.0), [0.2], 0.0, 3) == pytest.approx(0.0, abs=1e-12)


def test_cell_statistics_oracle():
    f = zbar().abs2()
    mean, v = cell_statistics(f, Ball(1.0), 0.0)
    assert mean == pytest.approx(0.5, abs=1e-12)
    assert v**2 == pytest.approx(1 / 12, abs=1e-12)
    assert cell_statistics(Symbol.constant(2.0), Ball(0.5), 0.0) == pytest.approx((2.0, 0.0), abs=1e-12)


def test_cell_statistics_least_squares():
    f = named_symbol("z2zbar")
    region = Ball(0.8)
    spec = QuadratureSpec(24, 24)
    _, v = cell_statistics(f, region, 1.0, spec)
    m = WeightedMeasure(1, 1.0)
    mass = integrate(lambda z: np.ones(z.shape[0]), region, m, spec).value.real
    rng = np.random.default_rng(0)
    for c in rng.normal(size=20) + 1j * rng.normal(size=20):
        val = integrate(lambda z: np.abs(f(z) - c) ** 2, region, m, spec).value.real / mass
        assert v**2 <= val + 1e-12


def test_mo_floor():
    ok, margin = mo_floor_check(Symbol.constant(1.0), [0.3], 0.0)
    assert ok and margin == pytest.approx(0.0, abs=1e-12)
    ok, margin = mo_floor_check(zbar(), [0.0], 0.0)
    assert ok and margin == pytest.approx(2**-0.5 - 0.25 * 2**-0.5, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.95), st.floats(0, 2 * math.pi), st.sampled_from([0.0, 1.0, 2.0]), st.sampled_from(["zbar", "z2zbar", "boundary2"]))
def test_mo_floor_sweep(r, th, gamma, name):
    ok, margin = mo_floor_check(named_symbol(name), [r * np.exp(1j * th)], gamma)
    assert margin >= -1e-10
