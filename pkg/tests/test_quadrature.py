import math

import numpy as np
import pytest

from bergschatten.errors import DomainError
from bergschatten.quadrature import (
    Ball,
    Difference,
    PolarBox,
    QuadratureSpec,
    Shell,
    Union,
    WeightedMeasure,
    integrate,
    moment,
    moments,
    monomial_inner,
    multi_moment,
    quadrature_nodes,
    tau_measure,
    tau_shell,
    volume,
)


def test_measure_is_probability():
    for n, g in [(1, 0.0), (1, 2.5), (2, 1.0), (3, -0.5)]:
        m = WeightedMeasure(n, g)
        r = integrate(lambda z: np.ones(z.shape[0]), Ball(1.0), m, QuadratureSpec(16, 16))
        assert r.value.real == pytest.approx(1.0, abs=1e-12)
        assert float(m.shell_mass(0.0, 1.0)) == pytest.approx(1.0, abs=1e-14)


def test_gamma_domain():
    with pytest.raises(DomainError):
        WeightedMeasure(1, -1.0)


def test_c_gamma_disc():
    # c_gamma = (gamma + 1) / pi on the disc
    for g in (0.0, 1.0, 2.5):
        assert WeightedMeasure(1, g).c_gamma == pytest.approx((g + 1) / math.pi, rel=1e-14)


def test_moments_oracle():
    assert moment(0, 0.0) == 1.0
    assert moment(2, 0.0) == pytest.approx(1 / 3, rel=1e-14)
    assert moment(1, 1.0) == pytest.approx(1 / 3, rel=1e-14)
    assert np.allclose(moments(10, 0.0), 1 / np.arange(1, 12), rtol=1e-13)
    with pytest.raises(DomainError):
        moment(-1, 0.0)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.5])
def test_moments_by_quadrature(gamma):
    m = WeightedMeasure(1, gamma)
    for k in range(6):
        r = integrate(lambda z: np.abs(z[:, 0]) ** (2 * k), Ball(1.0), m, QuadratureSpec(24, 16))
        assert r.value.real == pytest.approx(moment(k, gamma), rel=1e-12)


def test_monomial_inner():
    assert monomial_inner(1, 0, 1, 0, 0.0) == pytest.approx(moment(1, 0.0))
    assert monomial_inner(1, 0, 0, 1, 0.0) == 0.0
    assert monomial_inner(2, 1, 1, 0, 0.0) == pytest.approx(1 / 3)


def test_multi_moment_matches_disc():
    for k in range(5):
        assert multi_moment([k], 1, 1.5) == pytest.approx(moment(k, 1.5), rel=1e-13)
    # |z_1|^2 has mean 1/(n+1+gamma) ... times Gamma ratio; n=2, gamma=0: 1/3
    assert multi_moment([1, 0], 2, 0.0) == pytest.approx(1 / 3, rel=1e-13)


def test_quadrature_half_moment():
    r = integrate(lambda z: np.abs(z[:, 0]) ** 2, Ball(1.0), WeightedMeasure(1, 0.0))
    assert r.value.real == pytest.approx(0.5, abs=1e-12)


def test_odd_integrand_vanishes():
    r = integrate(lambda z: z[:, 0] * np.abs(z[:, 0]), Shell(0.2, 0.9), WeightedMeasure(1, 1.0))
    assert abs(r.value) < 1e-12


def test_monte_carlo_for_n2():
    m = WeightedMeasure(2, 0.0)
    r = integrate(lambda z: np.abs(z[:, 0]) ** 2, Ball(1.0), m, QuadratureSpec(samples=40000, seed=3))
    assert abs(r.value.real - 1 / 3) < 5 * r.error + 1e-3
    nodes = quadrature_nodes(Ball(1.0), m, QuadratureSpec(samples=1000))
    assert not nodes.deterministic


def test_volume_of_regions():
    m = WeightedMeasure(1, 0.0)
    assert volume(Shell(0.0, 0.5), m) == pytest.approx(0.25)
    box = PolarBox(0.0, 1.0, 0.0, math.pi / 2)
    assert volume(box, m) == pytest.approx(0.25)
    u = Union((PolarBox(0.0, 0.5, 0.0, math.pi), PolarBox(0.5, 1.0, 0.0, math.pi)))
    assert volume(u, m) == pytest.approx(0.5)
    d = Difference(Ball(1.0), Ball(0.5))
    with pytest.raises(DomainError):
        volume(d, m)
    r = integrate(lambda z: np.ones(z.shape[0]), d, m, QuadratureSpec(samples=20000))
    assert abs(r.value.real - 0.75) < 5 * r.error + 1e-3


def test_tau_values():
    assert tau_shell(0.0, 1 / math.sqrt(2), 1) == pytest.approx(math.pi, rel=1e-14)
    assert tau_measure(None, 1) == 0.0
    with pytest.warns(RuntimeWarning):
        assert math.isinf(tau_shell(0.0, 1.0, 1))


def test_tau_of_cells_bounded(dyadic_tree):
    from bergschatten.tree import region_K

    vals = [tau_measure(region_K(dyadic_tree, i), 1) for i in range(1, len(dyadic_tree.nodes))]
    assert max(vals) / min(vals) < 4.0
