"""Reproducing kernels, Berezin transforms and mean oscillation.

All Berezin-type integrals are taken after the Mobius substitution
w = phi_z(u), under which |k_z^gamma(w)|^2 dv_gamma(w) becomes dv_gamma(u).
In the disc the pulled-back integrand f(phi_z(u)) varies on the scale
1 - |z| near the boundary point z/|z|, so the rule is a polar product rule
with panels graded geometrically toward that point.  In higher dimensions
stratified Monte Carlo over dv_gamma(u) is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError
from .geometry import _as_points, herm_dot, mobius_map, norm2, one_minus_mobius_sq
from .quadrature import Ball, IntegrationResult, QuadratureSpec, WeightedMeasure, quadrature_nodes
from .symbols import Symbol

RADICAND_TOL = 1e-12
DEFAULT_ORDER = 16


def _exponent(n: int, gamma: float) -> float:
    if gamma <= -1:
        raise DomainError("gamma must exceed -1")
    return n + 1 + gamma


def _point(z) -> np.ndarray:
    z = _as_points(z)
    if z.ndim != 1:
        raise DomainError("expected a single point")
    if norm2(z) >= 1.0:
        raise DomainError(f"|z| = {math.sqrt(norm2(z))!r} is not interior")
    return z


# ---------------------------------------------------------------- kernels


def kernel(z, w, gamma: float) -> np.ndarray:
    """K_gamma(z, w) = (1 - z.w)^(-(n+1+gamma)), broadcasting over leading axes."""
    z, w = _as_points(z), _as_points(w)
    s = _exponent(z.shape[-1], gamma)
    base = 1 - herm_dot(z, w)
    if np.any(base == 0):
        raise DomainError("kernel is singular where z.w = 1")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = base ** (-s)
    if not np.all(np.isfinite(out)):
        raise NumericalError("kernel overflow near the boundary")
    return out


def normalized_kernel(z, w, gamma: float) -> np.ndarray:
    """k_z^gamma(w) = (1-|z|^2)^((n+1+gamma)/2) / (1 - w.z)^(n+1+gamma)."""
    z, w = _as_points(z), _as_points(w)
    s = _exponent(z.shape[-1], gamma)
    base = 1 - herm_dot(w, z)
    if np.any(base == 0):
        raise DomainError("kernel is singular where w.z = 1")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = (1 - norm2(z)) ** (s / 2) * base ** (-s)
    if not np.all(np.isfinite(out)):
        raise NumericalError("normalized kernel overflow near the boundary")
    return out


def generalized_kernel(z, w, gamma: float, i: int) -> np.ndarray:
    """k_z^{gamma,i}(w) = (1-|z|^2)^((n+1+gamma)/2 + i) / (1 - w.z)^(n+1+gamma+i)."""
    z, w = _as_points(z), _as_points(w)
    s = _exponent(z.shape[-1], gamma)
    base = 1 - herm_dot(w, z)
    return (1 - norm2(z)) ** (s / 2 + i) * base ** (-(s + i))


# ---------------------------------------------------------------- Mobius rules


@dataclass(frozen=True)
class MobiusRule:
    """Pulled-back nodes for integrals against |k_z|^2 dv_gamma.

    ``phi`` are the points phi_z(u), ``one_minus`` the values 1 - |phi_z(u)|^2
    computed without cancellation, ``weights`` the dv_gamma(u) weights and
    ``u_dot_z`` the pairings u.z (for the generalized kernels).
    """

    phi: np.ndarray
    one_minus: np.ndarray
    weights: np.ndarray
    u_dot_z: np.ndarray
    deterministic: bool
    strata: np.ndarray | None = None
    stratum_mass: np.ndarray | None = None
    stratum_count: np.ndarray | None = None


@lru_cache(maxsize=64)
def _graded_disc_rule(r: float, gamma: float, order: int):
    """Polar rule in u for dv_gamma on the disc, graded toward u = 1.

    Returns (y, theta, weights) with y = 1 - |u|^2 kept exactly.
    """
    delta = max(1.0 - r, 1e-16)
    # radial panels in y = 1 - |u|^2: [2^-(j+1), 2^-j], last [0, y_min]
    jmax = max(1, int(math.ceil(math.log2(4.0 / delta))))
    s, w = np.polynomial.legendre.leggauss(order)
    ys, wys = [], []
    for j in range(jmax):
        lo, hi = 2.0 ** -(j + 1), 2.0**-j
        y = lo + (hi - lo) * (1 + s) / 2
        ys.append(y)
        wys.append(w * (hi - lo) / 2 * y**gamma)
    ymin = 2.0**-jmax
    sj, wj = special.roots_jacobi(order, 0.0, gamma)
    ys.append(ymin * (1 + sj) / 2)
    wys.append(wj * (ymin / 2) ** (gamma + 1))
    y = np.concatenate(ys)
    wy = np.concatenate(wys)
    # angular panels symmetric about 0 with edges delta 2^k
    edges = [0.0]
    e = min(delta, math.pi)
    while e < math.pi:
        edges.append(e)
        e *= 2
    edges.append(math.pi)
    ths, wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        t = lo + (hi - lo) * (1 + s) / 2
        for sign in (1.0, -1.0):
            ths.append(sign * t)
            wts.append(w * (hi - lo) / 2)
    th = np.concatenate(ths)
    wt = np.concatenate(wts)
    weights = (gamma + 1) / (2 * math.pi) * wy[:, None] * wt[None, :]
    return y, th, weights


def mobius_rule(z, gamma: float, order: int = DEFAULT_ORDER, spec: QuadratureSpec | None = None) -> MobiusRule:
    """Nodes for u -> phi_z(u) under dv_gamma(u)."""
    z = _point(z)
    n = z.shape[0]
    if n == 1:
        zz = complex(z[0])
        r = abs(zz)
        y, th, wts = _graded_disc_rule(round(r, 15), float(gamma), int(order))
        rad = np.sqrt(1.0 - y)
        u = rad[:, None] * np.exp(1j * (th[None, :] + np.angle(zz)))
        one_minus_z = (1 - r) * (1 + r)
        denom = 1 - u * np.conj(zz)
        phi = (zz - u) / denom
        om = one_minus_z * y[:, None] / np.abs(denom) ** 2
        return MobiusRule(
            phi.reshape(-1, 1), om.ravel(), wts.ravel(), (u * np.conj(zz)).ravel(), True
        )
    nodes = quadrature_nodes(Ball(1.0), WeightedMeasure(n, gamma), spec or QuadratureSpec())
    u = nodes.points
    phi = mobius_map(z, u)
    om = one_minus_mobius_sq(z, u)
    return MobiusRule(
        phi, om, nodes.weights, herm_dot(u, z), False,
        nodes.strata, nodes.stratum_mass, nodes.stratum_count,
    )


def _weighted_mean(rule: MobiusRule, values: np.ndarray, rho: np.ndarray | None = None):
    w = rule.weights if rho is None else rule.weights * rho
    return complex(np.sum(w * values) / np.sum(w))


def _mc_error(rule: MobiusRule, values: np.ndarray) -> float:
    var = 0.0
    for k, mass in enumerate(rule.stratum_mass):
        sel = rule.strata == k
        m = rule.stratum_count[k]
        if m >= 2:
            var += mass**2 * np.var(values[sel], ddof=1) / m
    return math.sqrt(var)


# ---------------------------------------------------------------- Berezin and MO


def _as_symbol(f) -> Symbol:
    if not isinstance(f, Symbol):
        raise DomainError("f must be a Symbol")
    return f


def berezin(f: Symbol, z, gamma: float, order: int = DEFAULT_ORDER, spec=None, return_error: bool = False):
    """B_gamma(f)(z) = int f o phi_z dv_gamma.

    With ``return_error`` an :class:`IntegrationResult` is returned whose
    error is the change under a finer rule (disc) or the stratified standard
    error (higher dimensions).
    """
    f = _as_symbol(f)
    rule = mobius_rule(z, gamma, order, spec)
    vals = f(rule.phi, rule.one_minus)
    val = complex(np.sum(rule.weights * vals))
    if not return_error:
        return val
    if rule.deterministic:
        fine = berezin(f, z, gamma, order + 8)
        err = abs(fine - val)
    else:
        err = _mc_error(rule, vals)
    return IntegrationResult(val, err, len(rule.weights))


def generalized_mean_oscillation(f: Symbol, z, gamma: float, i: int = 0, order: int = DEFAULT_ORDER, spec=None) -> float:
    """MO_{gamma,i}(f)(z) = inf_c ||(f - c) k_z^{gamma,i}||_{L^2(dv_gamma)}.

    After the substitution w = phi_z(u) the measure |k_z^{gamma,i}|^2 dv_gamma
    becomes |1 - u.z|^(2i) dv_gamma(u); the infimum is attained at the
    weighted mean, and the spread about it is summed directly so that no
    cancellation occurs.
    """
    f = _as_symbol(f)
    if i < 0 or int(i) != i:
        raise DomainError("i must be a nonnegative integer")
    rule = mobius_rule(z, gamma, order, spec)
    vals = f(rule.phi, rule.one_minus)
    rho = None if i == 0 else np.abs(1 - rule.u_dot_z) ** (2 * i)
    c = _weighted_mean(rule, vals, rho)
    w = rule.weights if rho is None else rule.weights * rho
    return math.sqrt(max(float(np.sum(w * np.abs(vals - c) ** 2)), 0.0))


def mean_oscillation(f: Symbol, z, gamma: float, order: int = DEFAULT_ORDER, spec=None, method: str = "spread") -> float:
    """MO_gamma(f)(z) = (B_gamma(|f|^2)(z) - |B_gamma(f)(z)|^2)^(1/2).

    ``method="spread"`` sums |f o phi_z - B f|^2 directly (default);
    ``method="difference"`` forms the defining difference and clamps
    radicands in [-1e-12, 0) to zero, raising on anything more negative.
    """
    f = _as_symbol(f)
    if method == "spread":
        return generalized_mean_oscillation(f, z, gamma, 0, order, spec)
    if method != "difference":
        raise DomainError(f"unknown method {method!r}")
    rule = mobius_rule(z, gamma, order, spec)
    vals = f(rule.phi, rule.one_minus)
    b1 = complex(np.sum(rule.weights * vals))
    b2 = float(np.sum(rule.weights * np.abs(vals) ** 2))
    rad = b2 - abs(b1) ** 2
    if rad < -RADICAND_TOL * max(1.0, b2):
        raise NumericalError(f"negative radicand {rad:.3e} in mean oscillation")
    return math.sqrt(max(rad, 0.0))


def berezin_direct(f: Symbol, z, gamma: float, radial_order: int = 200, angular_order: int = 400) -> complex:
    """Cross-check path (disc): int f |k_z|^2 dv_gamma without substitution.

    Uses a plain polar product rule; accurate only while |z| stays away
    from the sphere.
    """
    z = _point(z)
    if z.shape[0] != 1:
        raise DomainError("direct path is implemented for n = 1")
    s, ws = special.roots_jacobi(radial_order, gamma, 0.0)
    u = (1 + s) / 2
    wu = ws / 2 ** (gamma + 1)
    th = 2 * math.pi * np.arange(angular_order) / angular_order
    w = (np.sqrt(u)[:, None] * np.exp(1j * th)[None, :]).reshape(-1, 1)
    wt = ((gamma + 1) * wu[:, None] * np.full(angular_order, 1.0 / angular_order)[None, :]).ravel()
    kz = np.abs(normalized_kernel(z, w, gamma)) ** 2
    return complex(np.sum(wt * kz * f(w)))


def _beta_moment(p: int, k: int, gamma: float) -> float:
    """int_D |z|^(2p) (1-|z|^2)^k dv_gamma = (gamma+1) B(p+1, gamma+k+1)."""
    return (gamma + 1) * math.exp(special.betaln(p + 1, gamma + k + 1))


def berezin_series(f: Symbol, w: complex, gamma: float, tol: float = 1e-15, max_terms: int = 200000) -> complex:
    """B_gamma(f)(w) in the disc from the kernel expansion.

    Expands |1 - z wbar|^(-2s) = sum c_j c_l z^j wbar^j zbar^l w^l with
    c_j = (s)_j / j!, s = 2 + gamma, and integrates term by term.
    Independent of the quadrature paths; converges slowly near |w| = 1.
    """
    f = _as_symbol(f)
    if f.n != 1:
        raise DomainError("series path is implemented for n = 1")
    w = complex(np.asarray(w).ravel()[0])
    t = abs(w) ** 2
    if t >= 1:
        raise DomainError("w must be interior")
    s = 2 + gamma
    total = 0j
    for (a,), (b,), k, c in f.terms:
        q = a - b
        acc = 0j
        j0 = max(0, -q)
        logc = lambda j: special.gammaln(s + j) - special.gammaln(s) - special.gammaln(j + 1)
        for j in range(j0, j0 + max_terms):
            l = j + q
            mag = math.exp(logc(j) + logc(l)) * _beta_moment(a + j, k, gamma)
            term = mag * np.conj(w) ** j * w**l
            acc += term
            if abs(term) < tol * max(abs(acc), 1e-300) and j > j0 + 10:
                break
        else:
            raise NumericalError("series did not converge; w too close to the sphere")
        total += c * acc
    return complex((1 - t) ** s * total)


# ---------------------------------------------------------------- closed forms


def mo_zbar_closed(t, one_minus_t=None, gamma: float = 0.0):
    """MO_gamma(zbar)(w) in the disc as a function of t = |w|^2.

    gamma = 0: MO^2 = (1-t)^2 (-(t + log(1-t))) / t^2.
    General gamma: MO^2 = (1-t) [1 - (gamma+1)/(gamma+2) 2F1(1, 1; gamma+3; t)].
    """
    t = np.asarray(t, dtype=float)
    om = 1 - t if one_minus_t is None else np.asarray(one_minus_t, dtype=float)
    if gamma == 0:
        safe = np.where(t > 1e-4, t, 1.0)
        big = om**2 * (-(t + np.log(om))) / safe**2
        # series t^j / ((j+1)(j+2)) near t = 0
        j = np.arange(12)
        small = om**2 * np.sum(t[..., None] ** j / ((j + 1) * (j + 2)), axis=-1)
        return np.sqrt(np.where(t > 1e-4, big, small))
    val = om * (1 - (gamma + 1) / (gamma + 2) * special.hyp2f1(1, 1, gamma + 3, t))
    return np.sqrt(np.maximum(val, 0.0))


# ---------------------------------------------------------------- cells and floor


def cell_statistics(f: Symbol, region, gamma: float, spec: QuadratureSpec | None = None) -> tuple[complex, float]:
    """(f_E, V(f; E)) with V(f;E)^2 = v_gamma(E)^-1 int_E |f - f_E|^2 dv_gamma."""
    f = _as_symbol(f)
    nodes = quadrature_nodes(region, WeightedMeasure(f.n, gamma), spec or QuadratureSpec())
    mass = float(np.sum(nodes.weights))
    if mass <= 0:
        raise DomainError("region has zero dv_gamma mass")
    vals = f(nodes.points)
    mean = complex(np.sum(nodes.weights * vals) / mass)
    var = float(np.sum(nodes.weights * np.abs(vals - mean) ** 2) / mass)
    return mean, math.sqrt(max(var, 0.0))


def mo_floor_check(f: Symbol, z, gamma: float, order: int = DEFAULT_ORDER, spec=None) -> tuple[bool, float]:
    """Check MO_gamma(f)(z) >= 2^-(n+1+gamma) (1-|z|^2)^((n+1+gamma)/2) ||f - int f dv_gamma||.

    Returns ``(holds, margin)`` with margin = LHS - RHS.
    """
    zp = _point(z)
    n = zp.shape[0]
    s = _exponent(n, gamma)
    lhs = mean_oscillation(f, zp, gamma, order, spec)
    spread = mean_oscillation(f, np.zeros(n, complex), gamma, order, spec)
    rhs = 2.0 ** (-s) * (1 - float(norm2(zp))) ** (s / 2) * spread
    margin = lhs - rhs
    return margin >= -1e-12, margin


__all__ = [
    "MobiusRule",
    "berezin",
    "berezin_direct",
    "berezin_series",
    "cell_statistics",
    "generalized_kernel",
    "generalized_mean_oscillation",
    "kernel",
    "mean_oscillation",
    "mo_floor_check",
    "mo_zbar_closed",
    "mobius_rule",
    "normalized_kernel",
]
