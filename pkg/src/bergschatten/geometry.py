"""Geometry of the unit ball B_n in C^n.

Points are complex numpy arrays whose last axis has length ``n``; every
function broadcasts over leading axes.  The Hermitian pairing is
``z . w = sum z_i conj(w_i)`` and distances are the Bergman distance
``d(0, z) = atanh|z|`` and the non-isotropic boundary distance
``beta(u, v) = |1 - u . v|^(1/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DimensionError, DomainError

BOUNDARY_TOL = 1e-14
SQRT2 = math.sqrt(2.0)


def _as_points(z) -> np.ndarray:
    if isinstance(z, BallPoint):
        return z.coords
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


def _check_dims(z: np.ndarray, w: np.ndarray) -> None:
    if z.shape[-1] != w.shape[-1]:
        raise DimensionError(f"dimension mismatch: {z.shape[-1]} vs {w.shape[-1]}")


@dataclass(frozen=True)
class BallPoint:
    """A point of the closed unit ball; ``boundary=True`` marks |z| = 1."""

    coords: np.ndarray
    boundary: bool = False
    norm: float = field(init=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=complex)).copy()
        if c.ndim != 1:
            raise DimensionError("BallPoint holds a single point")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        nrm = float(np.linalg.norm(c))
        object.__setattr__(self, "norm", nrm)
        if self.boundary:
            if abs(nrm - 1.0) > BOUNDARY_TOL:
                raise DomainError(f"|z| = {nrm!r} is not on the sphere")
        elif nrm >= 1.0:
            raise DomainError(f"|z| = {nrm!r} is not interior")

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class CarlesonSet:
    """V_z^rho = {w : |1 - w . z/|z|| <= rho (1 - |z|)}."""

    apex: np.ndarray
    aperture: float

    def __post_init__(self):
        a = _as_points(self.apex)
        if self.aperture <= 0:
            raise DomainError("aperture must be positive")
        if np.linalg.norm(a) == 0:
            raise DomainError("apex must be nonzero")
        object.__setattr__(self, "apex", a)


def herm_dot(z, w) -> np.ndarray:
    """Hermitian pairing sum_i z_i conj(w_i) over the last axis."""
    z = _as_points(z)
    w = _as_points(w)
    _check_dims(z, w)
    return np.sum(z * np.conj(w), axis=-1)


def norm2(z) -> np.ndarray:
    z = _as_points(z)
    return np.sum(z.real**2 + z.imag**2, axis=-1)


def _require_interior(*pts: np.ndarray) -> None:
    for p in pts:
        if np.any(norm2(p) >= 1.0):
            raise DomainError("point on or outside the unit sphere")


def one_minus_mobius_sq(z, w) -> np.ndarray:
    """1 - |phi_z(w)|^2 = (1-|z|^2)(1-|w|^2)/|1 - w.z|^2, evaluated directly."""
    z = _as_points(z)
    w = _as_points(w)
    _check_dims(z, w)
    return (1 - norm2(z)) * (1 - norm2(w)) / np.abs(1 - herm_dot(w, z)) ** 2


def mobius_map(z, w) -> np.ndarray:
    """The involutive automorphism phi_z interchanging z and 0, applied to w.

    phi_z(w) = (z - P_z w - s_z Q_z w) / (1 - w.z) with P_z the orthogonal
    projection onto C z, Q_z = I - P_z and s_z = sqrt(1 - |z|^2).
    """
    z = _as_points(z)
    w = _as_points(w)
    _check_dims(z, w)
    _require_interior(z)
    z, w = np.broadcast_arrays(z, w)
    zz = norm2(z)[..., None]
    wz = herm_dot(w, z)[..., None]
    safe = np.where(zz > 0, zz, 1.0)
    pw = np.where(zz > 0, wz / safe * z, 0.0)
    qw = w - pw
    s = np.sqrt(1 - zz)
    return (z - pw - s * qw) / (1 - wz)


def bergman_distance(z, w) -> np.ndarray:
    """d(z, w) = 1/2 log((1+|phi_z(w)|)/(1-|phi_z(w)|)), stable near the sphere."""
    z = _as_points(z)
    w = _as_points(w)
    _check_dims(z, w)
    _require_interior(z, w)
    q = np.clip(one_minus_mobius_sq(z, w), 0.0, 1.0)
    a = np.sqrt(1.0 - q)
    # (1+a)/(1-a) = (1+a)^2 / q; loses digits when a is tiny, so near the
    # diagonal use |phi_z(w)| itself
    with np.errstate(divide="ignore"):
        far = np.log1p(a) - 0.5 * np.log(q)
    near = np.arctanh(np.minimum(np.sqrt(norm2(mobius_map(z, w))), 0.5))
    return np.where(a < 0.5, near, far)


def distance_from_origin(z) -> np.ndarray:
    r = np.sqrt(norm2(z))
    if np.any(r >= 1.0):
        raise DomainError("point on or outside the unit sphere")
    return np.arctanh(r)


def nonisotropic_distance(u, v) -> np.ndarray:
    """beta(u, v) = |1 - u.v|^(1/2) for boundary points."""
    u = _as_points(u)
    v = _as_points(v)
    _check_dims(u, v)
    for p in (u, v):
        if np.any(np.abs(np.sqrt(norm2(p)) - 1.0) > BOUNDARY_TOL):
            raise DomainError("nonisotropic distance needs boundary points")
    return np.sqrt(np.abs(1 - herm_dot(u, v)))


def to_boundary(z) -> np.ndarray:
    """z/|z| renormalized so that |result| = 1 to machine precision."""
    z = _as_points(z)
    r = np.sqrt(norm2(z))[..., None]
    if np.any(r == 0):
        raise DomainError("the origin has no radial direction")
    u = z / r
    return u / np.sqrt(norm2(u))[..., None]


def radial_project(z, r) -> np.ndarray:
    """Radial projection onto the Bergman sphere S_r: tanh(r) z/|z|."""
    z = _as_points(z)
    if np.any(np.asarray(r) <= 0):
        raise DomainError("radius must be positive")
    rad = np.sqrt(norm2(z))
    if np.any(rad == 0):
        raise DomainError("undefined direction: z = 0")
    return np.tanh(np.asarray(r))[..., None] * z / rad[..., None]


def carleson_contains(cset: CarlesonSet, w) -> np.ndarray:
    """Membership in V_z^rho."""
    w = _as_points(w)
    z = cset.apex
    rz = math.sqrt(float(norm2(z)))
    lhs = np.abs(1 - herm_dot(w, z / rz))
    return lhs <= cset.aperture * (1 - rz)


def carleson_aperture(apex, w) -> np.ndarray:
    """Smallest rho with w in V_apex^rho."""
    w = _as_points(w)
    z = _as_points(apex)
    rz = np.sqrt(norm2(z))
    return np.abs(1 - herm_dot(w, z / rz[..., None])) / (1 - rz)


def kernel_ratio_deviation(z, u, v, b: float) -> np.ndarray:
    """|(1 - z.u)^b / (1 - z.v)^b - 1| with principal powers (Re > 0 on B_n)."""
    num = (1 - herm_dot(z, u)) ** b
    den = (1 - herm_dot(z, v)) ** b
    return np.abs(num / den - 1)


def cap_L_at_zero(n: int) -> float:
    """lim_{r->0+} L(r) = Gamma(n+1) / (4 Gamma(n/2+1)^2)."""
    return math.exp(math.lgamma(n + 1) - 2 * math.lgamma(n / 2 + 1)) / 4


def cap_L(r: float, n: int) -> tuple[float, float]:
    """L(r) = sigma(B_r(z)) / r^(2n) for the non-isotropic ball on the sphere.

    Returns ``(value, error_estimate)``.  For n = 1 the closed form
    sigma(B_r) = (2/pi) arcsin(r^2/2) is used (error 0).  For n >= 2 the
    planar integral over {2x > r^2, |u| > 1} of (2x - r^2)^(n-2) |u|^(-2n)
    is evaluated in polar coordinates: the radial integral is a polynomial
    after rho = rho0/s and is done exactly, the angular one adaptively.
    """
    if not (0 < r <= SQRT2 * (1 + 1e-15)):
        raise DomainError(f"r = {r!r} outside (0, sqrt 2]")
    if n < 1:
        raise DomainError("n >= 1")
    r2 = r * r
    if n == 1:
        return (2 / math.pi) * math.asin(min(r2 / 2, 1.0)) / r2, 0.0
    s, ws = np.polynomial.legendre.leggauss(n + 1)
    s = 0.5 * (s + 1)
    ws = 0.5 * ws

    def radial(theta: float) -> float:
        c = math.cos(theta)
        if c <= 0:
            return 0.0
        rho0 = max(1.0, r2 / (2 * c))
        poly = s ** (n - 1) * (2 * c * rho0 - r2 * s) ** (n - 2)
        return rho0 ** (2 - 2 * n) * float(np.dot(ws, poly))

    # rho0 switches branch where cos(theta) = r^2/2
    kink = math.acos(min(1.0, r2 / 2))
    pts = [kink] if 0 < kink < math.pi / 2 else None
    val, err = integrate.quad(radial, 0.0, math.pi / 2, points=pts, epsabs=1e-14, epsrel=1e-12, limit=200)
    scale = 2 * (n - 1) / math.pi
    return scale * val, scale * err


def cap_sigma_direct(r: float, n: int) -> float:
    """sigma(B_r(e_1)) from the density (n-1)/pi (1-|w|^2)^(n-2) of the first
    coordinate of a uniform point on the sphere (n >= 2); independent of
    ``cap_L``'s planar formula and used to cross-check it."""
    if n == 1:
        return (2 / math.pi) * math.asin(min(r * r / 2, 1.0))
    r2 = r * r

    # region |w| < 1, |1 - w| < r^2, polar about 1: w = 1 - t e^{i phi}
    def inner(phi: float) -> float:
        # |w|^2 = 1 - 2 t cos phi + t^2 < 1  <=>  t < 2 cos phi
        tmax = min(r2, 2 * math.cos(phi))
        if tmax <= 0:
            return 0.0
        f = lambda t: (2 * t * math.cos(phi) - t * t) ** (n - 2) * t
        return integrate.quad(f, 0.0, tmax, epsabs=1e-15, epsrel=1e-12)[0]

    val = integrate.quad(inner, -math.pi / 2, math.pi / 2, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    return (n - 1) / math.pi * val


def random_ball_points(rng: np.random.Generator, count: int, n: int, rmax: float = 1.0) -> np.ndarray:
    """Uniformly distributed directions with |z| uniform in [0, rmax)."""
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (rng.uniform(0, rmax, count))[:, None]


def random_sphere_points(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def tanh_radius(d) -> np.ndarray:
    """Euclidean radius of the Bergman sphere of radius d about 0."""
    return np.tanh(d)


__all__ = [
    "BOUNDARY_TOL",
    "BallPoint",
    "CarlesonSet",
    "bergman_distance",
    "cap_L",
    "cap_L_at_zero",
    "cap_sigma_direct",
    "carleson_aperture",
    "carleson_contains",
    "distance_from_origin",
    "herm_dot",
    "kernel_ratio_deviation",
    "mobius_map",
    "nonisotropic_distance",
    "norm2",
    "one_minus_mobius_sq",
    "radial_project",
    "random_ball_points",
    "random_sphere_points",
    "to_boundary",
]
