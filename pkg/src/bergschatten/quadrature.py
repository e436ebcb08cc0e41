"""Integration against dv_gamma, dtau and sigma on the unit ball.

For n = 1 every region is decomposed into polar boxes and integrated with a
product rule: Gauss-Jacobi (or Gauss-Legendre) in u = |z|^2 and the periodic
trapezoid rule (or Gauss-Legendre on a patch) in the angle.  For n >= 2 the
rule is stratified Monte Carlo: u = |z|^2 is drawn from its Beta(n, gamma+1)
law restricted to equal-mass strata of each radial shell of the region and
directions are uniform on the sphere.

Regions are duck-typed.  Each provides ``contains(z)`` and
``radial_pieces()`` (a list of ``(r0, r1, fraction)`` triples: the region is a
union of cones over direction sets of normalized surface measure
``fraction`` cut to the shells r0 <= |z| < r1).  Regions that are exact
unions of polar boxes in the disc also provide ``polar_boxes()``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, IntegrationError

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class WeightedMeasure:
    """dv_gamma = c_gamma (1 - |z|^2)^gamma dv, a probability measure on B_n."""

    n: int
    gamma: float

    def __post_init__(self):
        if self.gamma <= -1:
            raise DomainError("gamma must exceed -1")
        if self.n < 1:
            raise DomainError("n >= 1")

    @property
    def c_gamma(self) -> float:
        n, g = self.n, self.gamma
        return math.exp(math.lgamma(n + 1 + g) - n * math.log(math.pi) - math.lgamma(g + 1))

    @property
    def kernel_exponent(self) -> float:
        return self.n + 1 + self.gamma

    def shell_mass(self, r0, r1):
        """v_gamma({r0 <= |z| < r1}); u = |z|^2 ~ Beta(n, gamma + 1)."""
        a, b = self.n, self.gamma + 1
        return special.betainc(a, b, np.square(r1)) - special.betainc(a, b, np.square(r0))


@dataclass(frozen=True)
class QuadratureSpec:
    radial_order: int = 32
    angular_order: int = 64
    samples: int = 20000
    seed: int = 0
    target_rel_error: float = 1e-10
    strata: int = 8

    def __post_init__(self):
        if self.radial_order < 4 or self.angular_order < 4:
            raise DomainError("quadrature orders must be >= 4")
        if self.target_rel_error <= 0:
            raise DomainError("target error must be positive")

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(
            2 * self.radial_order,
            2 * self.angular_order,
            4 * self.samples,
            self.seed + 1,
            self.target_rel_error,
            self.strata,
        )


@dataclass(frozen=True)
class IntegrationResult:
    value: complex
    error: float
    nodes: int

    def __complex__(self):
        return complex(self.value)


@dataclass
class QuadratureNodes:
    """Points (N, n) and weights (N,) of a rule for dv_gamma on a region.

    For Monte Carlo rules ``strata`` labels the stratum of each node and
    ``stratum_mass`` holds the exact dv_gamma mass of each stratum, so that
    standard errors can be formed.
    """

    points: np.ndarray
    weights: np.ndarray
    strata: np.ndarray | None = None
    stratum_mass: np.ndarray | None = None
    stratum_count: np.ndarray | None = None

    @property
    def deterministic(self) -> bool:
        return self.strata is None

    def integrate(self, values: np.ndarray) -> tuple[complex, float]:
        values = np.asarray(values)
        val = complex(np.sum(self.weights * values))
        if self.deterministic:
            return val, 0.0
        var = 0.0
        for k, mass in enumerate(self.stratum_mass):
            sel = self.strata == k
            m = self.stratum_count[k]
            if m < 2 or mass == 0:
                continue
            # weights inside a stratum are mass/m on the region, 0 outside
            x = self.weights[sel] * m / mass * values[sel]
            var += mass**2 * np.var(x, ddof=1) / m
        return val, float(math.sqrt(var))


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Ball:
    """The ball |z| <= radius (radius = 1 is the whole ball)."""

    radius: float = 1.0

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return np.sum(np.abs(z) ** 2, axis=-1) <= self.radius**2

    def radial_pieces(self):
        return [(0.0, self.radius, 1.0)]

    def polar_boxes(self):
        return [(0.0, self.radius, 0.0, TWO_PI)]


@dataclass(frozen=True)
class Shell:
    """r_inner <= |z| < r_outer."""

    r_inner: float
    r_outer: float

    def contains(self, z) -> np.ndarray:
        r = np.sqrt(np.sum(np.abs(np.asarray(z)) ** 2, axis=-1))
        return (r >= self.r_inner) & (r < self.r_outer)

    def radial_pieces(self):
        return [(self.r_inner, self.r_outer, 1.0)]

    def polar_boxes(self):
        return [(self.r_inner, self.r_outer, 0.0, TWO_PI)]


@dataclass(frozen=True)
class PolarBox:
    """n = 1 polar box r0 <= |z| < r1, arg z in [th0, th1) (mod 2 pi)."""

    r0: float
    r1: float
    th0: float
    th1: float

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        z = z[..., 0] if z.ndim and z.shape[-1] == 1 else z
        r = np.abs(z)
        t = np.mod(np.angle(z) - self.th0, TWO_PI)
        return (r >= self.r0) & (r < self.r1) & (t < self.th1 - self.th0)

    def radial_pieces(self):
        return [(self.r0, self.r1, (self.th1 - self.th0) / TWO_PI)]

    def polar_boxes(self):
        return [(self.r0, self.r1, self.th0, self.th1)]


@dataclass(frozen=True)
class Union:
    """Disjoint union of regions."""

    parts: tuple

    def contains(self, z) -> np.ndarray:
        out = np.zeros(np.asarray(z).shape[:-1], dtype=bool)
        for p in self.parts:
            out |= p.contains(z)
        return out

    def radial_pieces(self):
        return [piece for p in self.parts for piece in p.radial_pieces()]

    def polar_boxes(self):
        return [b for p in self.parts for b in p.polar_boxes()]


@dataclass(frozen=True)
class Difference:
    """Points of ``outer`` not in ``inner`` (membership and Monte Carlo only)."""

    outer: object
    inner: object

    def contains(self, z) -> np.ndarray:
        return self.outer.contains(z) & ~self.inner.contains(z)

    exact_pieces = False

    def radial_pieces(self):
        return self.outer.radial_pieces()


# ---------------------------------------------------------------- rules


def _radial_rule(u0: float, u1: float, order: int, gamma: float):
    """Nodes/weights for int_{u0}^{u1} g(u) (1-u)^gamma du."""
    if u1 >= 1.0:
        s, w = special.roots_jacobi(order, gamma, 0.0)
        h = 1.0 - u0
        u = u0 + h * (1 + s) / 2
        return u, w * (h / 2) ** (gamma + 1)
    s, w = np.polynomial.legendre.leggauss(order)
    h = u1 - u0
    u = u0 + h * (1 + s) / 2
    return u, w * (h / 2) * (1 - u) ** gamma


def _angular_rule(th0: float, th1: float, order: int):
    if th1 - th0 >= TWO_PI * (1 - 1e-15):
        t = th0 + TWO_PI * np.arange(order) / order
        return t, np.full(order, TWO_PI / order)
    s, w = np.polynomial.legendre.leggauss(order)
    h = th1 - th0
    return th0 + h * (1 + s) / 2, w * h / 2


def polar_box_nodes(boxes, gamma: float, radial_order: int, angular_order: int):
    """Product rule for dv_gamma (n = 1) over a list of polar boxes."""
    pts, wts = [], []
    scale = (gamma + 1) / TWO_PI
    for r0, r1, th0, th1 in boxes:
        if r1 <= r0 or th1 <= th0:
            continue
        u, wu = _radial_rule(r0 * r0, min(r1, 1.0) ** 2, radial_order, gamma)
        t, wt = _angular_rule(th0, th1, angular_order)
        z = np.sqrt(u)[:, None] * np.exp(1j * t)[None, :]
        pts.append(z.ravel())
        wts.append((scale * wu[:, None] * wt[None, :]).ravel())
    if not pts:
        return np.zeros((0, 1), complex), np.zeros(0)
    return np.concatenate(pts)[:, None], np.concatenate(wts)


def _mc_nodes(region, measure: WeightedMeasure, spec: QuadratureSpec) -> QuadratureNodes:
    n, a, b = measure.n, measure.n, measure.gamma + 1
    rng = np.random.default_rng(spec.seed)
    bounds = []
    for r0, r1, _ in region.radial_pieces():
        f0, f1 = special.betainc(a, b, r0 * r0), special.betainc(a, b, min(r1, 1.0) ** 2)
        edges = np.linspace(f0, f1, spec.strata + 1)
        bounds.extend(zip(edges[:-1], edges[1:]))
    bounds = sorted(set(bounds))
    masses = np.array([hi - lo for lo, hi in bounds])
    total = masses.sum()
    if total <= 0:
        raise DomainError("region has zero dv_gamma mass")
    counts = np.maximum(2, np.round(spec.samples * masses / total)).astype(int)
    pts, wts, labels = [], [], []
    for k, ((lo, hi), m) in enumerate(zip(bounds, counts)):
        cdf = lo + (hi - lo) * rng.random(m)
        u = special.betaincinv(a, b, cdf)
        g = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        z = np.sqrt(u)[:, None] * g
        inside = region.contains(z)
        pts.append(z)
        wts.append(np.where(inside, masses[k] / m, 0.0))
        labels.append(np.full(m, k))
    return QuadratureNodes(
        np.concatenate(pts), np.concatenate(wts), np.concatenate(labels), masses, counts
    )


def quadrature_nodes(region, measure: WeightedMeasure, spec: QuadratureSpec | None = None) -> QuadratureNodes:
    """Integration nodes for dv_gamma on ``region``."""
    spec = spec or QuadratureSpec()
    if measure.n == 1 and hasattr(region, "polar_boxes"):
        pts, wts = polar_box_nodes(region.polar_boxes(), measure.gamma, spec.radial_order, spec.angular_order)
        return QuadratureNodes(pts, wts)
    return _mc_nodes(region, measure, spec)


def _evaluate(f, pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(pts), dtype=complex)
    vals = np.broadcast_to(vals, pts.shape[:1])
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise IntegrationError(f"non-finite integrand at z = {pts[i].tolist()}")
    return vals


def integrate(f, region, measure: WeightedMeasure, spec: QuadratureSpec | None = None, estimate_error: bool = True) -> IntegrationResult:
    """Approximate int_region f dv_gamma.

    ``f`` maps an (N, n) complex array to N values.  The error estimate is
    |result - result at the refined spec| for the deterministic rule, and the
    stratified standard error (in quadrature with that difference) for
    Monte Carlo.
    """
    spec = spec or QuadratureSpec()
    nodes = quadrature_nodes(region, measure, spec)
    val, se = nodes.integrate(_evaluate(f, nodes.points))
    err = se
    if estimate_error and nodes.deterministic:
        fine = quadrature_nodes(region, measure, spec.refined())
        err = abs(val - fine.integrate(_evaluate(f, fine.points))[0])
    return IntegrationResult(val, float(err), len(nodes.weights))


def volume(region, measure: WeightedMeasure) -> float:
    """v_gamma(region) from the closed-form radial law and direction fractions."""
    if not getattr(region, "exact_pieces", True):
        raise DomainError("region has no closed-form radial decomposition")
    return float(sum(frac * measure.shell_mass(r0, r1) for r0, r1, frac in region.radial_pieces()))


# ---------------------------------------------------------------- moments


def moment(k: int, gamma: float) -> float:
    """m_k = int_D |z|^(2k) dv_gamma = k! Gamma(gamma+2) / Gamma(k+gamma+2)."""
    if k < 0:
        raise DomainError("k >= 0")
    return math.exp(math.lgamma(k + 1) + math.lgamma(gamma + 2) - math.lgamma(k + gamma + 2))


def moments(kmax: int, gamma: float) -> np.ndarray:
    k = np.arange(kmax + 1)
    return np.exp(special.gammaln(k + 1) + special.gammaln(gamma + 2) - special.gammaln(k + gamma + 2))


def monomial_inner(a: int, b: int, c: int, d: int, gamma: float) -> float:
    """<z^a zbar^b, z^c zbar^d> in L^2(D, dv_gamma)."""
    if a + d != b + c:
        return 0.0
    return moment(a + d, gamma)


def multi_moment(alpha, n: int, gamma: float) -> float:
    """int_{B_n} |z^alpha|^2 dv_gamma = alpha! Gamma(n+1+gamma)/Gamma(n+1+gamma+|alpha|)."""
    alpha = [int(x) for x in alpha]
    if len(alpha) != n:
        raise DomainError("multi-index length must equal n")
    s = sum(alpha)
    return math.exp(
        sum(math.lgamma(x + 1) for x in alpha) + math.lgamma(n + 1 + gamma) - math.lgamma(n + 1 + gamma + s)
    )


# ---------------------------------------------------------------- tau


def tau_shell(r0: float, r1: float, n: int) -> float:
    """tau({r0 <= |z| < r1}) = (pi^n/n!) [(u/(1-u))^n] with u = |z|^2."""
    if r1 >= 1.0:
        warnings.warn("tau diverges on regions touching the sphere", RuntimeWarning, stacklevel=2)
        return math.inf
    g = lambda r: (r * r / (1 - r * r)) ** n
    return math.pi**n / math.factorial(n) * (g(r1) - g(r0))


def tau_measure(region, n: int) -> float:
    """Mobius-invariant measure dtau = (1 - |z|^2)^(-n-1) dv of a region."""
    if region is None:
        return 0.0
    if not getattr(region, "exact_pieces", True):
        raise DomainError("region has no closed-form radial decomposition")
    total = 0.0
    for r0, r1, frac in region.radial_pieces():
        if frac == 0 or r1 <= r0:
            continue
        total += frac * tau_shell(r0, r1, n)
    return total


__all__ = [
    "Ball",
    "Difference",
    "IntegrationResult",
    "PolarBox",
    "QuadratureNodes",
    "QuadratureSpec",
    "Shell",
    "Union",
    "WeightedMeasure",
    "integrate",
    "moment",
    "moments",
    "monomial_inner",
    "multi_moment",
    "polar_box_nodes",
    "quadrature_nodes",
    "tau_measure",
    "tau_shell",
    "volume",
]
