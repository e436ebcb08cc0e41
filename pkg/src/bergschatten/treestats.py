"""Measured constants of a built Bergman tree.

Each function returns plain dictionaries of numbers so that experiment
drivers can put them straight into reports.  "Per level" summaries are
keyed by level as strings (JSON friendly).
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import mobius_map, random_sphere_points
from .tree import BergmanTree, beta_boundary

TWO_PI = 2 * math.pi


def sample_nodes(tree: BergmanTree, per_level: int, min_level: int = 0, max_level: int | None = None) -> list[int]:
    """Up to ``per_level`` evenly spaced node ids from each level."""
    max_level = tree.depth if max_level is None else max_level
    out = []
    for N in range(min_level, max_level + 1):
        ids = list(tree.level_ids(N))
        step = max(1, len(ids) // per_level)
        out.extend(ids[::step][:per_level])
    return out


def _ray_directions(n: int, count: int, rng) -> np.ndarray:
    if n == 1:
        return np.exp(1j * TWO_PI * (np.arange(count) + 0.5) / count)[:, None]
    return random_sphere_points(rng, count, n)


def cell_radii(tree: BergmanTree, alpha: int, rays: int = 256, grid: int = 48, seed: int = 0) -> tuple[float, float]:
    """(inradius, circumradius) of K_alpha about c_alpha in the Bergman metric.

    Along each geodesic ray from the center the first and the last exit
    from the cell are bracketed on a grid and refined by bisection.
    """
    nd = tree.nodes[alpha]
    c = nd.center
    rng = np.random.default_rng([seed, alpha])
    v = _ray_directions(tree.n, rays, rng)
    cover = tree.nets[nd.level].covering if nd.level else tree.lam
    rmax = 2 * max(tree.lam, cover) + 2 * tree.lam

    def inside(s: np.ndarray) -> np.ndarray:
        # s has shape (..., rays)
        pts = (np.tanh(s)[..., None] * v).reshape(-1, tree.n)
        if np.linalg.norm(c) > 0:
            pts = mobius_map(c, pts)
        return (tree.locate_many(pts) == alpha).reshape(s.shape)

    while True:
        s = np.linspace(0, rmax, grid + 1)
        ins = inside(np.broadcast_to(s[1:, None], (grid, rays)))
        if not np.any(ins[-1]):
            break
        rmax *= 2
    ins = np.vstack([np.ones((1, rays), bool), ins])  # the center is inside
    first_out = np.argmax(~ins, axis=0)
    last_in = grid - np.argmax(ins[::-1], axis=0)

    def bisect(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            m = inside(mid)
            lo = np.where(m, mid, lo)
            hi = np.where(m, hi, mid)
        return 0.5 * (lo + hi)

    r_in = bisect(s[first_out - 1], s[first_out])
    r_out = bisect(s[last_in], s[last_in + 1])
    return float(r_in.min()), float(r_out.max())


def sandwich_by_level(tree: BergmanTree, per_level: int = 4, rays: int = 256, min_level: int = 1) -> dict:
    """Per-level min inradius and max circumradius over sampled cells."""
    inner, outer = {}, {}
    for i in sample_nodes(tree, per_level, min_level):
        N = tree.nodes[i].level
        a, b = cell_radii(tree, i, rays)
        inner[N] = min(inner.get(N, math.inf), a)
        outer[N] = max(outer.get(N, 0.0), b)
    return {"inradius": inner, "circumradius": outer}


def drift(values: dict, levels) -> float:
    """max/min of a per-level quantity over the given levels."""
    v = [values[N] for N in levels if N in values]
    return max(v) / min(v)


def volume_law(tree: BergmanTree, gamma: float) -> dict:
    """v_gamma(K_alpha) e^{2 lambda d(alpha)(n+1+gamma)} over every cell."""
    s = tree.n + 1 + gamma
    ratios = np.array(
        [tree.cell_volume(nd.id, gamma) * math.exp(2 * tree.lam * nd.level * s) for nd in tree.nodes]
    )
    return {"min": float(ratios.min()), "max": float(ratios.max()), "band": float(ratios.max() / ratios.min())}


def one_minus_band(tree: BergmanTree) -> dict:
    """Range of (1 - |z|^2) e^{2 lambda d(alpha)} over all cells (closed form per shell)."""
    lo, hi = math.inf, 0.0
    for N in range(tree.depth + 1):
        r0, r1 = tree.radii(N)
        e = math.exp(2 * tree.lam * N)
        lo = min(lo, (1 - r1 * r1) * e)
        hi = max(hi, (1 - r0 * r0) * e)
    return {"min": lo, "max": hi, "band": hi / lo}


def child_count_constant(tree: BergmanTree) -> dict:
    """max over alpha, ell of card C^ell(alpha) e^{-2 n ell lambda}."""
    best = 0.0
    # descendants counted level by level from the child lists
    counts = [dict() for _ in range(tree.depth + 1)]
    for nd in reversed(tree.nodes):
        c = {0: 1}
        for ch in nd.children:
            for ell, k in counts[0].get(ch, {}).items():
                c[ell + 1] = c.get(ell + 1, 0) + k
        counts[0][nd.id] = c
        for ell, k in c.items():
            if ell >= 1:
                best = max(best, k * math.exp(-2 * tree.n * ell * tree.lam))
    return {"constant": best}


def separation_constants(tree: BergmanTree, Ms=(1.0, 2.0, 3.0), min_level: int = 1, chunk: int = 2048) -> dict:
    """For same-level pairs with d(c, c') > M: min of beta e^{lambda d} / (e^M - 1)^(1/2)."""
    per_level: dict = {}
    for N in range(min_level, tree.depth + 1):
        dirs = tree.directions(N)
        if len(dirs) < 2:
            continue
        rc = math.tanh(tree.lam * (N + 0.5))
        best = math.inf
        for s in range(0, len(dirs), chunk):
            blk = dirs[s : s + chunk]
            g = blk @ np.conj(dirs).T
            b = np.sqrt(np.abs(1 - g))
            q = np.clip((1 - rc * rc) ** 2 / np.abs(1 - rc * rc * g) ** 2, 0, 1)
            with np.errstate(divide="ignore"):
                d = np.log1p(np.sqrt(1 - q)) - 0.5 * np.log(q)
            for M in Ms:
                sel = d > M
                if np.any(sel):
                    best = min(best, float(b[sel].min()) * math.exp(tree.lam * N) / math.sqrt(math.expm1(M)))
        if math.isfinite(best):
            per_level[N] = best
    vals = list(per_level.values())
    return {"per_level": per_level, "global": min(vals) if vals else math.nan}


def _cell_points(tree: BergmanTree, beta: int, count: int, rng) -> np.ndarray:
    """Random points of K_beta (exact boxes in dyadic mode, filtered cones otherwise)."""
    nd = tree.nodes[beta]
    r0, r1 = tree.radii(nd.level)
    if tree.mode == "dyadic":
        _, _, t0, t1 = tree.cell_box(beta)
        rr = np.sqrt(rng.uniform(r0 * r0, r1 * r1, count))
        th = rng.uniform(t0, t1, count)
        # include the corners, where |1 - w.u| is extremal
        rr = np.concatenate([rr, [r0, r0, r1 * (1 - 1e-15), r1 * (1 - 1e-15)]])
        th = np.concatenate([th, [t0, t1, t0, t1]])
        return (rr * np.exp(1j * th))[:, None]
    width = 2.0 * math.sqrt(2 * (1 - math.cos(min(math.pi, 2 * tree.lam)))) * math.exp(-tree.lam * nd.level) + 1e-3
    u = nd.direction[None, :] + width * (
        rng.standard_normal((4 * count, tree.n)) + 1j * rng.standard_normal((4 * count, tree.n))
    )
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rr = np.sqrt(rng.uniform(r0 * r0, r1 * r1, 4 * count))
    pts = rr[:, None] * u
    return pts[tree.locate_many(pts) == beta][:count]


def carleson_apertures(tree: BergmanTree, per_level: int = 4, samples: int = 16, seed: int = 0) -> dict:
    """Per-level max of |1 - w.c/|c|| / (1 - |c|) over w in descendants of alpha."""
    rng = np.random.default_rng(seed)
    per: dict = {}
    for a in sample_nodes(tree, per_level, 1, tree.depth - 1):
        nd = tree.nodes[a]
        u = nd.direction
        rc = np.linalg.norm(nd.center)
        best = 0.0
        for b in tree.descendants(a):
            w = _cell_points(tree, b, samples, rng)
            if len(w):
                best = max(best, float(np.max(np.abs(1 - w @ np.conj(u)))) / (1 - rc))
        per[nd.level] = max(per.get(nd.level, 0.0), best)
    return {"per_level": per, "rho": max(per.values()) if per else math.nan}


def boundary_counts(tree: BergmanTree, levels, per_level: int = 4, classes=None) -> dict:
    """Ring and ball counts of bdd N_alpha^k for k up to sqrt(2) e^{lambda d(alpha)}.

    Returns the constants max card(ring)/max(k,1)^(2n-1) and
    max card(ball)/(k+1)^(2n); with ``classes`` the counts are restricted to
    alpha's color class.
    """
    n = tree.n
    member = None
    if classes is not None:
        member = np.zeros(len(tree), dtype=int)
        for cl in classes:
            member[list(cl.members)] = cl.label
    ring_c, ball_c = 0.0, 0.0
    for N in levels:
        dirs = tree.directions(N)
        ids = list(tree.level_ids(N))
        step = max(1, len(ids) // per_level)
        for a in ids[::step][:per_level]:
            j = tree.nodes[a].index
            b = beta_boundary(dirs, dirs[j]) * math.exp(tree.lam * N)
            if member is not None:
                same = member[np.array(ids)] == member[a]
                b = b[same]
            kmax = int(math.ceil(math.sqrt(2) * math.exp(tree.lam * N)))
            for k in range(0, kmax + 1):
                ring = int(np.sum((b >= k) & (b < k + 1)))
                ball = int(np.sum(b < k + 1))
                ring_c = max(ring_c, ring / max(k, 1) ** (2 * n - 1))
                ball_c = max(ball_c, ball / (k + 1) ** (2 * n))
    return {"ring_constant": ring_c, "ball_constant": ball_c}


__all__ = [
    "boundary_counts",
    "carleson_apertures",
    "cell_radii",
    "child_count_constant",
    "drift",
    "one_minus_band",
    "sample_nodes",
    "sandwich_by_level",
    "separation_constants",
    "volume_law",
]
