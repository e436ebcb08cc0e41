"""Bergman trees: cells K_alpha of the ball built from nets on Bergman spheres.

Level N >= 1 holds the points with lambda N <= d(0, z) < lambda (N + 1); the
root is the ball d(0, z) < lambda.  A level is split into cones over a
partition of the unit sphere, one cone per anchor z_j^N on S_{lambda N}.

Two constructions are provided.

``dyadic`` (n = 1, lambda = ln2 * 2^-N0): anchors at equispaced angles whose
count doubles each time e^{2 lambda N} doubles; cells are exact polar boxes
(the "top halves" of dyadic Carleson squares).

``net`` (any n): a greedy maximal lambda-separated set of a random candidate
pool on S_{lambda N}, refined by probe rounds until no probe point is
farther than lambda from the anchors; cells are Bergman-Voronoi cells
with ties broken toward the lowest index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DomainError, OutOfDepthError, ResolutionError
from .geometry import _as_points, bergman_distance, mobius_map, norm2, random_sphere_points
from .quadrature import WeightedMeasure

LN2 = math.log(2.0)
POOL_DENSITY = 32  # candidates per accepted anchor
FRACTION_SAMPLES = 64  # directions per anchor for the cell fractions
FRACTION_MIN = 1 << 16  # floor on the fraction sample for small nets
FRACTION_CHUNK = 1 << 18
TWO_PI = 2 * math.pi


def _real(x: np.ndarray) -> np.ndarray:
    """C^n -> R^2n embedding for KD-trees."""
    return np.concatenate([x.real, x.imag], axis=-1)


def beta_boundary(u, v) -> np.ndarray:
    """|1 - u.v|^(1/2) for unit vectors (no sphere check; vectors come from the tree)."""
    return np.sqrt(np.abs(1 - np.sum(u * np.conj(v), axis=-1)))


# ---------------------------------------------------------------- nodes


@dataclass(frozen=True)
class TreeNode:
    id: int
    level: int
    index: int
    anchor: np.ndarray
    center: np.ndarray
    parent: int | None
    children: tuple = ()

    @property
    def direction(self) -> np.ndarray:
        """c_alpha / |c_alpha| (zero vector for the root)."""
        r = np.linalg.norm(self.center)
        return self.center / r if r > 0 else self.center


@dataclass
class SphereNet:
    """Anchors on S_{lambda N} as unit directions plus their cell fractions."""

    level: int
    radius: float
    directions: np.ndarray
    fractions: np.ndarray
    rounds: int = 0
    covering_probe_max: float = 0.0
    covering: float = 0.0  # Bergman covering radius of the anchors on S_{lambda N}
    kdtree: cKDTree | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kdtree is None and len(self.directions):
            self.kdtree = cKDTree(_real(self.directions))

    def nearest(self, u: np.ndarray) -> np.ndarray:
        """Index of the Bergman-nearest anchor to r*u for unit directions u."""
        return _voronoi_index(self.radius, self.directions, self.kdtree, u)


def _voronoi_index(r: float, anchors: np.ndarray, kd: cKDTree, u: np.ndarray) -> np.ndarray:
    # on a fixed sphere d(ru, rv) increases with |1 - r^2 u.v|
    m = len(anchors)
    if m == 1:
        return np.zeros(len(u), dtype=int)
    k = min(8, m)
    x = _real(u)
    dist, idx = kd.query(x, k=k)
    vals = np.abs(1 - r * r * np.einsum("pki,pi->pk", anchors[idx], np.conj(u)))
    best = vals.min(axis=1)
    # |1 - r^2 u.v| >= 1 - r^2 + r^2 |u - v|^2 / 2 bounds the search ball
    bound = np.sqrt(np.maximum(2 * (best - (1 - r * r)), 0.0)) / r
    tie = vals <= best[:, None] * (1 + 1e-13) + 1e-300
    out = np.where(tie, idx, m).min(axis=1)
    slow = np.nonzero(bound >= dist[:, -1])[0] if k < m else []
    for p in slow:
        cand = np.array(sorted(kd.query_ball_point(x[p], bound[p] * (1 + 1e-12) + 1e-15)))
        v = np.abs(1 - r * r * anchors[cand] @ np.conj(u[p]))
        tie = v <= v.min() * (1 + 1e-13) + 1e-300
        out[p] = int(np.min(cand[tie]))
    return out


def _same_sphere_distance(r: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bergman distance between r*u and r*v (unit directions)."""
    q = (1 - r * r) ** 2 / np.abs(1 - r * r * np.sum(u * np.conj(v), axis=-1)) ** 2
    q = np.clip(q, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        return np.log1p(np.sqrt(1 - q)) - 0.5 * np.log(q)


def _climb_holes(r, anchors, kd, sample, lam, rng, keep: int = 1024, steps: int = 40) -> np.ndarray:
    """Directions at distance >= lam from every anchor, found by a random
    hill climb of the distance to the nearest anchor started from the worst
    covered sample points; empty when none turn up."""
    d = _same_sphere_distance(r, sample, anchors[_voronoi_index(r, anchors, kd, sample)])
    top = np.argsort(d)[-keep:]
    u, du = sample[top], d[top]
    step = 0.5 * math.sqrt(2 * (1 - r * r) * (math.cosh(lam) - 1)) / r
    for _ in range(steps):
        v = u + step * (rng.standard_normal(u.shape) + 1j * rng.standard_normal(u.shape))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        dv = _same_sphere_distance(r, v, anchors[_voronoi_index(r, anchors, kd, v)])
        up = dv > du
        u[up], du[up] = v[up], dv[up]
        step *= 0.9
    return u[du >= lam]


def build_sphere_net(
    level: int,
    lam: float,
    n: int,
    pool_size: int = 4000,
    probe_size: int = 4000,
    seed: int = 0,
    max_rounds: int = 400,
    max_pool: int = 2_000_000,
) -> SphereNet:
    """Greedy maximal lambda-separated net on S_{lambda N}.

    Candidates are visited in pool order and accepted when no accepted anchor
    is within Bergman distance lambda; the pool is doubled until it holds at
    least POOL_DENSITY candidates per anchor.  Probe rounds then add any probe
    direction at distance >= lambda from every anchor; the net is accepted
    once a full round adds nothing.  Cell fractions sigma(Q_j) are Monte Carlo
    estimates from FRACTION_SAMPLES uniform directions per anchor.
    """
    if level < 1:
        raise DomainError("sphere nets exist for levels N >= 1")
    if lam <= 0:
        raise DomainError("lambda must be positive")
    rng = np.random.default_rng([seed, level, n])
    r = math.tanh(lam * level)
    # d(ru, rv) < lam implies |u - v| < rho (Euclidean prefilter)
    rho = math.sqrt(2 * (1 - r * r) * (math.cosh(lam) - 1)) / r

    anchors: list[np.ndarray] = []

    def greedy(cands: np.ndarray) -> None:
        kd_c = cKDTree(_real(cands))
        blocked = np.zeros(len(cands), dtype=bool)
        if anchors:
            a = np.array(anchors)
            for i, nb in enumerate(kd_c.query_ball_point(_real(a), rho)):
                if nb:
                    nb = np.array(nb)
                    blocked[nb[_same_sphere_distance(r, cands[nb], a[i]) < lam]] = True
        for i in range(len(cands)):
            if blocked[i]:
                continue
            anchors.append(cands[i])
            nb = np.array(kd_c.query_ball_point(_real(cands[i]), rho))
            blocked[nb[_same_sphere_distance(r, cands[nb], cands[i]) < lam]] = True

    # refine the pool until it is much denser than the net it produces
    pool = pool_size
    while True:
        anchors.clear()
        greedy(random_sphere_points(rng, pool, n))
        if len(anchors) * POOL_DENSITY <= pool:
            break
        if pool >= max_pool:
            raise ResolutionError(f"level {level}: candidate pool exhausted at {pool} points; raise max_pool")
        pool = min(2 * pool, max_pool)
    rounds = 0
    probe_size = max(probe_size, 4 * len(anchors))
    while True:
        rounds += 1
        probe = random_sphere_points(rng, probe_size, n)
        a = np.array(anchors)
        kd = cKDTree(_real(a))
        near = _voronoi_index(r, a, kd, probe)
        dmin = _same_sphere_distance(r, probe, a[near])
        far = dmin >= lam
        if not np.any(far):
            break
        if rounds >= max_rounds:
            raise ResolutionError(
                f"level {level}: net still growing after {max_rounds} probe rounds; raise max_pool"
            )
        greedy(probe[far])
    # hill-climb out of the worst covered probe points to catch holes that
    # uniform probes miss (they matter on higher-dimensional spheres)
    while True:
        a = np.array(anchors)
        holes = _climb_holes(r, a, cKDTree(_real(a)), probe, lam, rng)
        if not len(holes):
            break
        rounds += 1
        greedy(holes)
        probe = np.concatenate([probe, holes])
    # Monte Carlo cell fractions from FRACTION_SAMPLES directions per anchor;
    # the same sample doubles as a final, much denser probe round, after
    # which every sampled direction lies within lam of an anchor
    total = max(FRACTION_SAMPLES * len(anchors), FRACTION_MIN)
    sample = [random_sphere_points(rng, min(FRACTION_CHUNK, total - s0), n) for s0 in range(0, total, FRACTION_CHUNK)]
    while True:
        a = np.array(anchors)
        kd = cKDTree(_real(a))
        hits = np.zeros(len(a))
        far_pts, cover = [], 0.0
        for u in sample:
            near = _voronoi_index(r, a, kd, u)
            d = _same_sphere_distance(r, u, a[near])
            cover = max(cover, float(d.max()))
            far_pts.append(u[d >= lam])
            hits += np.bincount(near, minlength=len(a))
        far = np.concatenate(far_pts)
        if not len(far):
            break
        rounds += 1
        greedy(far)
    return SphereNet(level, r, a, hits / hits.sum(), rounds, float(dmin.max()), cover)


# ---------------------------------------------------------------- dyadic


def dyadic_exponent(lam: float) -> int:
    """N0 with lam = ln2 * 2^-N0, or a ConfigError."""
    x = -math.log2(lam / LN2)
    n0 = int(round(x))
    if n0 < 0 or abs(x - n0) > 1e-9:
        raise ConfigError(f"dyadic mode needs lambda = ln2 * 2^-N0, got {lam!r}")
    return n0


def dyadic_counts(lam: float, depth: int) -> list[int]:
    """Cells per level: 1 at the root, then 2^(k0 + floor(2 lambda (N-1) / ln2)).

    The count doubles whenever e^{2 lambda N} does, which keeps the Bergman
    aspect ratio of the cells fixed; k0 makes the level-1 cells about as
    wide (pi sinh(3 lambda) / J) as they are thick (lambda).
    """
    dyadic_exponent(lam)
    k0 = max(1, int(round(math.log2(math.pi * math.sinh(3 * lam) / lam))))
    steps = 2 * lam / LN2  # a power of two
    return [1] + [2 ** (k0 + int(math.floor((N - 1) * steps + 1e-9))) for N in range(1, depth + 1)]


# ---------------------------------------------------------------- the tree


class BergmanTree:
    """An immutable Bergman tree to a finite depth."""

    def __init__(self, lam: float, depth: int, n: int, mode: str, nodes: list, nets: list):
        self.lam = float(lam)
        self.depth = int(depth)
        self.n = int(n)
        self.mode = mode
        self.nodes: tuple = tuple(nodes)
        self.nets = nets  # index N -> SphereNet (None for the root)
        counts = [1] + [len(net.directions) for net in nets[1:]]
        self.counts = counts
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
        self._cache: dict = {}

    # -- basic access

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, i: int) -> TreeNode:
        return self.nodes[i]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def level_ids(self, N: int) -> range:
        return range(self.offsets[N], self.offsets[N + 1])

    def node_id(self, level: int, index: int) -> int:
        return int(self.offsets[level] + index)

    def radii(self, N: int) -> tuple[float, float]:
        """Euclidean radii bounding level N."""
        lo = 0.0 if N == 0 else math.tanh(self.lam * N)
        return lo, math.tanh(self.lam * (N + 1))

    @property
    def outer_radius(self) -> float:
        return math.tanh(self.lam * (self.depth + 1))

    def directions(self, N: int) -> np.ndarray:
        return self.nets[N].directions

    def fraction(self, i: int) -> float:
        nd = self.nodes[i]
        return 1.0 if nd.level == 0 else float(self.nets[nd.level].fractions[nd.index])

    def cell_volume(self, i: int, gamma: float) -> float:
        """v_gamma(K_alpha) = shell mass times the cell's direction fraction."""
        nd = self.nodes[i]
        r0, r1 = self.radii(nd.level)
        return float(WeightedMeasure(self.n, gamma).shell_mass(r0, r1)) * self.fraction(i)

    def cell_box(self, i: int) -> tuple[float, float, float, float]:
        """Polar box (r0, r1, th0, th1) of a dyadic cell."""
        if self.mode != "dyadic":
            raise DomainError("polar boxes exist only in dyadic mode")
        nd = self.nodes[i]
        r0, r1 = self.radii(nd.level)
        J = self.counts[nd.level]
        if nd.level == 0:
            return (0.0, r1, 0.0, TWO_PI)
        return (r0, r1, TWO_PI * nd.index / J, TWO_PI * (nd.index + 1) / J)

    # -- location

    def locate_many(self, z) -> np.ndarray:
        """Node ids of the cells containing each point; -1 beyond the depth."""
        z = _as_points(z)
        if z.ndim == 1:
            z = z[None, :]
        if z.shape[-1] != self.n:
            raise DomainError(f"expected points in C^{self.n}")
        rad = np.sqrt(norm2(z))
        out = np.full(len(z), -1, dtype=int)
        inside = rad < 1.0
        d = np.zeros(len(z))
        d[inside] = np.arctanh(rad[inside])
        level = np.where(inside, np.floor(d / self.lam), self.depth + 1).astype(int)
        out[level == 0] = 0
        for N in range(1, self.depth + 1):
            sel = np.nonzero(level == N)[0]
            if not len(sel):
                continue
            u = z[sel] / rad[sel, None]
            if self.mode == "dyadic":
                th = np.mod(np.angle(u[:, 0]), TWO_PI)
                J = self.counts[N]
                j = np.minimum(np.floor(th * J / TWO_PI).astype(int), J - 1)
            else:
                j = self.nets[N].nearest(u)
            out[sel] = self.offsets[N] + j
        return out

    def locate(self, z) -> TreeNode:
        z = _as_points(z)
        i = int(self.locate_many(z[None, :] if z.ndim == 1 else z)[0])
        if i < 0:
            raise OutOfDepthError("point lies beyond the tree depth")
        return self.nodes[i]

    # -- hierarchy

    def descendants(self, i: int, include_self: bool = True) -> list[int]:
        out, frontier = ([i] if include_self else []), [i]
        while frontier:
            nxt = [c for f in frontier for c in self.nodes[f].children]
            out.extend(nxt)
            frontier = nxt
        return out

    def children_at(self, i: int, ell: int) -> list[int]:
        """C^ell(alpha): descendants exactly ell levels below."""
        frontier = [i]
        for _ in range(ell):
            frontier = [c for f in frontier for c in self.nodes[f].children]
        return frontier

    def ancestors(self, i: int) -> list[int]:
        out = []
        p = self.nodes[i].parent
        while p is not None:
            out.append(p)
            p = self.nodes[p].parent
        return out

    # -- export

    def to_jsonl(self) -> str:
        lines = []
        for nd in self.nodes:
            rec = {
                "level": nd.level,
                "index": nd.index,
                "anchor": [[float(c.real), float(c.imag)] for c in nd.anchor],
                "center": [[float(c.real), float(c.imag)] for c in nd.center],
                "parent": nd.parent,
                "children": list(nd.children),
            }
            lines.append(json.dumps(rec, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def build_tree(
    lam: float,
    depth: int,
    n: int = 1,
    mode: str = "dyadic",
    pool_size: int = 4000,
    probe_size: int = 4000,
    seed: int = 0,
) -> BergmanTree:
    """Build levels 0..depth and link every node to its parent.

    The parent of a level-(N+1) node is the level-N cell whose sphere cell
    contains the radial projection of the child's center onto S_{lambda N}.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if mode not in ("dyadic", "net"):
        raise ConfigError(f"unknown tree mode {mode!r}")
    if mode == "dyadic" and n != 1:
        raise ConfigError("dyadic mode is defined for n = 1")

    nets: list = [None]
    if mode == "dyadic":
        counts = dyadic_counts(lam, depth)
        for N in range(1, depth + 1):
            J = counts[N]
            th = TWO_PI * (np.arange(J) + 0.5) / J
            r = math.tanh(lam * N)
            # farthest sphere point from an anchor: the arc end, half a cell away
            cov = float(_same_sphere_distance(r, np.ones(1), np.exp(1j * np.pi / J) * np.ones(1)))
            nets.append(SphereNet(N, r, np.exp(1j * th)[:, None], np.full(J, 1.0 / J), covering=cov))
    else:
        for N in range(1, depth + 1):
            nets.append(build_sphere_net(N, lam, n, pool_size, probe_size, seed))

    zero = np.zeros(n, dtype=complex)
    proto = [dict(level=0, index=0, anchor=zero, center=zero, parent=None)]
    offsets = [0, 1]
    for N in range(1, depth + 1):
        dirs = nets[N].directions
        if N == 1:
            parents = np.zeros(len(dirs), dtype=int)
        elif mode == "dyadic":
            J, Jp = len(dirs), len(nets[N - 1].directions)
            parents = offsets[N - 1] + (np.arange(J) * Jp) // J
        else:
            parents = offsets[N - 1] + nets[N - 1].nearest(dirs)
        for j, u in enumerate(dirs):
            proto.append(
                dict(
                    level=N,
                    index=j,
                    anchor=math.tanh(lam * N) * u,
                    center=math.tanh(lam * (N + 0.5)) * u,
                    parent=int(parents[j]),
                )
            )
        offsets.append(offsets[-1] + len(dirs))
    kids: list[list[int]] = [[] for _ in proto]
    for i, p in enumerate(proto):
        if p["parent"] is not None:
            kids[p["parent"]].append(i)
    nodes = []
    for i, p in enumerate(proto):
        a, c = p["anchor"].copy(), p["center"].copy()
        a.setflags(write=False)
        c.setflags(write=False)
        nodes.append(TreeNode(i, p["level"], p["index"], a, c, p["parent"], tuple(kids[i])))
    return BergmanTree(lam, depth, n, mode, nodes, nets)


def locate_cell(tree: BergmanTree, z) -> TreeNode:
    return tree.locate(z)


# ---------------------------------------------------------------- neighbors


def ball_samples(center, R: float, n: int, count: int = 512, shells: int = 6, seed: int = 0) -> np.ndarray:
    """Points of the closed Bergman ball D(center, R): Mobius images of
    spheres |x| = tanh(s R), s in (0, 1], plus the center."""
    rng = np.random.default_rng(seed)
    t = math.tanh(R)
    pts = [np.zeros((1, n), complex)]
    for k in range(1, shells + 1):
        rad = math.tanh(R * k / shells) if k < shells else t * (1 - 1e-12)
        m = count if k == shells else max(8, count // 2)
        if n == 1:
            th = TWO_PI * (np.arange(m) + 0.5 * (k % 2)) / m
            u = np.exp(1j * th)[:, None]
        else:
            u = random_sphere_points(rng, m, n)
        pts.append(rad * u)
    x = np.concatenate(pts)
    c = _as_points(center)
    if np.linalg.norm(c) == 0:
        return x
    return mobius_map(c, x)


def bergman_neighbors(tree: BergmanTree, alpha: int, R: float, samples: int = 512) -> tuple[frozenset, bool]:
    """N_alpha^R = {omega : D(c_alpha, R) meets K_omega}, by sampling the ball.

    Returns ``(ids, truncated)``; ``truncated`` flags balls reaching beyond
    the tree depth.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    key = ("nbr", alpha, round(R, 12), samples)
    if key in tree._cache:
        return tree._cache[key]
    c = tree.nodes[alpha].center
    pts = ball_samples(c, R, tree.n, samples)
    ids = tree.locate_many(pts)
    truncated = bool(np.any(ids < 0))
    out = frozenset(int(i) for i in ids[ids >= 0]) | {alpha}
    tree._cache[key] = (out, truncated)
    return out, truncated


def boundary_neighbors(tree: BergmanTree, alpha: int, R: float) -> list[int]:
    """bdd N_alpha^R: same-level omega with beta(dir alpha, dir omega) < R e^{-lambda d(alpha)}."""
    nd = tree.nodes[alpha]
    if nd.level == 0:
        raise DomainError("boundary neighbors need d(alpha) >= 1")
    dirs = tree.directions(nd.level)
    b = beta_boundary(dirs, dirs[nd.index])
    sel = np.nonzero(b < R * math.exp(-tree.lam * nd.level))[0]
    return [tree.node_id(nd.level, int(j)) for j in sel]


# ---------------------------------------------------------------- regions


class CellUnion:
    """A union of tree cells, usable as an integration region."""

    exact_pieces = True

    def __init__(self, tree: BergmanTree, ids, truncated: bool = False):
        self.tree = tree
        self.ids = frozenset(int(i) for i in ids)
        self.truncated = truncated
        self._mask = np.zeros(len(tree) + 1, dtype=bool)
        self._mask[list(self.ids)] = True

    def __contains__(self, i) -> bool:
        return i in self.ids

    def __len__(self) -> int:
        return len(self.ids)

    def contains(self, z) -> np.ndarray:
        ids = self.tree.locate_many(z)
        return self._mask[ids]  # index -1 hits the trailing False

    def by_level(self) -> dict:
        out: dict = {}
        for i in sorted(self.ids):
            out.setdefault(self.tree.nodes[i].level, []).append(self.tree.nodes[i].index)
        return out

    def radial_pieces(self):
        pieces = []
        for N, idx in self.by_level().items():
            r0, r1 = self.tree.radii(N)
            frac = 1.0 if N == 0 else float(self.tree.nets[N].fractions[idx].sum())
            pieces.append((r0, r1, frac))
        return pieces

    def polar_boxes(self):
        """Disjoint polar boxes, contiguous arcs of one level merged."""
        if self.tree.mode != "dyadic":
            raise DomainError("polar boxes exist only in dyadic mode")
        boxes = []
        for N, idx in self.by_level().items():
            r0, r1 = self.tree.radii(N)
            if N == 0:
                boxes.append((0.0, r1, 0.0, TWO_PI))
                continue
            J = self.tree.counts[N]
            if len(idx) == J:
                boxes.append((r0, r1, 0.0, TWO_PI))
                continue
            idx = sorted(idx)
            runs = [[idx[0], idx[0]]]
            for j in idx[1:]:
                if j == runs[-1][1] + 1:
                    runs[-1][1] = j
                else:
                    runs.append([j, j])
            if len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == J - 1:
                last = runs.pop()
                runs[0] = [last[0] - J, runs[0][1]]
            for a, b in runs:
                boxes.append((r0, r1, TWO_PI * a / J, TWO_PI * (b + 1) / J))
        return boxes

    def volume(self, gamma: float) -> float:
        return float(sum(self.tree.cell_volume(i, gamma) for i in self.ids))


def region_K(tree: BergmanTree, alpha: int) -> CellUnion:
    return CellUnion(tree, [alpha])


def region_Q(tree: BergmanTree, alpha: int) -> CellUnion:
    """Q_alpha: cells meeting D(c_alpha, 6 lambda) together with the children of alpha."""
    key = ("Q", alpha)
    if key not in tree._cache:
        nbr, trunc = bergman_neighbors(tree, alpha, 6 * tree.lam)
        ids = set(nbr) | set(tree.nodes[alpha].children)
        if tree.nodes[alpha].level == tree.depth:
            trunc = True  # children lie beyond the depth
        tree._cache[key] = CellUnion(tree, ids, trunc)
    return tree._cache[key]


def region_S(tree: BergmanTree, alpha: int, R: float) -> CellUnion:
    """S~_alpha: all descendants (to the depth) of the cells in N_alpha^R."""
    key = ("S", alpha, round(R, 12))
    if key not in tree._cache:
        nbr, trunc = bergman_neighbors(tree, alpha, R)
        ids: set = set()
        for w in nbr:
            ids.update(tree.descendants(w))
        # every nonempty tent stops at the depth
        tree._cache[key] = CellUnion(tree, ids, True if ids else trunc)
    return tree._cache[key]


# ---------------------------------------------------------------- coloring


@dataclass(frozen=True)
class ColorClass:
    label: int
    members: tuple
    M: float


def color_decompose(tree: BergmanTree, M: int) -> list[ColorClass]:
    """Split the non-root nodes into classes separated at scale M.

    Levels are grouped by residue mod (M + 1), so different levels in one
    class differ by more than M; within a level, greedy coloring in index
    order separates any two members by beta > M e^{-lambda N}.  The root is
    its own class.
    """
    if M < 2:
        raise DomainError("M >= 2")
    classes: dict = {}
    for N in range(1, tree.depth + 1):
        dirs = tree.directions(N)
        thr = M * math.exp(-tree.lam * N)
        colors = np.full(len(dirs), -1, dtype=int)
        # beta(u, v) <= thr  implies  |u - v| <= sqrt(2) thr
        kd = cKDTree(_real(dirs))
        for j in range(len(dirs)):
            nb = np.array(kd.query_ball_point(_real(dirs[j]), math.sqrt(2) * thr * (1 + 1e-12)), dtype=int)
            nb = nb[nb < j]
            nb = nb[beta_boundary(dirs[nb], dirs[j]) <= thr] if len(nb) else nb
            used = set(colors[nb].tolist())
            c = 0
            while c in used:
                c += 1
            colors[j] = c
        res = N % (M + 1)
        for j, c in enumerate(colors):
            classes.setdefault((res, int(c)), []).append(tree.node_id(N, j))
    out = [ColorClass(0, (0,), M)]
    for k, key in enumerate(sorted(classes)):
        out.append(ColorClass(k + 1, tuple(sorted(classes[key])), M))
    return out


def verify_coloring(tree: BergmanTree, classes: list[ColorClass]) -> tuple[bool, float]:
    """Exhaustively check the class separation property.

    Returns ``(ok, worst)`` where ``worst`` is the smallest same-level ratio
    beta e^{lambda N} / M seen (must exceed 1).
    """
    seen = np.zeros(len(tree), dtype=int)
    worst = math.inf
    for cls in classes:
        mem = np.array(cls.members, dtype=int)
        seen[mem] += 1
        levels = np.array([tree.nodes[i].level for i in mem])
        for N in np.unique(levels):
            ids = mem[levels == N]
            others = np.unique(levels[(levels != N)])
            if len(others) and np.min(np.abs(others - N)) <= cls.M:
                return False, 0.0
            if len(ids) < 2 or N == 0:
                continue
            d = tree.directions(int(N))[[tree.nodes[i].index for i in ids]]
            b = np.sqrt(np.abs(1 - d @ np.conj(d).T))
            np.fill_diagonal(b, np.inf)
            worst = min(worst, float(b.min() * math.exp(tree.lam * N) / cls.M))
    ok = bool(np.all(seen == 1)) and worst > 1
    return ok, worst


# ---------------------------------------------------------------- chains


@dataclass(frozen=True)
class Chain:
    members: tuple
    overlaps: tuple  # v_gamma(Q_j cap Q_{j+1})


def _chain_path(ua: np.ndarray, un: np.ndarray, t: np.ndarray) -> np.ndarray:
    """p(t) = ((1-t) + t kappa) ua + (1 - |(1-t) + t kappa|^2)^(1/2) c_perp."""
    kappa = complex(np.vdot(ua, un))  # un . ua
    perp = un - kappa * ua
    pn = np.linalg.norm(perp)
    s = (1 - t) + t * kappa
    if pn < 1e-14:
        # same complex line: move along the circle of phases from ua to un
        ang = np.angle(kappa)
        return np.exp(1j * ang * t)[:, None] * ua[None, :]
    perp = perp / pn
    return s[:, None] * ua[None, :] + np.sqrt(np.maximum(1 - np.abs(s) ** 2, 0.0))[:, None] * perp[None, :]


def chain_ball_radius(tree: BergmanTree, N: int) -> float:
    """Radius of the balls D(c_eta, rho) whose boundary shadows cover the path.

    Equals 2 lambda for nets (covering radius <= lambda); dyadic cells can be
    wider than lambda, so twice their covering radius is used there.
    """
    return 2 * max(tree.lam, tree.nets[N].covering)


def _ball_projection_membership(tree: BergmanTree, N: int, cand: np.ndarray, p: np.ndarray, rho: float) -> np.ndarray:
    """mask[c, t]: does the ray through p(t) meet D(c_eta, rho)?"""
    lam = tree.lam
    dirs = tree.directions(N)[cand]
    centers = math.tanh(lam * (N + 0.5)) * dirs
    dr = lam * (N + 0.5) + np.linspace(-rho, rho, 41)
    dr = dr[dr > 0]
    mask = np.zeros((len(cand), len(p)), dtype=bool)
    for d in dr:
        w = math.tanh(d) * p
        for k, c in enumerate(centers):
            dist = bergman_distance(np.broadcast_to(c, w.shape), w)
            mask[k] |= dist < rho
    return mask


def build_chain(tree: BergmanTree, alpha: int, nu: int, gamma: float = 0.0, steps: int = 400) -> Chain:
    """Chain of same-level cells from alpha to nu along the boundary path p(t).

    U_eta is the set of grid parameters t whose ray meets D(c_eta, rho) with
    rho from :func:`chain_ball_radius`; each step moves to the cell covering
    the first parameter past the current sup, preferring the largest sup.
    """
    na, nn = tree.nodes[alpha], tree.nodes[nu]
    if na.level != nn.level:
        raise DomainError("chain endpoints must share a level")
    if na.level < 1:
        raise DomainError("chains need d(alpha) >= 1")
    if alpha == nu:
        return Chain((alpha,), ())
    N = na.level
    ua, un = na.direction, nn.direction
    t = np.linspace(0.0, 1.0, steps + 1)
    p = _chain_path(ua, un, t)
    rho = chain_ball_radius(tree, N)
    # candidates: directions within the boundary shadow of a ball of radius rho
    shadow = ball_samples(na.center, rho, tree.n, 256)
    shadow = shadow / np.linalg.norm(shadow, axis=1, keepdims=True)
    spread = 1.2 * float(np.max(np.linalg.norm(shadow - ua, axis=1))) + 1e-9
    dirs = tree.directions(N)
    dmin = np.min(np.linalg.norm(dirs[:, None, :] - p[None, :, :], axis=-1), axis=1)
    cand = np.nonzero(dmin < spread)[0]
    mask = _ball_projection_membership(tree, N, cand, p, rho)
    sup = np.array([np.nonzero(m)[0].max() if m.any() else -1 for m in mask])
    pos = {int(c): k for k, c in enumerate(cand)}
    chain = [alpha]
    cur = sup[pos[na.index]]
    while cur < steps:
        covering = np.nonzero(mask[:, cur + 1])[0]
        if not len(covering):
            raise ResolutionError("path parameter not covered by any ball; refine steps")
        best = covering[np.lexsort((cand[covering], -sup[covering]))[0]]
        nid = tree.node_id(N, int(cand[best]))
        if nid in chain:
            raise ResolutionError("chain revisited a cell")
        chain.append(nid)
        cur = sup[best]
        if nid == nu:
            break
    if chain[-1] != nu:
        chain.append(nu)
    overlaps = []
    for a, b in zip(chain[:-1], chain[1:]):
        common = region_Q(tree, a).ids & region_Q(tree, b).ids
        overlaps.append(sum(tree.cell_volume(i, gamma) for i in common))
    return Chain(tuple(chain), tuple(overlaps))


__all__ = [
    "BergmanTree",
    "CellUnion",
    "Chain",
    "ColorClass",
    "SphereNet",
    "TreeNode",
    "ball_samples",
    "bergman_neighbors",
    "beta_boundary",
    "boundary_neighbors",
    "build_chain",
    "build_sphere_net",
    "build_tree",
    "color_decompose",
    "dyadic_counts",
    "locate_cell",
    "region_K",
    "region_Q",
    "region_S",
    "verify_coloring",
]
