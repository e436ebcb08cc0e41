"""Finite matrix models of P_gamma, M_f, H_f and [M_f, P_gamma] on L^2(D, dv_gamma).

The truncated space is spanned by z^a zbar^b with 0 <= a, b <= D.  It splits
into charge sectors q = a - b; sector q is zeta_q(z) times polynomials of
degree <= D - |q| in u = |z|^2, with zeta_q = z^q (q >= 0) or zbar^|q|.
Inside a sector the inner product is

    <zeta_q g, zeta_q h> = (gamma + 1) int_0^1 g(u) conj(h(u)) u^|q| (1-u)^gamma du,

so the orthonormal basis is zeta_q times the orthonormal Jacobi polynomials
of that weight.  They are generated by their three-term recurrence, which
yields the same vectors as Gram-Schmidt on the monomials (same ordering,
positive leading coefficients) without its ill-conditioning.  All matrix
entries are integrals of polynomials in u and are computed exactly (to
rounding) by Gauss-Jacobi quadrature.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import linalg, sparse, special

from .errors import DomainError, NumericalError
from .quadrature import moment
from .symbols import Symbol

GRAM_CONDITION_LIMIT = 1e12


# ---------------------------------------------------------------- orthogonal polynomials


def orthonormal_values(m: int, kmax: int, gamma: float, u: np.ndarray) -> np.ndarray:
    """pi_{m,k}(u) for k = 0..kmax, orthonormal for (gamma+1) u^m (1-u)^gamma du.

    Shape (kmax + 1, len(u)); leading coefficients in u are positive.
    """
    u = np.asarray(u, dtype=float)
    x = 1.0 - 2.0 * u
    a, b = float(m), float(gamma)  # weight (1-x)^a (1+x)^b on [-1, 1]
    out = np.empty((kmax + 1, len(u)))
    mu0 = 2.0 ** (a + b + 1) * math.exp(special.betaln(a + 1, b + 1))
    out[0] = 1.0 / math.sqrt(mu0)

    def alpha(k: int) -> float:
        s = 2 * k + a + b
        if k == 0:
            return (b - a) / (a + b + 2)
        return (b * b - a * a) / (s * (s + 2))

    def beta(k: int) -> float:  # k >= 1
        s = 2 * k + a + b
        if k == 1:
            return 4 * (1 + a) * (1 + b) / ((2 + a + b) ** 2 * (3 + a + b))
        return 4 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1) * (s - 1))

    if kmax >= 1:
        out[1] = (x - alpha(0)) * out[0] / math.sqrt(beta(1))
    for k in range(1, kmax):
        out[k + 1] = ((x - alpha(k)) * out[k] - math.sqrt(beta(k)) * out[k - 1]) / math.sqrt(beta(k + 1))
    # change of variable u = (1-x)/2 and the (gamma+1) normalization of dv_gamma
    scale = math.sqrt(2.0 ** (a + b + 1) / (gamma + 1))
    signs = (-1.0) ** np.arange(kmax + 1)
    return out * scale * signs[:, None]


@lru_cache(maxsize=4096)
def _gauss_u(order: int, gamma: float, power: int):
    """Nodes/weights for int_0^1 g(u) u^power (1-u)^gamma du."""
    s, w = special.roots_jacobi(order, gamma, float(power))
    u = (1 + s) / 2
    return u, w / 2.0 ** (gamma + power + 1)


def gram_schmidt_sector(q: int, D: int, gamma: float) -> np.ndarray:
    """Monomial coefficients (rows k, columns u^j) of sector q's orthonormal
    polynomials by Cholesky of the exact Gram matrix m_{|q|+j+k}.

    Kept as an independent cross-check of :func:`orthonormal_values`; raises
    NumericalError when the Gram matrix condition number exceeds 1e12.
    """
    m = abs(q)
    size = D - m + 1
    if size < 1:
        raise DomainError("sector outside the degree box")
    G = np.array([[moment(m + j + k, gamma) for k in range(size)] for j in range(size)])
    cond = np.linalg.cond(G)
    if cond > GRAM_CONDITION_LIMIT:
        raise NumericalError(f"sector {q}: Gram condition {cond:.2e} exceeds 1e12; reduce D")
    L = np.linalg.cholesky(G)
    return linalg.solve_triangular(L, np.eye(size), lower=True)


# ---------------------------------------------------------------- basis


@dataclass(frozen=True)
class TruncatedBasis:
    """Orthonormal basis e_{q,k} = zeta_q pi_{|q|,k}(|z|^2), |q| <= D, k <= D - |q|."""

    D: int
    gamma: float
    offsets: tuple = field(init=False)

    def __post_init__(self):
        if self.D < 1:
            raise DomainError("D >= 1")
        if self.gamma <= -1:
            raise DomainError("gamma > -1")
        offs, acc = [], 0
        for q in range(-self.D, self.D + 1):
            offs.append(acc)
            acc += self.D - abs(q) + 1
        offs.append(acc)
        object.__setattr__(self, "offsets", tuple(offs))

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    def sector_size(self, q: int) -> int:
        return self.D - abs(q) + 1

    def sector_slice(self, q: int) -> slice:
        i = q + self.D
        return slice(self.offsets[i], self.offsets[i + 1])

    def index(self, q: int, k: int) -> int:
        if abs(q) > self.D or not 0 <= k <= self.D - abs(q):
            raise DomainError(f"(q={q}, k={k}) outside the basis")
        return self.offsets[q + self.D] + k

    def label(self, i: int) -> tuple[int, int]:
        j = int(np.searchsorted(self.offsets, i, side="right")) - 1
        return j - self.D, i - self.offsets[j]

    @property
    def holomorphic(self) -> np.ndarray:
        """Indices of e_{q,0}, q >= 0 (these span the holomorphic part)."""
        return np.array([self.index(q, 0) for q in range(self.D + 1)])

    @property
    def hash(self) -> str:
        key = f"sector-jacobi|D={self.D}|gamma={self.gamma!r}|order=q-then-degree"
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def values(self, q: int, u: np.ndarray) -> np.ndarray:
        return orthonormal_values(abs(q), self.D - abs(q), self.gamma, u)

    def evaluate(self, i: int, z) -> np.ndarray:
        """e_i(z) for complex points z (n = 1)."""
        q, k = self.label(i)
        z = np.asarray(z, dtype=complex).ravel()
        u = np.abs(z) ** 2
        zeta = z**q if q >= 0 else np.conj(z) ** (-q)
        return zeta * orthonormal_values(abs(q), k, self.gamma, u)[k]

    def coefficients(self, f: Symbol) -> np.ndarray:
        """<f, e_i> for every basis vector (exact for symbols inside the box)."""
        if f.n != 1:
            raise DomainError("matrix models are for n = 1")
        out = np.zeros(self.dim, dtype=complex)
        by_q: dict = {}
        for (a,), (b,), K, c in f.terms:
            by_q.setdefault(a - b, []).append((min(a, b), K, c))
        for q, terms in by_q.items():
            if abs(q) > self.D:
                continue
            m = abs(q)
            deg = max(p + K for p, K, _ in terms) + self.D
            u, w = _gauss_u(deg // 2 + 2, self.gamma, m)
            g = sum(c * u**p * (1 - u) ** K for p, K, c in terms)
            pis = self.values(q, u)
            out[self.sector_slice(q)] = (self.gamma + 1) * (pis * (w * g)).sum(axis=1)
        return out


def build_basis(D: int, gamma: float) -> TruncatedBasis:
    return TruncatedBasis(int(D), float(gamma))


# ---------------------------------------------------------------- operators


@dataclass
class OperatorMatrix:
    """A sparse matrix in the basis plus truncation bookkeeping.

    ``dropped`` holds, per column, the squared L^2 mass of M_f e_j that falls
    outside the degree box (zero for operators other than multiplications);
    ``dropped_antiholomorphic`` is the part of it orthogonal to the
    holomorphic functions, the only part that a Hankel operator loses.
    """

    matrix: sparse.csr_matrix
    basis: TruncatedBasis
    dropped: np.ndarray | None = None
    name: str = ""
    dropped_antiholomorphic: np.ndarray | None = None  # dropped mass outside ran P

    @property
    def shape(self) -> tuple:
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(self.matrix.conj().T.tocsr(), self.basis, None, self.name + "*")

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix((self.matrix @ other.matrix).tocsr(), self.basis, None, f"{self.name}{other.name}")

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix((self.matrix - other.matrix).tocsr(), self.basis, None, f"({self.name}-{other.name})")

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix((self.matrix + other.matrix).tocsr(), self.basis, None, f"({self.name}+{other.name})")

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def export(self, path: str | Path) -> tuple[Path, Path]:
        """Write ``path.bin`` (column-major float64 (re, im) pairs) and ``path.json``."""
        path = Path(path)
        dense = self.dense()
        data = np.empty((dense.shape[1], dense.shape[0], 2))
        data[..., 0] = dense.T.real
        data[..., 1] = dense.T.imag
        binp, head = path.with_suffix(".bin"), path.with_suffix(".json")
        binp.write_bytes(data.astype("<f8").tobytes())
        header = {
            "rows": dense.shape[0],
            "cols": dense.shape[1],
            "basis_hash": self.basis.hash,
            "gamma": self.basis.gamma,
            "D": self.basis.D,
            "layout": "column-major, little-endian float64 (re, im) pairs",
        }
        head.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
        return binp, head


def load_matrix(path: str | Path) -> tuple[np.ndarray, dict]:
    """Inverse of :meth:`OperatorMatrix.export`."""
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    data = raw.reshape(header["cols"], header["rows"], 2)
    return (data[..., 0] + 1j * data[..., 1]).T.copy(), header


def projection_matrix(basis: TruncatedBasis) -> OperatorMatrix:
    """P_gamma: the orthogonal projection onto span{e_{q,0} : q >= 0}."""
    h = basis.holomorphic
    P = sparse.csr_matrix((np.ones(len(h)), (h, h)), shape=(basis.dim, basis.dim))
    return OperatorMatrix(P, basis, np.zeros(basis.dim), "P")


def projection_of_monomial(a: int, b: int, gamma: float) -> Symbol:
    """Exact rule P_gamma(z^a zbar^b) = (m_a / m_{a-b}) z^(a-b) for a >= b, else 0."""
    if a < b:
        return Symbol.from_dict(1, {})
    return Symbol.monomial(a - b, 0, moment(a, gamma) / moment(a - b, gamma))


def _group_terms(f: Symbol) -> dict:
    """charge shift A - B -> list of (A, B, K, coeff)."""
    out: dict = {}
    for (A,), (B,), K, c in f.terms:
        out.setdefault(A - B, []).append((A, B, K, c))
    return out


def multiplication_matrix(basis: TruncatedBasis, f: Symbol) -> OperatorMatrix:
    """M_f in the basis; mass leaving the degree box is recorded per column."""
    if f.n != 1:
        raise DomainError("matrix models are for n = 1")
    D, g = basis.D, basis.gamma
    groups = _group_terms(f)
    degf = f.degree
    rows, cols, vals = [], [], []
    kept = np.zeros(basis.dim)
    total = np.zeros(basis.dim)
    holo_out = np.zeros(basis.dim)
    for q in range(-D, D + 1):
        cs = basis.sector_slice(q)
        ncol = basis.sector_size(q)
        for shift, terms in groups.items():
            qp = q + shift
            # (zeta_q)(z^A zbar^B) = zeta_qp u^p with p = min(A + q+, B + q-)
            parts = [(min(A + max(q, 0), B + max(-q, 0)), K, c) for A, B, K, c in terms]
            pmin = min(p for p, _, _ in parts)
            extra = max(p - pmin + K for p, K, _ in parts)
            # integrands have degree <= 2 extra + 2 D + pmin with pmin <= D + degf
            order = (3 * D + 2 * extra + 3 * degf) // 2 + 4
            u, w = _gauss_u(order, g, abs(qp) + pmin)
            pi_q = orthonormal_values(abs(q), ncol - 1, g, u)
            poly = sum(c * u ** (p - pmin) * (1 - u) ** K for p, K, c in parts)
            # squared norm of the sector-qp part of f e_{q,k}
            total[cs] += (g + 1) * np.sum(w * u**pmin * np.abs(poly) ** 2 * pi_q**2, axis=1)
            if abs(qp) > D:
                if qp > D:
                    # the part along e_{qp,0} is holomorphic: P keeps it, H_f never sees it
                    pi0 = orthonormal_values(qp, 0, g, u)[0]
                    holo_out[cs] += np.abs((g + 1) * (pi_q * (w * poly * pi0)).sum(axis=1)) ** 2
                continue
            pi_qp = orthonormal_values(abs(qp), D - abs(qp), g, u)
            block = (g + 1) * (pi_qp * w) @ (poly[:, None] * pi_q.T)  # (rows, cols)
            rs = basis.sector_slice(qp)
            r_idx, c_idx = np.meshgrid(np.arange(rs.start, rs.stop), np.arange(cs.start, cs.stop), indexing="ij")
            rows.append(r_idx.ravel())
            cols.append(c_idx.ravel())
            vals.append(block.ravel())
            kept[cs] += np.sum(np.abs(block) ** 2, axis=0)
    M = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(basis.dim, basis.dim)
    ) if vals else sparse.csr_matrix((basis.dim, basis.dim), dtype=complex)
    M.eliminate_zeros()
    dropped = np.maximum(total - kept, 0.0)
    return OperatorMatrix(M, basis, dropped, "M", np.maximum(dropped - holo_out, 0.0))


def hankel_matrix(basis: TruncatedBasis, f: Symbol) -> OperatorMatrix:
    """H_f = (I - P) M_f P."""
    P = projection_matrix(basis)
    M = multiplication_matrix(basis, f)
    I = sparse.identity(basis.dim, format="csr")
    H = ((I - P.matrix) @ M.matrix @ P.matrix).tocsr()
    H.eliminate_zeros()
    mask = np.isin(np.arange(basis.dim), basis.holomorphic)
    return OperatorMatrix(H, basis, M.dropped_antiholomorphic * mask, "H")


def commutator_matrix(basis: TruncatedBasis, f: Symbol) -> OperatorMatrix:
    """[M_f, P] = M_f P - P M_f."""
    P = projection_matrix(basis)
    M = multiplication_matrix(basis, f)
    C = (M.matrix @ P.matrix - P.matrix @ M.matrix).tocsr()
    C.eliminate_zeros()
    return OperatorMatrix(C, basis, M.dropped, "[M,P]")


# ---------------------------------------------------------------- spectra


@dataclass(frozen=True)
class SingularSpectrum:
    values: np.ndarray
    source_dim: int

    def __len__(self) -> int:
        return len(self.values)

    def schatten(self, p: float) -> float:
        return schatten_from_values(self.values, p)


def _compress(T) -> np.ndarray:
    """Dense submatrix on the nonzero rows and columns."""
    if sparse.issparse(T):
        T = T.tocsr()
        r = np.unique(T.nonzero()[0])
        c = np.unique(T.nonzero()[1])
        if len(r) == 0:
            return np.zeros((0, 0))
        return T[r][:, c].toarray()
    T = np.asarray(T)
    r = np.any(T != 0, axis=1)
    c = np.any(T != 0, axis=0)
    return T[r][:, c]


def singular_values(T, validate: bool = True) -> SingularSpectrum:
    """Singular values of a matrix (dense, sparse or OperatorMatrix), nonincreasing.

    Zero rows/columns are removed before a dense SVD; the missing values are
    zeros.  With ``validate`` the squares are compared with the eigenvalues
    of T*T (absolute tolerance 1e-10 s_1^2).
    """
    if isinstance(T, OperatorMatrix):
        T = T.matrix
    shape = T.shape
    A = _compress(T)
    n_full = min(shape)
    if A.size == 0:
        return SingularSpectrum(np.zeros(n_full), n_full)
    try:
        s = linalg.svdvals(A, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"SVD failed on a {A.shape} matrix: {exc}; entries {A!r}") from exc
    if validate and len(s):
        small = A if A.shape[0] <= A.shape[1] else A.conj().T
        ev = np.sort(np.clip(np.linalg.eigvalsh(small @ small.conj().T), 0, None))[::-1]
        if np.max(np.abs(ev - s**2)) > 1e-10 * max(s[0] ** 2, 1e-300):
            raise NumericalError("singular values disagree with the eigenvalues of T*T")
    out = np.zeros(n_full)
    out[: len(s)] = s
    return SingularSpectrum(out, n_full)


def schatten_from_values(s: np.ndarray, p: float) -> float:
    if p <= 0:
        raise DomainError("p > 0")
    s = np.asarray(s, dtype=float)
    s = s[s > 0]
    if not len(s):
        return 0.0
    top = s.max()
    return float(top * np.sum((s / top) ** p) ** (1 / p))


def schatten_norm(T, p: float) -> float:
    """(sum s_i^p)^(1/p)."""
    return schatten_from_values(singular_values(T, validate=False).values, p)


def entrywise_bound_check(T, p: float) -> tuple[bool, float]:
    """Check ||T||_{S_p}^p <= sum_{j,k} |T_jk|^p for 0 < p <= 2.

    Returns ``(holds, slack)`` with slack = RHS - LHS.
    """
    if not 0 < p <= 2:
        raise DomainError("the entrywise bound needs 0 < p <= 2")
    A = T.dense() if isinstance(T, OperatorMatrix) else (T.toarray() if sparse.issparse(T) else np.asarray(T))
    s = singular_values(A, validate=False).values
    lhs = float(np.sum(s[s > 0] ** p))
    a = np.abs(A)
    rhs = float(np.sum(a[a > 0] ** p))
    slack = rhs - lhs
    return slack >= -1e-10 * max(1.0, lhs), slack


# name kept for callers that use the build manifest's operation name
lemma51_check = entrywise_bound_check


def hankel_zbar_spectrum_exact(gamma: float, count: int) -> SingularSpectrum:
    """s_0 = m_1^(1/2), s_a = ((1+gamma)/((a+1+gamma)(a+2+gamma)))^(1/2)."""
    if gamma <= -1:
        raise DomainError("gamma > -1")
    a = np.arange(count, dtype=float)
    s = np.sqrt((1 + gamma) / ((a + 1 + gamma) * (a + 2 + gamma)))
    s[0] = math.sqrt(moment(1, gamma))
    return SingularSpectrum(s, count)


def hankel_zbar_partial_sums(gamma: float, p: float, counts, chunk: int = 1 << 22) -> np.ndarray:
    """sum_{a < A} s_a^p of the exact H_zbar spectrum for every A in ``counts``.

    One cumulative pass in chunks, so counts in the billions stay cheap in
    memory; chunk sums are pairwise (numpy) and the running total is exact
    to a few ulps per chunk.
    """
    if gamma <= -1 or p <= 0:
        raise DomainError("gamma > -1 and p > 0")
    targets = sorted(int(A) for A in counts)
    out, total, a = {}, 0.0, 0
    for A in targets:
        while a < A:
            b = min(A, a + chunk)
            x = np.arange(a, b, dtype=float)
            total += float(np.sum(((1 + gamma) / ((x + 1 + gamma) * (x + 2 + gamma))) ** (p / 2)))
            a = b
        out[A] = total
    return np.array([out[int(A)] for A in counts])


def commutator_singular_values(basis: TruncatedBasis, f: Symbol) -> tuple[SingularSpectrum, float]:
    """Singular values of [M_f, P] as sv(H_f) together with sv(H_{conj f}).

    [M_f, P] = H_f - H_{conj f}^*, and the two pieces map ran P into its
    complement and back, so the spectrum is the union.  Also returns the
    largest dropped-mass fraction among the holomorphic columns.
    """
    H1 = hankel_matrix(basis, f)
    H2 = hankel_matrix(basis, f.conj())
    s = np.concatenate([singular_values(H1).values, singular_values(H2).values])
    s = np.sort(s)[::-1]
    drop = max(float(np.max(H1.dropped)), float(np.max(H2.dropped)))
    return SingularSpectrum(s, basis.dim), drop


__all__ = [
    "OperatorMatrix",
    "SingularSpectrum",
    "TruncatedBasis",
    "build_basis",
    "commutator_matrix",
    "commutator_singular_values",
    "gram_schmidt_sector",
    "hankel_matrix",
    "hankel_zbar_partial_sums",
    "hankel_zbar_spectrum_exact",
    "entrywise_bound_check",
    "lemma51_check",
    "load_matrix",
    "multiplication_matrix",
    "orthonormal_values",
    "projection_matrix",
    "projection_of_monomial",
    "schatten_from_values",
    "schatten_norm",
    "singular_values",
]
