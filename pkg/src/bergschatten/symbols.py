"""Polynomial symbols f(z) = sum c z^a zbar^b (1 - |z|^2)^k on B_n.

The boundary factor (1 - |z|^2)^k is kept unexpanded so that symbols which
vanish at the sphere can be evaluated without cancellation; ``expand()``
rewrites it through the binomial theorem into plain monomials when exact
algebra is needed (operator matrices).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

Key = tuple  # (a: tuple[int, ...], b: tuple[int, ...], k: int)


def _multinomial_powers(j: int, n: int):
    """Yield (alpha, multinomial coefficient) with |alpha| = j."""
    for alpha in itertools.product(range(j + 1), repeat=n):
        if sum(alpha) == j:
            c = math.factorial(j)
            for x in alpha:
                c //= math.factorial(x)
            yield alpha, c


@dataclass(frozen=True)
class Symbol:
    """An immutable finite sum of terms ``coeff * z^a zbar^b (1-|z|^2)^k``."""

    n: int
    terms: tuple  # ((a, b, k, coeff), ...) sorted, coeff != 0

    # ------------------------------------------------------------ builders

    @classmethod
    def from_dict(cls, n: int, d: dict) -> "Symbol":
        items = []
        for (a, b, k), c in d.items():
            a, b = tuple(int(x) for x in a), tuple(int(x) for x in b)
            if len(a) != n or len(b) != n:
                raise DimensionError("multi-index length must equal n")
            if min(a + b) < 0 or k < 0:
                raise DomainError("exponents must be nonnegative")
            if c != 0:
                items.append((a, b, int(k), complex(c)))
        items.sort(key=lambda t: (t[0], t[1], t[2]))
        return cls(n, tuple(items))

    @classmethod
    def monomial(cls, a, b, coeff: complex = 1.0, k: int = 0, n: int | None = None) -> "Symbol":
        a = (a,) if np.isscalar(a) else tuple(a)
        b = (b,) if np.isscalar(b) else tuple(b)
        n = n or len(a)
        return cls.from_dict(n, {(a, b, k): coeff})

    @classmethod
    def constant(cls, c: complex, n: int = 1) -> "Symbol":
        z = (0,) * n
        return cls.from_dict(n, {(z, z, 0): c})

    @classmethod
    def from_config(cls, spec, n: int = 1) -> "Symbol":
        """Parse ``[[a, b, re, im], ...]`` (optional 5th entry: boundary power k)."""
        d: dict = {}
        for term in spec:
            if len(term) not in (4, 5):
                raise DomainError(f"symbol term must be [a, b, re, im(, k)], got {term!r}")
            a, b, re, im = term[:4]
            k = int(term[4]) if len(term) == 5 else 0
            a = (int(a),) if np.isscalar(a) else tuple(int(x) for x in a)
            b = (int(b),) if np.isscalar(b) else tuple(int(x) for x in b)
            key = (a, b, k)
            d[key] = d.get(key, 0) + complex(re, im)
        return cls.from_dict(n, d)

    def to_config(self) -> list:
        out = []
        for a, b, k, c in self.terms:
            aa = a[0] if self.n == 1 else list(a)
            bb = b[0] if self.n == 1 else list(b)
            term = [aa, bb, c.real, c.imag]
            if k:
                term.append(k)
            out.append(term)
        return out

    # ------------------------------------------------------------ algebra

    def as_dict(self) -> dict:
        return {(a, b, k): c for a, b, k, c in self.terms}

    def _check(self, other: "Symbol") -> None:
        if other.n != self.n:
            raise DimensionError("symbols live in different dimensions")

    def __add__(self, other):
        if not isinstance(other, Symbol):
            other = Symbol.constant(other, self.n)
        self._check(other)
        d = self.as_dict()
        for key, c in other.as_dict().items():
            d[key] = d.get(key, 0) + c
        return Symbol.from_dict(self.n, d)

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other if isinstance(other, Symbol) else -complex(other))

    def __rsub__(self, other):
        return -self + other

    def __mul__(self, other):
        if not isinstance(other, Symbol):
            return Symbol.from_dict(self.n, {key: c * complex(other) for key, c in self.as_dict().items()})
        self._check(other)
        d: dict = {}
        for a1, b1, k1, c1 in self.terms:
            for a2, b2, k2, c2 in other.terms:
                key = (
                    tuple(x + y for x, y in zip(a1, a2)),
                    tuple(x + y for x, y in zip(b1, b2)),
                    k1 + k2,
                )
                d[key] = d.get(key, 0) + c1 * c2
        return Symbol.from_dict(self.n, d)

    __rmul__ = __mul__

    def conj(self) -> "Symbol":
        return Symbol.from_dict(self.n, {(b, a, k): np.conj(c) for a, b, k, c in self.terms})

    def abs2(self) -> "Symbol":
        return self * self.conj()

    def expand(self) -> "Symbol":
        """Rewrite every (1-|z|^2)^k through sum_j binom(k,j)(-1)^j |z|^(2j)."""
        d: dict = {}
        for a, b, k, c in self.terms:
            for j in range(k + 1):
                cj = c * math.comb(k, j) * (-1) ** j
                for alpha, mult in _multinomial_powers(j, self.n):
                    key = (
                        tuple(x + y for x, y in zip(a, alpha)),
                        tuple(x + y for x, y in zip(b, alpha)),
                        0,
                    )
                    d[key] = d.get(key, 0) + cj * mult
        return Symbol.from_dict(self.n, d)

    # ------------------------------------------------------------ queries

    def is_constant(self) -> bool:
        zero = (0,) * self.n
        return all(a == zero and b == zero for a, b, _, _ in self.expand().terms)

    def is_zero(self) -> bool:
        return not self.expand().terms

    @property
    def degree(self) -> int:
        """Total polynomial degree in (z, zbar) after expansion."""
        return max((sum(a) + sum(b) + 2 * k for a, b, k, _ in self.terms), default=0)

    def charges(self) -> set:
        """Charges sum(a) - sum(b) of the terms."""
        return {sum(a) - sum(b) for a, b, _, _ in self.terms}

    def is_holomorphic(self) -> bool:
        return all(sum(b) == 0 for a, b, _, _ in self.expand().terms)

    # ------------------------------------------------------------ evaluation

    def __call__(self, z, one_minus=None) -> np.ndarray:
        """Evaluate at points ``z`` of shape (..., n).

        ``one_minus`` optionally supplies 1 - |z|^2 computed more accurately
        than from ``z`` (near the sphere).
        """
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.n:
            if self.n == 1:
                z = z[..., None]
            else:
                raise DimensionError(f"expected last axis {self.n}, got {z.shape[-1]}")
        if one_minus is None:
            one_minus = 1.0 - np.sum(z.real**2 + z.imag**2, axis=-1)
        zc = np.conj(z)
        out = np.zeros(z.shape[:-1], dtype=complex)
        for a, b, k, c in self.terms:
            term = np.full(z.shape[:-1], c, dtype=complex)
            for i in range(self.n):
                if a[i]:
                    term = term * z[..., i] ** a[i]
                if b[i]:
                    term = term * zc[..., i] ** b[i]
            if k:
                term = term * one_minus**k
            out += term
        return out

    def __repr__(self) -> str:
        if not self.terms:
            return "Symbol(0)"
        parts = []
        for a, b, k, c in self.terms:
            s = f"({c.real:g}{c.imag:+g}j)"
            if any(a):
                s += f" z^{a if self.n > 1 else a[0]}"
            if any(b):
                s += f" zbar^{b if self.n > 1 else b[0]}"
            if k:
                s += f" (1-|z|^2)^{k}"
            parts.append(s)
        return "Symbol(" + " + ".join(parts) + ")"


def zbar(n: int = 1) -> Symbol:
    """conj(z_1)."""
    b = (1,) + (0,) * (n - 1)
    return Symbol.monomial((0,) * n, b, n=n)


def named_symbol(name: str, n: int = 1) -> Symbol:
    """Default test symbols: 'zbar', 'z2zbar', 'zbar_vanishing4', 'boundary2'."""
    e1 = (1,) + (0,) * (n - 1)
    zero = (0,) * n
    two = (2,) + (0,) * (n - 1)
    table = {
        "zbar": {(zero, e1, 0): 1.0},
        "z2zbar": {(two, e1, 0): 1.0},
        "zbar_vanishing4": {(zero, e1, 4): 1.0},
        "boundary2": {(zero, zero, 2): 1.0},
    }
    if name not in table:
        raise DomainError(f"unknown symbol {name!r}; choose from {sorted(table)}")
    return Symbol.from_dict(n, table[name])


__all__ = ["Symbol", "named_symbol", "zbar"]
