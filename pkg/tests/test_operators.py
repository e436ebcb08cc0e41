import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergschatten.errors import DomainError
from bergschatten.operators import (
    build_basis,
    commutator_matrix,
    commutator_singular_values,
    entrywise_bound_check,
    hankel_matrix,
    hankel_zbar_partial_sums,
    hankel_zbar_spectrum_exact,
    load_matrix,
    multiplication_matrix,
    projection_matrix,
    projection_of_monomial,
    schatten_norm,
    singular_values,
)
from bergschatten.symbols import Symbol, named_symbol, zbar


@pytest.fixture(scope="module")
def basis16():
    return build_basis(16, 0.0)


def test_basis_orthonormal():
    from bergschatten.operators import _gauss_u, gram_schmidt_sector

    for gamma in (0.0, 1.0, 2.5):
        B = build_basis(6, gamma)
        for q in (-5, 0, 3, 6):
            u, w = _gauss_u(B.D + 2, gamma, abs(q))
            pis = B.values(q, u)
            G = (gamma + 1) * (pis * w) @ pis.T
            assert np.allclose(G, np.eye(B.sector_size(q)), atol=1e-12)
            # independent route: Cholesky of the exact moment Gram matrix
            # (ill conditioned, hence the small D)
            C = gram_schmidt_sector(q, B.D, gamma)
            V = C @ np.vander(u, B.sector_size(q), increasing=True).T
            assert np.allclose(np.abs(V), np.abs(pis), atol=1e-9)


def test_top_sector_single_vector(basis16):
    assert basis16.sector_size(16) == 1
    assert basis16.sector_size(-16) == 1


def test_sector_zero_second_vector():
    B = build_basis(4, 0.0)
    u = np.linspace(0.0, 0.9, 7)
    z = np.sqrt(u).astype(complex)
    e0 = B.evaluate(B.index(0, 0), z)
    e1 = B.evaluate(B.index(0, 1), z)
    assert np.allclose(np.abs(e0), 1.0)
    # e1 = (|z|^2 - 1/2) / sqrt(1/12) up to sign
    ref = (u - 0.5) * math.sqrt(12)
    assert np.allclose(np.abs(e1), np.abs(ref), atol=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.5])
def test_projection_algebra(gamma):
    B = build_basis(12, gamma)
    P = projection_matrix(B).dense()
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(P, P.conj().T, atol=1e-12)
    hol = np.zeros(B.dim, dtype=bool)
    hol[B.holomorphic] = True
    assert np.allclose(np.diag(P)[hol], 1) and np.allclose(np.diag(P)[~hol], 0)


def test_projection_of_monomials():
    z = np.array([0.3 + 0.2j, -0.5j, 0.7])
    assert np.allclose(projection_of_monomial(1, 1, 0.0)(z), 0.5, atol=1e-14)
    assert np.allclose(projection_of_monomial(2, 1, 0.0)(z), 2 / 3 * z, atol=1e-14)
    assert np.allclose(projection_of_monomial(3, 0, 1.0)(z), z**3, atol=1e-14)
    assert projection_of_monomial(0, 2, 0.0).is_zero()


def test_multiplication_examples(basis16):
    I = multiplication_matrix(basis16, Symbol.constant(1.0)).dense()
    assert np.allclose(I, np.eye(basis16.dim), atol=1e-12)
    f = named_symbol("z2zbar") + named_symbol("z2zbar").conj()
    M = multiplication_matrix(basis16, f).dense()
    sub = M[: basis16.dim // 2, : basis16.dim // 2]
    assert np.allclose(sub, sub.conj().T, atol=1e-12)
    Mz = multiplication_matrix(basis16, zbar())
    i1, i0 = basis16.index(1, 0), basis16.index(0, 0)
    # <M_zbar (z / sqrt m1), 1> = <|z|^2, 1> / sqrt(m1) = sqrt(m1)
    assert abs(Mz.dense()[i0, i1]) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_hankel_and_commutator(basis16):
    assert np.allclose(hankel_matrix(basis16, Symbol.monomial(1, 0)).dense(), 0, atol=1e-12)
    assert np.allclose(commutator_matrix(basis16, Symbol.constant(3.0)).dense(), 0, atol=1e-12)
    for f in (zbar(), named_symbol("z2zbar"), named_symbol("boundary2")):
        C = commutator_matrix(basis16, f).dense()
        H = hankel_matrix(basis16, f).dense()
        Hc = hankel_matrix(basis16, f.conj()).dense()
        assert np.allclose(C, H - Hc.conj().T, atol=1e-12)


def test_hankel_zbar_spectrum():
    s = hankel_zbar_spectrum_exact(0.0, 4).values
    assert s[0] == pytest.approx(2**-0.5) and s[1] == pytest.approx(6**-0.5)
    assert hankel_zbar_spectrum_exact(1.0, 2).values[1] == pytest.approx(6**-0.5)
    B = build_basis(64, 0.0)
    num = singular_values(hankel_matrix(B, zbar())).values
    assert np.allclose(num[:50], hankel_zbar_spectrum_exact(0.0, 50).values, atol=1e-8)


def test_partial_sums_oracle():
    a = np.arange(2000, dtype=float)
    ref = np.cumsum(((a + 1) * (a + 2)) ** -0.6)
    ps = hankel_zbar_partial_sums(0.0, 1.2, [10, 100, 2000])
    s = hankel_zbar_spectrum_exact(0.0, 2000).values ** 1.2
    assert ps[-1] == pytest.approx(s.sum(), rel=1e-12)
    assert ps[1] == pytest.approx(s[:100].sum(), rel=1e-12)
    assert ref[-1] == pytest.approx(s.sum(), abs=1e-6)


def test_commutator_spectrum_union(basis16):
    f = named_symbol("z2zbar")
    spec, drop = commutator_singular_values(basis16, f)
    dense = singular_values(commutator_matrix(basis16, f)).values
    k = 20
    assert np.allclose(np.sort(spec.values)[::-1][:k], dense[:k], atol=1e-10)


def test_singular_value_examples():
    assert np.allclose(singular_values(np.array([[0, 2], [0, 0]])).values, [2, 0])
    assert np.allclose(singular_values(np.diag([3.0, 4.0])).values, [4, 3])
    assert schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5)
    assert schatten_norm(np.diag([3.0, 4.0]), 1) == pytest.approx(7)
    assert schatten_norm(np.ones((2, 2)), 0.5) == pytest.approx(2)


def test_unitary_invariance(rng):
    T = rng.normal(size=(8, 6)) + 1j * rng.normal(size=(8, 6))
    U, _ = np.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
    V, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    assert np.allclose(singular_values(U @ T @ V).values, singular_values(T).values, atol=1e-10)


def test_entrywise_examples():
    ok, slack = entrywise_bound_check(np.diag([1.0, 2.0, 3.0]), 0.5)
    assert ok and slack == pytest.approx(0.0, abs=1e-12)
    ok, slack = entrywise_bound_check(np.array([[0, 1], [1, 0]]), 1.0)
    assert ok and slack == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        entrywise_bound_check(np.eye(2), 3.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.sampled_from([0.5, 1.0, 1.5, 2.0]), st.integers(0, 10**6))
def test_entrywise_bound_property(m, k, p, seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(m, k)) + 1j * r.normal(size=(m, k))
    assert entrywise_bound_check(A, p)[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.floats(0.3, 0.95), st.integers(0, 10**6))
def test_quasi_triangle(m, p, seed):
    r = np.random.default_rng(seed)
    S, T = (r.normal(size=(m, m)) + 1j * r.normal(size=(m, m)) for _ in range(2))
    lhs = schatten_norm(S + T, p) ** p
    assert lhs <= schatten_norm(S, p) ** p + schatten_norm(T, p) ** p + 1e-9


def test_export_round_trip(tmp_path, basis16):
    H = hankel_matrix(basis16, zbar())
    H.export(tmp_path / "h")
    A, header = load_matrix(tmp_path / "h")
    assert np.allclose(A, H.dense())
    assert header["rows"] == H.shape[0] and header["gamma"] == 0.0 and header["D"] == 16
