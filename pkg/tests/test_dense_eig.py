import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xarnoldi.dense_eig import (
    ComplexDominantError,
    ConditioningError,
    EigenPairSet,
    QRConvergenceError,
    _magnitude_order,
    generalized_eigen,
    hessenberg_eigen,
    hessenberg_reduce,
    real_schur,
    select_dominant,
)


def charpoly_roots(H):
    """Eigenvalues as roots of the characteristic polynomial.

    Coefficients come from the Faddeev-LeVerrier recursion in 60-digit
    arithmetic, roots from mpmath's Durand-Kerner solver. Nothing here
    shares code with a QR iteration.
    """
    mpmath.mp.dps = 60
    k = len(H)
    A = mpmath.matrix(H.tolist())
    I = mpmath.eye(k)
    M = mpmath.zeros(k, k)
    coeffs = [mpmath.mpf(1)]
    c = mpmath.mpf(1)
    for j in range(1, k + 1):
        M = A * M + c * I
        AM = A * M
        c = -sum(AM[i, i] for i in range(k)) / j
        coeffs.append(c)
    roots = mpmath.polyroots(coeffs, maxsteps=500, extraprec=200)
    return np.array([complex(r) for r in roots])


def match_multisets(a, b):
    """Greedy nearest pairing; returns the worst distance."""
    b = list(b)
    worst = 0.0
    for x in a:
        d = [abs(x - y) for y in b]
        i = int(np.argmin(d))
        worst = max(worst, d[i])
        b.pop(i)
    return worst


def random_hessenberg(rng, k):
    return np.triu(rng.standard_normal((k, k)), -1)


def backward_errors(H, pairs):
    return [np.linalg.norm(H @ pairs.vectors[:, i] - pairs.values[i] * pairs.vectors[:, i]) for i in range(pairs.k)]


def make_pairs(values):
    values = np.asarray(values, dtype=complex)
    return EigenPairSet(values, np.eye(values.size, dtype=complex), _magnitude_order(values))


class TestHessenbergEigen:
    def test_diagonal(self):
        p = hessenberg_eigen([[2.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(p.sorted_values(), [2.0, 1.0])
        V = p.sorted_vectors()
        np.testing.assert_allclose(np.abs(V), np.eye(2), atol=1e-15)

    def test_symmetric_permutation(self):
        p = hessenberg_eigen([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(p.sorted_values(), [1.0, -1.0], atol=1e-14)

    def test_rotation(self):
        vals = hessenberg_eigen([[0.0, -1.0], [1.0, 0.0]]).sorted_values()
        np.testing.assert_allclose(vals, [1j, -1j], atol=1e-14)

    def test_one_by_one(self):
        p = hessenberg_eigen([[-3.5]])
        assert p.values[0] == -3.5 and p.vectors[0, 0] == 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_random_6x6_against_charpoly_roots(self, seed):
        H = random_hessenberg(np.random.default_rng(seed), 6)
        assert match_multisets(hessenberg_eigen(H).values, charpoly_roots(H)) <= 1e-8

    def test_general_matrix_reduced_first(self):
        A = np.random.default_rng(11).standard_normal((7, 7))
        p = hessenberg_eigen(A)
        assert match_multisets(p.values, charpoly_roots(A)) <= 1e-8
        assert max(backward_errors(A, p)) <= 1e-10 * np.linalg.norm(A)

    def test_hessenberg_reduce_similarity(self):
        A = np.random.default_rng(2).standard_normal((8, 8))
        Hh, Q = hessenberg_reduce(A)
        np.testing.assert_allclose(Q @ Hh @ Q.T, A, atol=1e-12)
        np.testing.assert_allclose(Q.T @ Q, np.eye(8), atol=1e-14)
        assert np.all(np.tril(Hh, -2) == 0.0)

    def test_real_schur_is_quasi_triangular(self):
        H = random_hessenberg(np.random.default_rng(4), 9)
        T, Z = real_schur(H)
        np.testing.assert_allclose(Z @ T @ Z.T, H, atol=1e-12)
        sub = np.diag(T, -1)
        # no two consecutive nonzero subdiagonals
        assert not np.any((sub[:-1] != 0.0) & (sub[1:] != 0.0))
        assert np.all(np.tril(T, -2) == 0.0)

    def test_sweep_cap_raises_with_partial_values(self):
        H = random_hessenberg(np.random.default_rng(0), 10)
        with pytest.raises(QRConvergenceError) as info:
            real_schur(H, max_sweeps=1)
        assert info.value.partial_values is not None

    @pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan]]), np.zeros((0, 0))])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(ValueError):
            hessenberg_eigen(bad)

    def test_magnitude_ties(self):
        p = hessenberg_eigen(np.diag([-2.0, 2.0, 1.0]))
        np.testing.assert_array_equal(p.sorted_values(), [2.0, -2.0, 1.0])
        # real beats complex of equal modulus
        R = np.array([[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, -2.0]])
        vals = hessenberg_eigen(R).sorted_values()
        assert vals[0] == -2.0 and vals[1].imag > 0 and vals[2] == np.conj(vals[1])

    def test_defective_jordan_block(self):
        p = hessenberg_eigen([[1.0, 1.0], [0.0, 1.0]])
        np.testing.assert_allclose(p.values, [1.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 32), seed=st.integers(0, 2**32 - 1))
def test_backward_error_and_conjugate_closure(k, seed):
    H = random_hessenberg(np.random.default_rng(seed), k)
    p = hessenberg_eigen(H)
    assert max(backward_errors(H, p)) <= 1e-10 * np.linalg.norm(H)
    np.testing.assert_allclose(np.linalg.norm(p.vectors, axis=0), 1.0, rtol=1e-13)
    mags = np.abs(p.sorted_values())
    assert np.all(np.diff(mags) <= 1e-12 * mags[0])
    complex_vals = sorted((v for v in p.values if v.imag != 0.0), key=lambda z: (z.real, abs(z.imag), z.imag))
    pos = sorted(v for v in complex_vals if v.imag > 0)
    neg = sorted(np.conj(v) for v in complex_vals if v.imag < 0)
    assert pos == neg


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_trace_and_determinant(k, seed):
    H = random_hessenberg(np.random.default_rng(seed), k)
    vals = hessenberg_eigen(H).values
    tr = np.trace(H)
    assert abs(vals.sum() - tr) <= 1e-10 * max(abs(tr), np.linalg.norm(H))
    det = np.linalg.det(H)
    assert abs(np.prod(vals) - det) <= 1e-8 * max(abs(det), np.linalg.norm(H) ** k * 1e-3)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(2, 12), seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
def test_dominant_vector_scale_invariant(k, seed, c):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    d = rng.uniform(0.1, 1.0, k) * rng.choice([-1, 1], k)
    d[0] = 2.0
    H = Q @ np.diag(d) @ Q.T
    a = select_dominant(hessenberg_eigen(H), 1).vector
    b = select_dominant(hessenberg_eigen(c * H), 1).vector
    np.testing.assert_allclose(a, b, atol=1e-8)


class TestGeneralizedEigen:
    def test_identity_gram_matches_standard(self):
        K = np.random.default_rng(5).standard_normal((4, 4))
        pairs, cond = generalized_eigen(K, np.eye(4))
        assert cond == 1.0
        assert match_multisets(pairs.values, hessenberg_eigen(K).values) <= 1e-12

    def test_proportional(self):
        rng = np.random.default_rng(6)
        B = rng.standard_normal((5, 5))
        M = B @ B.T + 5 * np.eye(5)
        pairs, _ = generalized_eigen(2 * M, M)
        np.testing.assert_allclose(pairs.values, 2.0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_against_explicit_inverse(self, seed):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((3, 3))
        M = B @ B.T + np.eye(3)
        S = rng.standard_normal((3, 3))
        K = S + S.T
        pairs, _ = generalized_eigen(K, M)
        ref_vals, ref_vecs = np.linalg.eig(np.linalg.inv(M) @ K)
        assert match_multisets(pairs.values, ref_vals) <= 1e-9
        for i in range(3):
            a = pairs.vectors[:, i].real
            assert np.linalg.norm(K @ a - pairs.values[i].real * M @ a) <= 1e-9 * np.linalg.norm(K)

    def test_nonsymmetric_k(self):
        rng = np.random.default_rng(9)
        M = np.diag([1.0, 2.0, 3.0])
        K = rng.standard_normal((3, 3))
        pairs, _ = generalized_eigen(K, M)
        assert match_multisets(pairs.values, np.linalg.eigvals(np.linalg.solve(M, K))) <= 1e-10

    def test_singular_gram_raises(self):
        M = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(ConditioningError):
            generalized_eigen(np.eye(2), M)

    def test_ill_conditioned_gram_raises(self):
        M = np.diag([1.0, 1e-16])
        with pytest.raises(ConditioningError) as info:
            generalized_eigen(np.eye(2), M)
        assert info.value.condition > 1e15


class TestSelectDominant:
    def test_magnitude_ordering(self):
        d = select_dominant(make_pairs([3.0, 1.0, -2.0]), 2)
        np.testing.assert_array_equal(d.values, [3.0, -2.0])
        np.testing.assert_array_equal(d.vector, [1.0, 0.0, 0.0])

    def test_negative_dominant(self):
        np.testing.assert_array_equal(select_dominant(make_pairs([-5.0, 4.0]), 2).values, [-5.0, 4.0])

    def test_complex_dominant_raises(self):
        with pytest.raises(ComplexDominantError):
            select_dominant(make_pairs([2 + 1j, 2 - 1j, 1.0]), 2)

    def test_complex_second_reported_by_modulus(self):
        d = select_dominant(make_pairs([3.0, 1 + 1j, 1 - 1j]), 2)
        assert d.values[1] == pytest.approx(np.sqrt(2.0)) and d.is_complex.tolist() == [False, True]

    def test_sign_convention(self):
        p = hessenberg_eigen(np.array([[1.0, 0.0], [0.0, 3.0]]))
        v = select_dominant(p, 1).vector
        assert v[np.argmax(np.abs(v))] > 0

    def test_m_out_of_range(self):
        with pytest.raises(ValueError):
            select_dominant(make_pairs([1.0]), 2)
