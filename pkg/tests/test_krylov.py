import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from xarnoldi.dense_eig import ConditioningError
from xarnoldi.krylov import (
    RankDeficiencyError,
    arnoldi_error_profile,
    arnoldi_factorization,
    assemble_kstep_output,
    mgs_orthonormalize,
    mgs_qr,
    naive_kstep_projection,
    orthogonalized_kstep_projection,
)
from xarnoldi.matrix_core import MatvecCounter, SparseMatrix, ZeroVectorError, make_inverse_iota_diag


def dense_to_sparse(D):
    rows, cols = np.nonzero(D)
    return SparseMatrix.from_triplets(D.shape[0], rows, cols, D[rows, cols])


def random_symmetric(rng, n):
    S = rng.standard_normal((n, n))
    return dense_to_sparse(S + S.T)


class TestNaiveProjection:
    def test_k1_is_rayleigh_quotient(self):
        A = SparseMatrix.diagonal([3.0, -1.0, 2.0])
        y = np.array([1.0, 2.0, 2.0])
        proj = naive_kstep_projection(A, y, 1)
        assert proj.ritz_values()[0].real == pytest.approx(y @ (A.to_dense() @ y) / (y @ y), rel=1e-14)

    def test_full_space_diag21(self):
        proj = naive_kstep_projection(SparseMatrix.diagonal([2.0, 1.0]), [1.0, 1.0], 2)
        # brute-force 2x2 generalized solve
        ref = np.sort(np.linalg.eigvals(np.linalg.solve(proj.M, proj.K)).real)[::-1]
        np.testing.assert_allclose(proj.ritz_values().real, [2.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(ref, [2.0, 1.0], atol=1e-12)

    def test_projection_entries(self):
        rng = np.random.default_rng(0)
        A = random_symmetric(rng, 12)
        proj = naive_kstep_projection(A, rng.standard_normal(12), 4)
        D = A.to_dense()
        np.testing.assert_allclose(proj.K, proj.basis.T @ D @ proj.basis, rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(proj.M, proj.M.T)

    def test_ill_conditioning_inverse_iota(self):
        A = make_inverse_iota_diag(1000, "i_over_n")
        assert naive_kstep_projection(A, np.ones(1000), 20).cond_M > 1e12

    def test_matvec_budget(self):
        c = MatvecCounter()
        naive_kstep_projection(make_inverse_iota_diag(50), np.ones(50), 7, c)
        assert c.count == 7

    def test_zero_krylov_vector(self):
        A = SparseMatrix.diagonal([0.0, 0.0])
        with pytest.raises(ZeroVectorError):
            naive_kstep_projection(A, [1.0, 1.0], 2)

    def test_singular_gram_surfaces(self):
        proj = naive_kstep_projection(make_inverse_iota_diag(1000), np.ones(1000), 30)
        with pytest.raises(ConditioningError):
            proj.eigenpairs()


class TestMGS:
    def test_orthonormal_unchanged(self):
        np.testing.assert_array_equal(mgs_orthonormalize(np.eye(3)[:, :2]), np.eye(3)[:, :2])

    def test_one_projection(self):
        X = np.array([[1.0, 1.0], [0.0, 1.0]])
        np.testing.assert_allclose(mgs_orthonormalize(X), np.eye(2), atol=1e-15)

    def test_against_dense_qr(self):
        X = np.random.default_rng(3).standard_normal((50, 8))
        Q = mgs_orthonormalize(X)
        Qref, _ = np.linalg.qr(X)
        assert np.max(subspace_angles(Q, Qref)) < 1e-10
        assert np.abs(Q.T @ Q - np.eye(8)).max() <= 1e-10
        np.testing.assert_allclose(Q[:, 0], X[:, 0] / np.linalg.norm(X[:, 0]), atol=1e-15)

    def test_qr_reconstructs(self):
        X = np.random.default_rng(4).standard_normal((20, 5))
        Q, R = mgs_qr(X)
        np.testing.assert_allclose(Q @ R, X, atol=1e-13)
        assert np.all(np.tril(R, -1) == 0.0)

    def test_rank_deficiency_reports_column(self):
        X = np.column_stack([np.ones(4), np.arange(4.0), 2 * np.ones(4) - np.arange(4.0)])
        with pytest.raises(RankDeficiencyError) as info:
            mgs_orthonormalize(X)
        assert info.value.column == 2


class TestOrthogonalizedProjection:
    def test_k1(self):
        A = SparseMatrix.diagonal([3.0, -1.0, 2.0])
        y = np.array([1.0, 1.0, 1.0])
        proj = orthogonalized_kstep_projection(A, y, 1)
        assert proj.K[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-14)

    def test_full_space(self):
        vals = orthogonalized_kstep_projection(SparseMatrix.diagonal([3.0, 2.0, 1.0]), np.ones(3), 3).ritz_values()
        np.testing.assert_allclose(vals.real, [3.0, 2.0, 1.0], atol=1e-10)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_matches_naive(self, k):
        A = SparseMatrix.diagonal([5.0, 4.0, 3.0, 2.0, 1.0])
        y = np.array([1.0, 0.7, 1.3, 0.4, 0.9])
        a = np.sort_complex(naive_kstep_projection(A, y, k).ritz_values())
        b = np.sort_complex(orthogonalized_kstep_projection(A, y, k).ritz_values())
        np.testing.assert_allclose(a, b, atol=1e-8)

    def test_k_matvecs_and_projection(self):
        rng = np.random.default_rng(8)
        A = random_symmetric(rng, 15)
        c = MatvecCounter()
        proj = orthogonalized_kstep_projection(A, rng.standard_normal(15), 5, c)
        assert c.count == 5
        D = A.to_dense()
        np.testing.assert_allclose(proj.K, proj.basis.T @ D @ proj.basis, atol=1e-10)
        np.testing.assert_array_equal(proj.M, np.eye(5))
        assert proj.raw_cond >= 1.0


class TestArnoldi:
    def test_identity_breaks_down(self):
        c = MatvecCounter()
        f = arnoldi_factorization(SparseMatrix.diagonal(np.ones(4)), np.arange(1.0, 5.0), 3, c)
        assert f.breakdown_at == 1 and f.k_effective == 1
        np.testing.assert_allclose(f.H, [[1.0]])
        assert c.count == 1

    def test_diag21(self):
        f = arnoldi_factorization(SparseMatrix.diagonal([2.0, 1.0]), np.ones(2) / np.sqrt(2), 2)
        np.testing.assert_allclose(f.H, [[1.5, 0.5], [0.5, 1.5]], atol=1e-15)
        out = assemble_kstep_output(f, 2)
        np.testing.assert_allclose(out.lambdas, [2.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(np.abs(out.y), [1.0, 0.0], atol=1e-14)

    def test_symmetric_gives_tridiagonal(self):
        rng = np.random.default_rng(1)
        f = arnoldi_factorization(random_symmetric(rng, 30), rng.standard_normal(30), 10)
        assert np.abs(np.triu(f.H, 2)).max() <= 1e-9

    def test_first_column_and_budget(self):
        c = MatvecCounter()
        y = np.arange(1.0, 41.0)
        f = arnoldi_factorization(make_inverse_iota_diag(40), y, 9, c)
        assert c.count == 9
        np.testing.assert_allclose(f.V[:, 0], y / np.linalg.norm(y), rtol=1e-15)
        assert f.V.shape == (40, 9) and f.W.shape == (40, 9)

    def test_k_exceeds_dimension(self):
        with pytest.raises(ValueError):
            arnoldi_factorization(SparseMatrix.diagonal([1.0, 2.0]), [1.0, 1.0], 3)

    def test_invariant_subspace_truncation(self):
        A = SparseMatrix.diagonal([4.0, 4.0, 2.0, 2.0, 1.0])
        f = arnoldi_factorization(A, [1.0, 1.0, 1.0, 0.0, 0.0], 4)
        assert f.breakdown_at == 2 and f.k_effective == 2
        D = A.to_dense()
        assert np.linalg.norm(D @ f.V - f.V @ f.H) <= 1e-12

    def test_reorthogonalize_flag_same_space(self):
        rng = np.random.default_rng(5)
        A = random_symmetric(rng, 25)
        y = rng.standard_normal(25)
        a = arnoldi_factorization(A, y, 8)
        b = arnoldi_factorization(A, y, 8, reorthogonalize=True)
        assert b.orthogonality_error() <= a.orthogonality_error() + 1e-15
        np.testing.assert_allclose(np.abs(a.V), np.abs(b.V), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(10, 60), k=st.integers(1, 30), seed=st.integers(0, 2**32 - 1))
def test_arnoldi_invariants(n, k, seed):
    # single-pass MGS only keeps 1e-10 orthogonality while the space is well short of R^n
    k = min(k, n // 2)
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.3) + np.diag(rng.uniform(1, 5, n))
    A = dense_to_sparse(D)
    c = MatvecCounter()
    f = arnoldi_factorization(A, rng.standard_normal(n), k, c)
    assert c.count == f.k_effective
    assert f.orthogonality_error() <= 1e-10
    scale = np.linalg.norm(D)
    assert np.abs(f.H - f.V.T @ D @ f.V).max() <= 1e-8 * scale
    np.testing.assert_allclose(f.W, D @ f.V, atol=1e-12 * scale)
    assert np.all(np.tril(f.H, -2) == 0.0)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(12, 40), k=st.integers(2, 8), seed=st.integers(0, 2**32 - 1))
def test_shift_invariance(n, k, seed):
    rng = np.random.default_rng(seed)
    d = rng.uniform(1.0, 3.0, n)
    y = rng.standard_normal(n)
    a = arnoldi_factorization(SparseMatrix.diagonal(d), y, k)
    b = arnoldi_factorization(SparseMatrix.diagonal(d + 1.0), y, k)
    signs = np.sign(np.sum(a.V * b.V, axis=0))
    np.testing.assert_allclose(a.V, b.V * signs, atol=1e-8)


class TestAssemble:
    def test_one_dimensional(self):
        f = arnoldi_factorization(SparseMatrix.diagonal(np.full(3, 2.5)), [0.0, 3.0, 4.0], 2)
        out = assemble_kstep_output(f, 2)
        np.testing.assert_allclose(out.y, [0.0, 0.6, 0.8], atol=1e-15)
        assert out.lambdas[0] == 2.5 and np.isnan(out.lambdas[1])

    def test_residual_identity(self):
        rng = np.random.default_rng(12)
        A = random_symmetric(rng, 40)
        out = assemble_kstep_output(arnoldi_factorization(A, rng.standard_normal(40), 6), 2)
        fresh = np.linalg.norm(A.to_dense() @ out.y - out.lambdas[0] * out.y)
        assert out.residual == pytest.approx(fresh, rel=1e-8, abs=1e-12)
        assert np.linalg.norm(out.y) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_three_projections_agree(self, k):
        A = SparseMatrix.diagonal([5.0, 4.0, 3.0, 2.0, 1.0])
        y = np.ones(5)
        lam_arnoldi = assemble_kstep_output(arnoldi_factorization(A, y, k), 1).lambdas[0]
        lam_naive = naive_kstep_projection(A, y, k).ritz_values()[0].real
        lam_orth = orthogonalized_kstep_projection(A, y, k).ritz_values()[0].real
        assert abs(lam_arnoldi - lam_naive) <= 1e-7 and abs(lam_arnoldi - lam_orth) <= 1e-7


def test_error_profile_rows():
    A = make_inverse_iota_diag(200)
    rows = arnoldi_error_profile(A, np.ones(200), [5, 10, 20], [1.0, 1.0 - 1.0 / 200])
    assert [r[0] for r in rows] == [5, 10, 20]
    errs = [r[2] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    for k, lam1, err1, res, lam2, err2 in rows:
        assert err1 == pytest.approx(abs(lam1 - 1.0))
        assert err1 <= res
