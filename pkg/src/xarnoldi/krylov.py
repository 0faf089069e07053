"""k-step Krylov subspace constructions.

Three ways of projecting ``A`` onto the Krylov space ``K_k(y1)``:

* :func:`naive_kstep_projection` uses the raw vectors ``y1, A y1, ...`` and
  a Gram matrix, which becomes singular quickly as ``k`` grows;
* :func:`orthogonalized_kstep_projection` builds the raw vectors first and
  orthonormalizes them afterwards with modified Gram-Schmidt;
* :func:`arnoldi_factorization` orthonormalizes before each product.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dense_eig import EigenPairSet, generalized_eigen, hessenberg_eigen, select_dominant
from .diagnostics import gram_condition
from .matrix_core import MatvecCounter, SparseMatrix, ZeroVectorError, matvec, normalize

__all__ = [
    "RankDeficiencyError",
    "ArnoldiFactorization",
    "KrylovProjection",
    "KStepOutput",
    "naive_kstep_projection",
    "mgs_orthonormalize",
    "mgs_qr",
    "orthogonalized_kstep_projection",
    "arnoldi_factorization",
    "assemble_kstep_output",
    "arnoldi_error_profile",
]

BREAKDOWN_RTOL = 1e-13
RANK_RTOL = 1e-13


class RankDeficiencyError(ValueError):
    def __init__(self, column: int):
        super().__init__(f"column {column} is numerically dependent on the previous ones")
        self.column = column


@dataclass(frozen=True)
class ArnoldiFactorization:
    """``A V = V H + (residual in the last column)``, with ``W = A V`` cached.

    All arrays are trimmed to ``k_effective`` columns. ``breakdown_at`` is
    set when the recurrence hit an invariant subspace before reaching the
    requested ``k``.
    """

    V: np.ndarray
    H: np.ndarray
    W: np.ndarray
    k_requested: int
    breakdown_at: int | None = None

    @property
    def k_effective(self) -> int:
        return self.H.shape[0]

    def orthogonality_error(self) -> float:
        k = self.k_effective
        return float(np.abs(self.V.T @ self.V - np.eye(k)).max())


@dataclass(frozen=True)
class KrylovProjection:
    """Projected pencil ``(K, M)`` of ``A`` on a (possibly raw) Krylov basis."""

    basis: np.ndarray
    K: np.ndarray
    M: np.ndarray
    cond_M: float
    orthonormal: bool = False
    raw_cond: float | None = None

    def eigenpairs(self) -> EigenPairSet:
        if self.orthonormal:
            return hessenberg_eigen(self.K)
        pairs, _ = generalized_eigen(self.K, self.M)
        return pairs

    def ritz_values(self) -> np.ndarray:
        return self.eigenpairs().sorted_values()


class KStepOutput(NamedTuple):
    y: np.ndarray
    lambdas: np.ndarray
    a: np.ndarray
    residual: float
    is_complex: np.ndarray


def naive_kstep_projection(A: SparseMatrix, y1, k: int, counter: MatvecCounter | None = None) -> KrylovProjection:
    """Project onto ``y1, A y1, ..., A^{k-1} y1`` without orthogonalization.

    ``y1`` is scaled to unit norm once; the remaining columns are raw
    powers. Uses exactly ``k`` products.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    Y = np.empty((A.n, k))
    AY = np.empty((A.n, k))
    Y[:, 0] = normalize(y1)
    for j in range(k):
        AY[:, j] = matvec(A, Y[:, j], counter)
        if j + 1 < k:
            if not np.any(AY[:, j]):
                raise ZeroVectorError(f"Krylov vector {j + 1} vanished")
            Y[:, j + 1] = AY[:, j]
    K = Y.T @ AY
    M = Y.T @ Y
    return KrylovProjection(Y, K, M, gram_condition(M))


def mgs_qr(vectors):
    """Modified Gram-Schmidt ``vectors = Q R`` with Q orthonormal."""
    X = np.array(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    Qt = np.empty((k, n))
    R = np.zeros((k, k))
    for j in range(k):
        q = X[:, j].copy()
        orig = np.linalg.norm(q)
        for i in range(j):
            R[i, j] = Qt[i] @ q
            q -= R[i, j] * Qt[i]
        nrm = np.linalg.norm(q)
        if orig == 0.0 or nrm < RANK_RTOL * orig:
            raise RankDeficiencyError(j)
        R[j, j] = nrm
        Qt[j] = q / nrm
    return Qt.T, R


def mgs_orthonormalize(vectors) -> np.ndarray:
    return mgs_qr(vectors)[0]


def orthogonalized_kstep_projection(
    A: SparseMatrix, y1, k: int, counter: MatvecCounter | None = None
) -> KrylovProjection:
    """Raw Krylov vectors first, then MGS, then ``K = Q^T A Q``.

    The ``k + 1`` raw vectors cost ``k`` products; ``A Q`` is recovered
    from them through the triangular factor, so no further products are
    spent. ``raw_cond`` is the condition number of the raw Gram matrix.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    raw = np.empty((A.n, k + 1))
    raw[:, 0] = normalize(y1)
    for j in range(k):
        raw[:, j + 1] = matvec(A, raw[:, j], counter)
    Q, R = mgs_qr(raw[:, :k])
    AQ = np.linalg.solve(R.T, raw[:, 1:].T).T
    K = Q.T @ AQ
    raw_gram = raw[:, :k].T @ raw[:, :k]
    return KrylovProjection(Q, K, np.eye(k), 1.0, orthonormal=True, raw_cond=gram_condition(raw_gram))


def arnoldi_factorization(
    A: SparseMatrix,
    y1,
    k: int,
    counter: MatvecCounter | None = None,
    reorthogonalize: bool = False,
) -> ArnoldiFactorization:
    """k-step Arnoldi with modified Gram-Schmidt.

    Each new direction is orthogonalized against the basis before it is
    multiplied by ``A``. The last column of ``H`` is filled but no
    ``(k+1)``-th basis vector is formed, so exactly ``k`` products are used
    unless the recurrence breaks down (``h_{n+1,n} <= 1e-13 ||A y_n||``),
    in which case the factorization is truncated to the invariant subspace.

    ``reorthogonalize`` adds one extra MGS sweep per column; it is a
    diagnostic aid and off by default.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = A.n
    if k > n:
        raise ValueError(f"k = {k} exceeds the matrix dimension {n}")
    Vt = np.empty((k, n))
    Wt = np.empty((k, n))
    H = np.zeros((k, k))
    Vt[0] = normalize(y1)
    breakdown = None
    size = k
    for j in range(k):
        w = matvec(A, Vt[j], counter)
        Wt[j] = w
        r = w.copy()
        for i in range(j + 1):
            h = Vt[i] @ r
            H[i, j] = h
            r -= h * Vt[i]
        if reorthogonalize:
            for i in range(j + 1):
                c = Vt[i] @ r
                H[i, j] += c
                r -= c * Vt[i]
        if j == k - 1:
            break
        beta = np.linalg.norm(r)
        if beta <= BREAKDOWN_RTOL * np.linalg.norm(w):
            breakdown = j + 1
            size = j + 1
            break
        H[j + 1, j] = beta
        Vt[j + 1] = r / beta
    return ArnoldiFactorization(
        V=Vt[:size].T,
        H=H[:size, :size].copy(),
        W=Wt[:size].T,
        k_requested=k,
        breakdown_at=breakdown,
    )


def assemble_kstep_output(fact: ArnoldiFactorization, m: int = 2) -> KStepOutput:
    """Dominant Ritz pair of a factorization lifted back to the long space.

    Returns the unit vector ``y = V a``, the ``m`` leading Ritz values (padded
    with ``nan`` when the factorization is smaller than ``m``), the reduced
    vector ``a`` and the residual ``||W a - lam_1 V a||`` computed from the
    cached products.
    """
    pairs = hessenberg_eigen(fact.H)
    m_eff = min(m, fact.k_effective)
    dom = select_dominant(pairs, m_eff)
    a = dom.vector
    y = fact.V @ a
    Ay = fact.W @ a
    nrm = np.linalg.norm(y)
    y /= nrm
    Ay /= nrm
    lam1 = dom.values[0]
    residual = float(np.linalg.norm(Ay - lam1 * y))
    lambdas = np.full(m, np.nan)
    lambdas[:m_eff] = dom.values
    flags = np.zeros(m, dtype=bool)
    flags[:m_eff] = dom.is_complex
    return KStepOutput(y, lambdas, a, residual, flags)


def arnoldi_error_profile(A: SparseMatrix, y0, ks, exact_values, counter: MatvecCounter | None = None):
    """Single (unrestarted) Arnoldi runs for each ``k`` in ``ks``.

    Returns one row per ``k``: ``(k, lam1, |lam1 - exact[0]|, residual,
    lam2, |lam2 - exact[1]|)``. The residual is the eigenvector residual
    ``||A y - lam1 y||`` of the dominant Ritz pair.
    """
    rows = []
    for k in ks:
        out = assemble_kstep_output(arnoldi_factorization(A, y0, k, counter), m=2)
        lam1, lam2 = out.lambdas
        rows.append((k, lam1, abs(lam1 - exact_values[0]), out.residual, lam2, abs(lam2 - exact_values[1])))
    return rows
