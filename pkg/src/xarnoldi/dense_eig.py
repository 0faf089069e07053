"""Small dense eigensolvers for the projected k x k problems.

The nonsymmetric solver is the classical pipeline: Householder reduction to
upper Hessenberg form, Francis double-shift QR to real Schur form (2x2
blocks with real eigenvalues are split by a rotation), and eigenvectors by
back-substitution on the quasi-triangular factor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .diagnostics import SINGULAR_CONDITION, gram_condition

__all__ = [
    "EigenPairSet",
    "DominantRitz",
    "QRConvergenceError",
    "ConditioningError",
    "ComplexDominantError",
    "hessenberg_reduce",
    "real_schur",
    "hessenberg_eigen",
    "generalized_eigen",
    "select_dominant",
]

_EPS = np.finfo(np.float64).eps
_TINY = np.finfo(np.float64).tiny
_TIE_RTOL = 1e-12


class QRConvergenceError(RuntimeError):
    """Shifted QR exceeded its sweep budget.

    ``partial_values`` holds the eigenvalues already deflated when the
    budget ran out.
    """

    def __init__(self, message, partial_values):
        super().__init__(message)
        self.partial_values = np.asarray(partial_values)


class ConditioningError(np.linalg.LinAlgError):
    """The Gram matrix of a Krylov basis is numerically singular."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class ComplexDominantError(ValueError):
    """The largest-magnitude Ritz value is one of a complex-conjugate pair."""


@dataclass(frozen=True)
class EigenPairSet:
    """Eigenvalues and unit eigenvectors of a small matrix.

    ``values`` and the columns of ``vectors`` are in the order the Schur
    form produced them; ``order`` is the permutation that sorts them by
    descending magnitude (ties: real before complex, then larger real
    part, then positive imaginary part first).
    """

    values: np.ndarray
    vectors: np.ndarray
    order: np.ndarray

    @property
    def k(self) -> int:
        return self.values.size

    def sorted_values(self) -> np.ndarray:
        return self.values[self.order]

    def sorted_vectors(self) -> np.ndarray:
        return self.vectors[:, self.order]


class DominantRitz(NamedTuple):
    values: np.ndarray
    vector: np.ndarray
    is_complex: np.ndarray


# ---------------------------------------------------------------------------
# reductions


def _householder(x):
    """Return ``(v, beta)`` with ``(I - beta v v^T) x`` a multiple of e_1."""
    alpha = np.linalg.norm(x)
    v = np.array(x, dtype=np.float64)
    if alpha == 0.0 or np.linalg.norm(x[1:]) == 0.0:
        return v, 0.0
    v[0] += np.copysign(alpha, x[0])
    return v, 2.0 / (v @ v)


def hessenberg_reduce(A):
    """Householder reduction ``A = Q H Q^T`` with ``H`` upper Hessenberg."""
    H = np.array(A, dtype=np.float64)
    k = H.shape[0]
    Q = np.eye(k)
    for j in range(k - 2):
        v, beta = _householder(H[j + 1:, j])
        if beta == 0.0:
            continue
        H[j + 1:, j:] -= beta * np.outer(v, v @ H[j + 1:, j:])
        H[:, j + 1:] -= beta * np.outer(H[:, j + 1:] @ v, v)
        Q[:, j + 1:] -= beta * np.outer(Q[:, j + 1:] @ v, v)
        H[j + 2:, j] = 0.0
    return H, Q


def _split_block(T, Z, i):
    """Triangularize the 2x2 diagonal block at ``i`` if its eigenvalues are real."""
    a, b = T[i, i], T[i, i + 1]
    c, d = T[i + 1, i], T[i + 1, i + 1]
    if c == 0.0:
        return
    p = 0.5 * (a - d)
    disc = p * p + b * c
    if disc < 0.0:
        return
    z = p + np.copysign(np.sqrt(disc), p)
    lam1 = d + z
    lam2 = d - (b * c) / z if z != 0.0 else d
    r = np.hypot(z, c)
    cs, sn = z / r, c / r
    G = np.array([[cs, -sn], [sn, cs]])
    T[i:i + 2, i:] = G.T @ T[i:i + 2, i:]
    T[:i + 2, i:i + 2] = T[:i + 2, i:i + 2] @ G
    Z[:, i:i + 2] = Z[:, i:i + 2] @ G
    T[i, i], T[i + 1, i + 1], T[i + 1, i] = lam1, lam2, 0.0


def _block_values(T, i):
    a, b = T[i, i], T[i, i + 1]
    c, d = T[i + 1, i], T[i + 1, i + 1]
    p = 0.5 * (a - d)
    im = np.sqrt(-(p * p + b * c))
    re = d + p
    return complex(re, im), complex(re, -im)


def _schur_values(T):
    k = T.shape[0]
    vals = []
    i = 0
    while i < k:
        if i + 1 < k and T[i + 1, i] != 0.0:
            vals.extend(_block_values(T, i))
            i += 2
        else:
            vals.append(complex(T[i, i]))
            i += 1
    return np.array(vals, dtype=np.complex128)


def real_schur(H, Z=None, max_sweeps=None):
    """Francis double-shift QR on an upper Hessenberg matrix.

    Returns ``(T, Z)`` with ``H = Z T Z^T`` (or ``Z_in H Z_in^T`` when a
    starting ``Z`` is passed), ``T`` quasi-upper-triangular with 2x2 blocks
    only for complex-conjugate pairs.
    """
    T = np.array(H, dtype=np.float64)
    k = T.shape[0]
    Z = np.eye(k) if Z is None else np.array(Z, dtype=np.float64)
    if max_sweeps is None:
        max_sweeps = 50 * k
    norm = max(np.abs(T).sum(axis=0).max(initial=0.0), _TINY)

    hi = k - 1
    sweeps = 0
    its = 0
    while hi >= 0:
        lo = hi
        while lo > 0:
            s = abs(T[lo - 1, lo - 1]) + abs(T[lo, lo])
            if s == 0.0:
                s = norm
            if abs(T[lo, lo - 1]) <= _EPS * s:
                T[lo, lo - 1] = 0.0
                break
            lo -= 1

        if lo == hi:
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            _split_block(T, Z, lo)
            hi -= 2
            its = 0
            continue

        if sweeps >= max_sweeps:
            partial = _schur_values(T[hi + 1:, hi + 1:]) if hi + 1 < k else np.array([])
            raise QRConvergenceError(
                f"QR iteration did not converge in {max_sweeps} sweeps ({k - hi - 1} of {k} values found)",
                partial,
            )
        sweeps += 1
        its += 1

        if its % 10 == 0:
            # exceptional shift to break cycles
            if its % 20 == 0:
                s = abs(T[hi, hi - 1]) + abs(T[hi - 1, hi - 2])
                h11 = 0.75 * s + T[hi, hi]
            else:
                s = abs(T[lo + 1, lo]) + abs(T[lo + 2, lo + 1])
                h11 = 0.75 * s + T[lo, lo]
            tr = 2.0 * h11
            det = h11 * h11 + 0.4375 * s * s
        else:
            tr = T[hi - 1, hi - 1] + T[hi, hi]
            det = T[hi - 1, hi - 1] * T[hi, hi] - T[hi - 1, hi] * T[hi, hi - 1]

        x = T[lo, lo] * T[lo, lo] + T[lo, lo + 1] * T[lo + 1, lo] - tr * T[lo, lo] + det
        y = T[lo + 1, lo] * (T[lo, lo] + T[lo + 1, lo + 1] - tr)
        z = T[lo + 1, lo] * T[lo + 2, lo + 1]
        for p in range(lo, hi - 1):
            v, beta = _householder(np.array([x, y, z]))
            if beta != 0.0:
                q = max(lo, p - 1)
                r = min(p + 3, hi)
                T[p:p + 3, q:] -= beta * np.outer(v, v @ T[p:p + 3, q:])
                T[:r + 1, p:p + 3] -= beta * np.outer(T[:r + 1, p:p + 3] @ v, v)
                Z[:, p:p + 3] -= beta * np.outer(Z[:, p:p + 3] @ v, v)
            if p > lo:
                T[p + 1, p - 1] = 0.0
                T[p + 2, p - 1] = 0.0
            x = T[p + 1, p]
            y = T[p + 2, p]
            if p < hi - 2:
                z = T[p + 3, p]
        v, beta = _householder(np.array([x, y]))
        if beta != 0.0:
            T[hi - 1:hi + 1, hi - 2:] -= beta * np.outer(v, v @ T[hi - 1:hi + 1, hi - 2:])
            T[:hi + 1, hi - 1:hi + 1] -= beta * np.outer(T[:hi + 1, hi - 1:hi + 1] @ v, v)
            Z[:, hi - 1:hi + 1] -= beta * np.outer(Z[:, hi - 1:hi + 1] @ v, v)
        T[hi, hi - 2] = 0.0

    return np.triu(T, -1), Z


# ---------------------------------------------------------------------------
# eigenvectors of the quasi-triangular factor


def _solve_2x2(B, rhs, small):
    a, b, c, d = B[0, 0], B[0, 1], B[1, 0], B[1, 1]
    det = a * d - b * c
    if abs(det) < small * max(abs(a) + abs(b), abs(c) + abs(d), small):
        a, d = a + small, d + small
        det = a * d - b * c
        if det == 0:
            det = small * small
    return np.array([(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det])


def _back_substitute(T, x, top, lam, small):
    """Fill ``x[:top]`` so that ``(T - lam I) x = 0`` given ``x[top:]``."""
    j = top - 1
    while j >= 0:
        if j > 0 and T[j, j - 1] != 0.0:
            rhs = -(T[j - 1:j + 1, j + 1:] @ x[j + 1:])
            B = T[j - 1:j + 1, j - 1:j + 1] - lam * np.eye(2)
            x[j - 1:j + 1] = _solve_2x2(B, rhs, small)
            j -= 2
        else:
            piv = T[j, j] - lam
            if abs(piv) < small:
                piv = small
            x[j] = -(T[j, j + 1:] @ x[j + 1:]) / piv
            j -= 1
        peak = np.abs(x).max()
        if peak > 1e100:
            x /= peak


def _schur_vectors(T):
    k = T.shape[0]
    small = max(_EPS * np.abs(T).max(initial=0.0), _TINY)
    values = []
    X = np.zeros((k, k), dtype=np.complex128)
    i = 0
    while i < k:
        if i + 1 < k and T[i + 1, i] != 0.0:
            lam, lam_bar = _block_values(T, i)
            x = np.zeros(k, dtype=np.complex128)
            x[i] = lam - T[i + 1, i + 1]
            x[i + 1] = T[i + 1, i]
            _back_substitute(T, x, i, lam, small)
            X[:, i] = x
            X[:, i + 1] = np.conj(x)
            values.extend((lam, lam_bar))
            i += 2
        else:
            lam = T[i, i]
            x = np.zeros(k)
            x[i] = 1.0
            _back_substitute(T, x, i, lam, small)
            X[:, i] = x
            values.append(complex(lam))
            i += 1
    return np.array(values, dtype=np.complex128), X


def _magnitude_order(values):
    mags = np.abs(values)
    idx = sorted(range(values.size), key=lambda i: -mags[i])
    scale = max(mags.max(initial=0.0), _TINY)
    groups = []
    for i in idx:
        if groups and mags[groups[-1][0]] - mags[i] <= _TIE_RTOL * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    order = []
    for g in groups:
        g.sort(key=lambda i: (values[i].imag != 0.0, -values[i].real, -values[i].imag))
        order.extend(g)
    return np.array(order, dtype=np.intp)


def _is_hessenberg(A, tol=1e-14):
    return A.shape[0] < 3 or bool(np.all(np.abs(np.tril(A, -2)) <= tol))


def hessenberg_eigen(H) -> EigenPairSet:
    """All eigenpairs of a small real matrix.

    Upper Hessenberg input goes straight to the QR iteration; anything else
    is reduced first. Eigenvectors have unit 2-norm and conjugate pairs
    are built from a single solve, so the spectrum is exactly closed under
    conjugation.

    Raises
    ------
    QRConvergenceError
        If the QR iteration exceeds ``50 * k`` sweeps.
    """
    H = np.array(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    if _is_hessenberg(H):
        Hh, Q = np.triu(H, -1), np.eye(H.shape[0])
    else:
        Hh, Q = hessenberg_reduce(H)
    T, Z = real_schur(Hh, Q)
    values, X = _schur_vectors(T)
    V = Z @ X
    V /= np.linalg.norm(V, axis=0)
    return EigenPairSet(values, V, _magnitude_order(values))


def generalized_eigen(K, M):
    """Solve ``K a = lam M a`` for symmetric positive definite ``M``.

    Returns ``(pairs, cond_M)``. Symmetric ``K`` is handled through the
    Cholesky factor of ``M``; otherwise ``M^{-1} K`` is formed explicitly.

    Raises
    ------
    ConditioningError
        If ``M`` has condition number above 1e15 or is not positive definite.
    """
    K = np.array(K, dtype=np.float64)
    M = np.array(M, dtype=np.float64)
    cond = gram_condition(M)
    if not cond <= SINGULAR_CONDITION:
        raise ConditioningError(f"Gram matrix is numerically singular (cond = {cond:.3g})", cond)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ConditioningError("Cholesky factorization of the Gram matrix broke down", np.inf) from None

    scale = max(np.abs(K).max(initial=0.0), _TINY)
    if np.all(np.abs(K - K.T) <= 1e-12 * scale):
        X = np.linalg.solve(L, K)
        C = np.linalg.solve(L, X.T)
        C = 0.5 * (C + C.T)
        pairs = hessenberg_eigen(C)
        vectors = np.linalg.solve(L.T, pairs.vectors)
    else:
        pairs = hessenberg_eigen(np.linalg.solve(M, K))
        vectors = pairs.vectors
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return EigenPairSet(pairs.values, vectors, pairs.order), cond


def select_dominant(pairs: EigenPairSet, m: int = 2) -> DominantRitz:
    """Pick the largest-magnitude eigenvalue (which must be real) and its vector.

    The returned vector is scaled so that its largest-magnitude component
    is positive. The other ``m - 1`` reported values follow in magnitude
    order; complex ones are reported by modulus and flagged.
    """
    if not 1 <= m <= pairs.k:
        raise ValueError(f"m must lie in [1, {pairs.k}], got {m}")
    first = pairs.order[0]
    lam = pairs.values[first]
    if lam.imag != 0.0:
        raise ComplexDominantError(f"complex dominant Ritz value {lam:.6g}")
    a = pairs.vectors[:, first].real.copy()
    a /= np.linalg.norm(a)
    if a[np.argmax(np.abs(a))] < 0:
        a = -a
    values = np.empty(m)
    flags = np.zeros(m, dtype=bool)
    for slot, i in enumerate(pairs.order[:m]):
        v = pairs.values[i]
        if v.imag != 0.0:
            values[slot] = abs(v)
            flags[slot] = True
        else:
            values[slot] = v.real
    return DominantRitz(values, a, flags)
