"""Residuals, Rayleigh quotients, mode ratios, conditioning and cost model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix_core import MatvecCounter, SparseMatrix, ZeroVectorError, matvec

__all__ = [
    "SINGULAR_CONDITION",
    "ModeRatios",
    "CostEstimate",
    "residual_norm",
    "rayleigh_quotient",
    "mode_ratios",
    "extrapolated_ratio",
    "cost_estimate",
    "gram_condition",
    "is_numerically_singular",
]

# condition numbers above this are treated as numerically singular
SINGULAR_CONDITION = 1e15


def residual_norm(A: SparseMatrix, lam: float, y, counter: MatvecCounter | None = None) -> float:
    """``||A y - lam y||_2`` with one fresh product.

    ``y`` is normalized first when its norm is off by more than 1e-12.
    """
    y = np.asarray(y, dtype=np.float64)
    nrm = np.linalg.norm(y)
    if nrm == 0.0:
        raise ZeroVectorError("residual of a zero vector")
    if abs(nrm - 1.0) > 1e-12:
        y = y / nrm
    return float(np.linalg.norm(matvec(A, y, counter) - lam * y))


def rayleigh_quotient(A: SparseMatrix, x, counter: MatvecCounter | None = None) -> float:
    x = np.asarray(x, dtype=np.float64)
    xx = x @ x
    if xx == 0.0:
        raise ZeroVectorError("Rayleigh quotient of a zero vector")
    return float(x @ matvec(A, x, counter) / xx)


@dataclass(frozen=True)
class ModeRatios:
    """Per-eigendirection growth of consecutive iterates.

    ``eta[i]`` compares the next Arnoldi output with the previous one along
    eigenvector ``i``; ``eta_hat[i]`` does the same for the extrapolated
    restart vector. Entries where the previous iterate has no component
    are ``nan`` and ``available`` is False there.
    """

    eta: np.ndarray
    eta_hat: np.ndarray
    gamma: float
    available: np.ndarray


def extrapolated_ratio(eta, gamma):
    """The algebraic map ``eta -> (1 - gamma) eta + gamma``."""
    return (1.0 - gamma) * np.asarray(eta, dtype=np.float64) + gamma


def mode_ratios(y_prev, y_next, u_next, gamma: float, eigenbasis=None) -> ModeRatios:
    """Component ratios of ``y_next`` and ``u_next`` against ``y_prev``.

    ``eigenbasis`` holds orthonormal eigenvectors as columns; ``None`` means
    the standard basis (diagonal test matrices).
    """
    y_prev = np.asarray(y_prev, dtype=np.float64)
    y_next = np.asarray(y_next, dtype=np.float64)
    u_next = np.asarray(u_next, dtype=np.float64)
    if eigenbasis is None:
        c_prev, c_next, c_u = y_prev, y_next, u_next
    else:
        V = np.asarray(eigenbasis, dtype=np.float64)
        c_prev, c_next, c_u = V.T @ y_prev, V.T @ y_next, V.T @ u_next
    available = np.abs(c_prev) >= 1e-14 * np.linalg.norm(y_prev)
    safe = np.where(available, c_prev, 1.0)
    eta = np.where(available, c_next / safe, np.nan)
    eta_hat = np.where(available, c_u / safe, np.nan)
    return ModeRatios(eta, eta_hat, float(gamma), available)


@dataclass(frozen=True)
class CostEstimate:
    k: int
    N: int
    kappa: int
    total_ops: int

    @property
    def matvec_ops(self) -> int:
        return self.k * self.N * self.kappa

    @property
    def orthogonalization_ops(self) -> int:
        return self.k * self.k * self.N


def cost_estimate(k: int, N: int, kappa: int) -> CostEstimate:
    """Operation count of one k-step Arnoldi pass: ``k N kappa + k^2 N``.

    ``kappa`` is the cost of one product per row of the matrix.
    """
    if min(k, N, kappa) < 1:
        raise ValueError("k, N and kappa must be positive")
    return CostEstimate(k, N, kappa, k * N * kappa + k * k * N)


def gram_condition(M) -> float:
    """2-norm condition number of a symmetric matrix from its spectrum.

    Returns ``inf`` when the smallest eigenvalue magnitude underflows to
    zero or the matrix is indefinite (a Gram matrix never is in exact
    arithmetic).
    """
    M = np.asarray(M, dtype=np.float64)
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    top = np.abs(w).max(initial=0.0)
    if top == 0.0:
        return np.inf
    if w.min() <= 0.0:
        return np.inf
    cond = top / w.min()
    return float(cond) if np.isfinite(cond) else np.inf


def is_numerically_singular(cond: float) -> bool:
    return not cond <= SINGULAR_CONDITION
