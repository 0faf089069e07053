"""Outer iterations: extrapolated restarted k-step Arnoldi and its baselines."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dense_eig import hessenberg_eigen, select_dominant
from .diagnostics import residual_norm
from .krylov import RankDeficiencyError, arnoldi_factorization, assemble_kstep_output, mgs_qr
from .matrix_core import MatvecCounter, SparseMatrix, matvec, normalize

__all__ = [
    "GammaKind",
    "GammaStrategy",
    "SolveConfig",
    "TraceRow",
    "SolveReport",
    "gamma_value",
    "extrapolated_kstep",
    "restarted_arnoldi",
    "power_iteration",
    "lobpcg2_step",
    "block_kstep",
]

CACHED_ACCOUNTING = (
    "residuals from cached A V products; k matvecs per outer iteration "
    "(plus k for the initializing Arnoldi call)"
)
EXPLICIT_ACCOUNTING = (
    "residuals recomputed with one fresh matvec; k + 1 matvecs per outer iteration "
    "(plus k for the initializing Arnoldi call)"
)


class GammaKind(enum.Enum):
    NONE = "none"
    CONSTANT = "const"
    HALF_SQUARED_RATIO = "half-sq-ratio"
    RATIO = "ratio"
    RATIO_POWER_J = "ratio-pow-j"


@dataclass(frozen=True)
class GammaStrategy:
    """Rule for the extrapolation weight ``gamma_j``."""

    kind: GammaKind = GammaKind.NONE
    c: float = 0.0

    def __post_init__(self):
        if self.kind is GammaKind.CONSTANT and not -1.0 <= self.c <= 0.0:
            raise ValueError(f"constant gamma must lie in [-1, 0], got {self.c}")

    @classmethod
    def none(cls):
        return cls(GammaKind.NONE)

    @classmethod
    def constant(cls, c: float):
        return cls(GammaKind.CONSTANT, float(c))

    @classmethod
    def half_squared_ratio(cls):
        return cls(GammaKind.HALF_SQUARED_RATIO)

    @classmethod
    def ratio(cls):
        return cls(GammaKind.RATIO)

    @classmethod
    def ratio_power_j(cls):
        return cls(GammaKind.RATIO_POWER_J)

    @property
    def uses_second_value(self) -> bool:
        return self.kind in (GammaKind.HALF_SQUARED_RATIO, GammaKind.RATIO, GammaKind.RATIO_POWER_J)

    @property
    def token(self) -> str:
        if self.kind is GammaKind.CONSTANT:
            return f"const:{self.c:g}"
        return self.kind.value

    def __str__(self):
        return self.token


def gamma_value(strategy: GammaStrategy, lam1: float, lam2: float, j: int) -> float:
    """Evaluate ``gamma_j`` and clamp it to ``[-1, 0]``.

    ``lam2`` enters only through ``|lam2 / lam1|``; a ``nan`` second value
    (no second Ritz value available) yields 0.
    """
    kind = strategy.kind
    if kind is GammaKind.NONE:
        return 0.0
    if kind is GammaKind.CONSTANT:
        g = strategy.c
    else:
        if lam1 == 0.0:
            raise ZeroDivisionError("dynamic gamma needs a nonzero dominant Ritz value")
        if np.isnan(lam2):
            return 0.0
        r = abs(lam2 / lam1)
        if kind is GammaKind.HALF_SQUARED_RATIO:
            g = -0.25 * r * r
        elif kind is GammaKind.RATIO:
            g = -r
        else:
            if j < 1:
                raise ValueError("outer iteration index starts at 1")
            g = -(min(r, 1.0) ** j)
    return float(min(0.0, max(-1.0, g)))


@dataclass
class SolveConfig:
    k: int = 8
    m: int = 2
    tol: float = 1e-7
    max_outer: int = 1000
    strategy: GammaStrategy = field(default_factory=GammaStrategy.none)
    y0: np.ndarray | None = None
    explicit_residual: bool = False
    reorthogonalize: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 1 <= self.m <= self.k:
            raise ValueError("m must lie in [1, k]")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be positive")
        if self.strategy.uses_second_value and self.k < 4:
            warnings.warn(
                f"{self.strategy.token} relies on the second Ritz value, which is rarely meaningful for k < 4",
                stacklevel=2,
            )

    def start_vector(self, n: int) -> np.ndarray:
        if self.y0 is None:
            return np.ones(n)
        y0 = np.asarray(self.y0, dtype=np.float64)
        if y0.shape != (n,):
            raise ValueError(f"start vector has shape {y0.shape}, expected ({n},)")
        return y0


class TraceRow(NamedTuple):
    iter: int
    matvecs: int
    lambda1: float
    lambda2: float
    gamma: float
    residual: float


@dataclass
class SolveReport:
    converged: bool
    outer_iterations: int
    matvecs: int
    lambda1: float
    lambda2: float
    eigenvector: np.ndarray
    trace: list[TraceRow]
    accounting_note: str = ""

    @property
    def final_residual(self) -> float:
        return self.trace[-1].residual if self.trace else np.inf


def _kstep(A, u, cfg, counter, check=True):
    fact = arnoldi_factorization(A, u, cfg.k, counter, reorthogonalize=cfg.reorthogonalize)
    out = assemble_kstep_output(fact, max(cfg.m, 2))
    residual = out.residual
    if check and cfg.explicit_residual:
        residual = residual_norm(A, out.lambdas[0], out.y, counter)
    return out.y, out.lambdas[0], out.lambdas[1], residual


def extrapolated_kstep(A: SparseMatrix, cfg: SolveConfig, counter: MatvecCounter | None = None) -> SolveReport:
    """Restarted k-step Arnoldi with depth-1 extrapolation of the restart vector.

    Starting from ``y^(1)``, the Ritz vector of an initial Arnoldi pass on
    ``y0``, each outer iteration ``j`` runs Arnoldi on ``u^(j)`` to get
    ``y^(j+1)`` and the leading Ritz values, evaluates ``gamma_j`` from
    them and restarts from the normalized
    ``u^(j+1) = (1 - gamma_j) y^(j+1) + gamma_j y^(j)``. Before combining, ``y^(j)``
    is flipped if needed so that ``y^(j) . y^(j+1) >= 0``.

    The loop stops once ``||A y^(j+1) - lam_1^(j) y^(j+1)|| < tol``.
    """
    if A.n < cfg.k:
        raise ValueError(f"k = {cfg.k} exceeds the matrix dimension {A.n}")
    counter = MatvecCounter() if counter is None else counter
    start = counter.count

    y_prev, *_ = _kstep(A, cfg.start_vector(A.n), cfg, counter, check=False)
    u = y_prev
    trace: list[TraceRow] = []
    converged = False
    y_next, lam1, lam2 = y_prev, np.nan, np.nan
    for j in range(1, cfg.max_outer + 1):
        y_next, lam1, lam2, residual = _kstep(A, u, cfg, counter)
        converged = residual < cfg.tol
        gamma = gamma_value(cfg.strategy, lam1, lam2, j)
        trace.append(TraceRow(j, counter.count - start, lam1, lam2, gamma, residual))
        if converged:
            break
        if y_prev @ y_next < 0:
            y_prev = -y_prev
        u = normalize((1.0 - gamma) * y_next + gamma * y_prev)
        y_prev = y_next

    return SolveReport(
        converged=converged,
        outer_iterations=len(trace),
        matvecs=counter.count - start,
        lambda1=float(lam1),
        lambda2=float(lam2),
        eigenvector=y_next,
        trace=trace,
        accounting_note=EXPLICIT_ACCOUNTING if cfg.explicit_residual else CACHED_ACCOUNTING,
    )


def restarted_arnoldi(A: SparseMatrix, cfg: SolveConfig, counter: MatvecCounter | None = None) -> SolveReport:
    """Plain restarted k-step Arnoldi (no extrapolation); reference for ``gamma = 0``."""
    if A.n < cfg.k:
        raise ValueError(f"k = {cfg.k} exceeds the matrix dimension {A.n}")
    counter = MatvecCounter() if counter is None else counter
    start = counter.count
    y, *_ = _kstep(A, cfg.start_vector(A.n), cfg, counter, check=False)
    trace = []
    lam1 = lam2 = np.nan
    converged = False
    for j in range(1, cfg.max_outer + 1):
        y, lam1, lam2, residual = _kstep(A, normalize(y), cfg, counter)
        converged = residual < cfg.tol
        trace.append(TraceRow(j, counter.count - start, lam1, lam2, 0.0, residual))
        if converged:
            break
    return SolveReport(
        converged, len(trace), counter.count - start, float(lam1), float(lam2), y, trace,
        EXPLICIT_ACCOUNTING if cfg.explicit_residual else CACHED_ACCOUNTING,
    )


def power_iteration(
    A: SparseMatrix,
    y0=None,
    tol: float = 1e-7,
    max_iters: int = 10_000,
    counter: MatvecCounter | None = None,
) -> SolveReport:
    """Power method with Rayleigh-quotient eigenvalue estimates.

    Iteration ``i`` spends one product ``w = A x``, reports the Rayleigh
    quotient ``x . w`` and the residual ``||w - rho x||`` of the current
    ``x``, then moves to ``w / ||w||``.
    """
    counter = MatvecCounter() if counter is None else counter
    start = counter.count
    x = normalize(np.ones(A.n) if y0 is None else y0)
    trace = []
    rho = np.nan
    converged = False
    for i in range(1, max_iters + 1):
        w = matvec(A, x, counter)
        rho = float(x @ w)
        residual = float(np.linalg.norm(w - rho * x))
        trace.append(TraceRow(i, counter.count - start, rho, np.nan, 0.0, residual))
        if residual < tol:
            converged = True
            break
        x = normalize(w)
    return SolveReport(
        converged, len(trace), counter.count - start, rho, np.nan, x, trace,
        "one matvec per iteration; residual reuses the cached product",
    )


def lobpcg2_step(A: SparseMatrix, x, counter: MatvecCounter | None = None):
    """Maximize the Rayleigh quotient over ``span{x, r(x)}``.

    Returns ``(x_next, converged)`` with ``x_next`` a unit vector oriented
    along ``x``. If ``x`` is already an eigenvector the span is
    one-dimensional and ``x`` (normalized) comes back with ``converged``
    set.
    """
    x = normalize(x)
    Ax = matvec(A, x, counter)
    rho = x @ Ax
    r = Ax - rho * x
    r -= (x @ r) * x
    rn = np.linalg.norm(r)
    if rn <= 1e-14 * max(np.linalg.norm(Ax), np.finfo(float).tiny):
        return x, True
    p = r / rn
    Ap = matvec(A, p, counter)
    G = np.array([[rho, x @ Ap], [p @ Ax, p @ Ap]])
    G = 0.5 * (G + G.T)
    pairs = hessenberg_eigen(G)
    best = int(np.argmax(pairs.values.real))
    c = pairs.vectors[:, best].real
    x_next = normalize(c[0] * x + c[1] * p)
    if x_next @ x < 0:
        x_next = -x_next
    return x_next, False


def _orthonormal_extension(Q, X):
    """Orthonormalize ``X`` against ``Q`` (two MGS passes), dropping dependent columns."""
    cols = []
    for j in range(X.shape[1]):
        v = X[:, j].copy()
        orig = np.linalg.norm(v)
        for _ in range(2):
            for q in Q.T:
                v -= (q @ v) * q
            for q in cols:
                v -= (q @ v) * q
        nrm = np.linalg.norm(v)
        if orig > 0.0 and nrm > 1e-13 * orig:
            cols.append(v / nrm)
    if not cols:
        return np.empty((Q.shape[0], 0))
    return np.column_stack(cols)


def block_kstep(
    A: SparseMatrix,
    W0=None,
    k: int = 8,
    tol: float = 1e-7,
    max_outer: int = 1000,
    counter: MatvecCounter | None = None,
    steps: int = 2,
    y0=None,
) -> SolveReport:
    """Block k-step method: keep ``b = k / steps`` Ritz vectors between restarts.

    Each outer iteration extends the current block ``W`` to the block
    Krylov space ``span{W, A W, ..., A^{steps-1} W}`` (orthonormalized),
    solves the projected eigenproblem and keeps the ``b`` largest-magnitude
    Ritz vectors as the next block. ``steps=2`` is the block 2-step method
    with ``b = k / 2``. Products of ``A`` with the retained block are
    carried over, so an outer iteration costs ``(steps - 1) * b`` matvecs.

    ``W0`` defaults to the orthonormal Krylov basis of ``y0`` (all ones if
    not given) of dimension ``b``. Iteration 0 in the trace is the
    Rayleigh-Ritz check on ``W0`` itself.
    """
    if steps < 2 or k % steps:
        raise ValueError(f"k = {k} must be a multiple of steps = {steps} >= 2")
    b = k // steps
    if k > A.n:
        raise ValueError(f"k = {k} exceeds the matrix dimension {A.n}")
    counter = MatvecCounter() if counter is None else counter
    start = counter.count

    if W0 is None:
        fact = arnoldi_factorization(A, np.ones(A.n) if y0 is None else y0, b, counter)
        if fact.breakdown_at is not None:
            raise RankDeficiencyError(fact.breakdown_at)
        Q, AQ = fact.V, fact.W
    else:
        W0 = np.asarray(W0, dtype=np.float64).reshape(A.n, -1)
        if W0.shape[1] != b:
            raise ValueError(f"initial block must have {b} columns, got {W0.shape[1]}")
        Q, _ = mgs_qr(W0)
        AQ = np.column_stack([matvec(A, q, counter) for q in Q.T])

    trace = []
    lam1 = lam2 = np.nan
    x = Q[:, 0]
    converged = False
    for j in range(0, max_outer + 1):
        if j > 0:
            blocks, products = [Q], [AQ]
            frontier = AQ
            for _ in range(steps - 1):
                P = _orthonormal_extension(np.column_stack(blocks), frontier)
                if P.shape[1] == 0:
                    break
                AP = np.column_stack([matvec(A, p, counter) for p in P.T])
                blocks.append(P)
                products.append(AP)
                frontier = AP
            Q = np.column_stack(blocks)
            AQ = np.column_stack(products)

        H = Q.T @ AQ
        pairs = hessenberg_eigen(H)
        dom = select_dominant(pairs, min(2, H.shape[0]))
        lam1 = dom.values[0]
        lam2 = dom.values[1] if dom.values.size > 1 else np.nan
        z = dom.vector
        x = Q @ z
        ax = AQ @ z
        nx = np.linalg.norm(x)
        x, ax = x / nx, ax / nx
        residual = float(np.linalg.norm(ax - lam1 * x))
        trace.append(TraceRow(j, counter.count - start, lam1, lam2, 0.0, residual))
        if residual < tol:
            converged = True
            break
        if j == max_outer:
            break

        keep = _retained_basis(pairs, b)
        Z, R = np.linalg.qr(keep)
        if np.any(np.abs(np.diag(R)) <= 1e-13 * np.abs(R).max()):
            raise RankDeficiencyError(0)
        Q, AQ = Q @ Z, AQ @ Z

    return SolveReport(
        converged, len(trace), counter.count - start, float(lam1), float(lam2), x, trace,
        f"{(steps - 1) * b} matvecs per outer iteration; residual from cached block products",
    )


def _retained_basis(pairs, b):
    """Real basis for the span of the ``b`` largest-magnitude Ritz vectors.

    A complex pair contributes its real and imaginary parts; if the cut falls
    inside a pair, the pair is kept whole so the subspace stays real.
    """
    cols = []
    seen = set()
    for i in pairs.order:
        if len(cols) >= b:
            break
        if i in seen:
            continue
        v = pairs.vectors[:, i]
        lam = pairs.values[i]
        if lam.imag == 0.0:
            cols.append(v.real)
            seen.add(i)
        else:
            partner = next(
                p for p in pairs.order if p != i and p not in seen and pairs.values[p] == np.conj(lam)
            )
            cols.extend([v.real, v.imag])
            seen.update((i, partner))
    return np.column_stack(cols)

