"""Command-line harness: single solves, iteration-count tables and trace sweeps.

Examples::

    xarnoldi run --synthetic alt-diag:1000 --k 8 --gamma const:-0.75 --tol 1e-7
    xarnoldi table --synthetic alt-diag:1000 --k 8
    xarnoldi bench --synthetic alt-diag:1000 --k 2,4,8 \\
        --strategies none,const:-0.75,ratio-pow-j,power --out traces/
    xarnoldi profile --synthetic inv-iota:1000:i_over_n --k 5,10,15,20,25,30,35,40
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dense_eig import ComplexDominantError, ConditioningError, QRConvergenceError
from .krylov import RankDeficiencyError, arnoldi_error_profile
from .matrix_core import (
    MatrixMarketError,
    SparseMatrix,
    ZeroVectorError,
    load_matrix_market,
    make_alternating_diag,
    make_inverse_iota_diag,
)
from .solver import (
    GammaStrategy,
    SolveConfig,
    SolveReport,
    block_kstep,
    extrapolated_kstep,
    power_iteration,
)

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

CSV_HEADER = ("iter", "matvecs", "lambda1", "lambda2", "gamma", "residual")
DEFAULT_TABLE_STRATEGIES = (
    "none", "const:-0.25", "const:-0.5", "const:-0.75", "half-sq-ratio", "ratio", "ratio-pow-j",
)
MANIFEST_HEADER = (
    "matrix", "k", "strategy", "status", "converged", "iters", "matvecs", "lambda1", "final_residual", "file",
)

# errors a solve may legitimately raise on bad input or numerics
SOLVE_ERRORS = (
    ComplexDominantError,
    ConditioningError,
    QRConvergenceError,
    RankDeficiencyError,
    ZeroVectorError,
    ValueError,
    ZeroDivisionError,
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# grammar


def parse_strategy(token: str) -> GammaStrategy | None:
    """``none | const:<v> | half-sq-ratio | ratio | ratio-pow-j | power``.

    ``power`` selects the power-iteration baseline and maps to ``None``.
    """
    t = token.strip()
    if t == "power":
        return None
    if t == "none":
        return GammaStrategy.none()
    if t == "half-sq-ratio":
        return GammaStrategy.half_squared_ratio()
    if t == "ratio":
        return GammaStrategy.ratio()
    if t == "ratio-pow-j":
        return GammaStrategy.ratio_power_j()
    if t.startswith("const:"):
        try:
            c = float(t[len("const:"):])
        except ValueError:
            raise UsageError(f"bad constant in strategy {token!r}") from None
        try:
            return GammaStrategy.constant(c)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    raise UsageError(f"unknown strategy {token!r}")


def parse_synthetic(spec: str) -> SparseMatrix:
    """``alt-diag:<n>`` or ``inv-iota:<n>:<n_over_i|i_over_n>``."""
    parts = spec.split(":")
    try:
        if parts[0] == "alt-diag" and len(parts) == 2:
            return make_alternating_diag(int(parts[1]))
        if parts[0] == "inv-iota" and len(parts) in (2, 3):
            variant = parts[2] if len(parts) == 3 else "i_over_n"
            return make_inverse_iota_diag(int(parts[1]), variant)
    except ValueError as exc:
        raise UsageError(f"bad synthetic matrix {spec!r}: {exc}") from None
    raise UsageError(f"unknown synthetic matrix {spec!r}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None
    if not values:
        raise UsageError("empty integer list")
    return values


def _strategy_list(text: str) -> list[str]:
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    if not tokens:
        raise UsageError("empty strategy list")
    for t in tokens:
        parse_strategy(t)
    return tokens


@dataclass(frozen=True)
class MatrixSource:
    kind: str  # "path" or "synthetic"
    value: str

    @property
    def name(self) -> str:
        if self.kind == "path":
            return Path(self.value).stem
        return self.value.replace(":", "-")

    def load(self) -> SparseMatrix:
        if self.kind == "synthetic":
            return parse_synthetic(self.value)
        return load_matrix_market(self.value)


@dataclass(frozen=True)
class RunSpec:
    source: MatrixSource
    solver: str = "kstep"
    k: int = 8
    strategy: str = "none"
    tol: float = 1e-7
    max_outer: int = 1000
    y0: str = "ones"
    explicit_residual: bool = False

    def __post_init__(self):
        if self.solver not in ("kstep", "power", "block"):
            raise UsageError(f"unknown solver {self.solver!r}")
        parse_strategy(self.strategy)


def start_vector(mode: str, n: int) -> np.ndarray:
    if mode == "ones":
        return np.ones(n)
    if mode.startswith("basis:"):
        try:
            i = int(mode[len("basis:"):])
        except ValueError:
            raise UsageError(f"bad start vector {mode!r}") from None
        if not 0 <= i < n:
            raise UsageError(f"basis index {i} outside [0, {n})")
        e = np.zeros(n)
        e[i] = 1.0
        return e
    if mode.startswith("file:"):
        y = np.loadtxt(mode[len("file:"):], dtype=np.float64).ravel()
        if y.size != n:
            raise UsageError(f"start vector file has {y.size} entries, matrix has dimension {n}")
        return y
    raise UsageError(f"unknown start vector mode {mode!r}")


def solve(spec: RunSpec, A: SparseMatrix) -> SolveReport:
    y0 = start_vector(spec.y0, A.n)
    strategy = parse_strategy(spec.strategy)
    if spec.solver == "power" or strategy is None:
        # same matvec budget as a k-step run with max_outer restarts
        return power_iteration(A, y0, spec.tol, max_iters=spec.max_outer * spec.k)
    if spec.solver == "block":
        return block_kstep(A, k=spec.k, tol=spec.tol, max_outer=spec.max_outer, y0=y0)
    cfg = SolveConfig(
        k=spec.k,
        tol=spec.tol,
        max_outer=spec.max_outer,
        strategy=strategy,
        y0=y0,
        explicit_residual=spec.explicit_residual,
    )
    return extrapolated_kstep(A, cfg)


# ---------------------------------------------------------------------------
# rendering


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trace_csv(report: SolveReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in report.trace:
        w.writerow((row.iter, row.matvecs, _fmt(row.lambda1), _fmt(row.lambda2), _fmt(row.gamma), _fmt(row.residual)))
    return buf.getvalue()


def summary_line(report: SolveReport) -> str:
    return (
        f"converged={str(report.converged).lower()} iters={report.outer_iterations} "
        f"matvecs={report.matvecs} lambda1={report.lambda1:.6g}"
    )


def render_table(names, strategies, cells) -> str:
    header = ["matrix", *strategies]
    body = [[name, *row] for name, row in zip(names, cells)]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = []
    for r in [header, *body]:
        first = r[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join([first, *rest]).rstrip())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_run(spec: RunSpec, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        A = spec.source.load()
        report = solve(spec, A)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=err)
        return EXIT_ERROR
    except (OSError, MatrixMarketError, UsageError, *SOLVE_ERRORS) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_ERROR
    out.write(trace_csv(report))
    print(summary_line(report), file=err)
    return EXIT_CONVERGED if report.converged else EXIT_NOT_CONVERGED


def cmd_table(sources, k, tol, strategies, max_outer=1000, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    if not strategies:
        raise UsageError("empty strategy list")
    failed = False
    names, cells = [], []
    for source in sources:
        names.append(source.name)
        try:
            A = source.load()
        except (OSError, MatrixMarketError, UsageError) as exc:
            print(f"error: {source.value}: {exc}", file=err)
            cells.append(["err"] * len(strategies))
            failed = True
            continue
        row = []
        for token in strategies:
            spec = RunSpec(source, k=k, strategy=token, tol=tol, max_outer=max_outer)
            try:
                report = solve(spec, A)
            except SOLVE_ERRORS as exc:
                print(f"error: {source.name} {token}: {exc}", file=err)
                row.append("err")
                failed = True
                continue
            row.append(str(report.outer_iterations) if report.converged else f">{report.outer_iterations}")
        cells.append(row)
    out.write(render_table(names, strategies, cells))
    return EXIT_ERROR if failed else EXIT_CONVERGED


def _bench_cell(A, source, k, token, tol, max_outer, out_dir):
    fname = f"{source.name}_k{k}_{token.replace(':', '')}.csv"
    spec = RunSpec(source, k=k, strategy=token, tol=tol, max_outer=max_outer)
    try:
        report = solve(spec, A)
    except SOLVE_ERRORS as exc:
        return (source.name, k, token, f"error: {exc}", "", "", "", "", "", "")
    (out_dir / fname).write_text(trace_csv(report))
    return (
        source.name, k, token, "ok", str(report.converged).lower(), report.outer_iterations,
        report.matvecs, _fmt(report.lambda1), _fmt(report.final_residual), fname,
    )


def cmd_bench(source, ks, strategies, tol, out_dir, max_outer=1000, jobs=1, err=None) -> int:
    err = sys.stderr if err is None else err
    if not strategies or not ks:
        raise UsageError("need at least one k and one strategy")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    A = source.load()
    cells = [(k, t) for k in ks for t in strategies]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(lambda c: _bench_cell(A, source, c[0], c[1], tol, max_outer, out_dir), cells))
    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        w.writerows(rows)
    for r in rows:
        print(f"{r[0]} k={r[1]} {r[2]}: {r[3]} iters={r[5]}", file=err)
    return EXIT_ERROR if all(r[3] != "ok" for r in rows) else EXIT_CONVERGED


def cmd_profile(source, ks, out=None) -> int:
    """Single Arnoldi passes of growing k on a diagonal matrix (eigenvalue vs residual errors)."""
    out = sys.stdout if out is None else out
    A = source.load()
    if not A.is_diagonal():
        raise UsageError("profile needs a diagonal matrix (exact spectrum known)")
    d = A.diagonal_values()
    exact = d[np.argsort(-np.abs(d), kind="stable")][:2]
    rows = arnoldi_error_profile(A, np.ones(A.n), ks, exact)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("k", "lambda1", "lambda1_error", "residual", "lambda2", "lambda2_error"))
    for r in rows:
        w.writerow((r[0], *(_fmt(v) for v in r[1:])))
    return EXIT_CONVERGED


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_source(p, multiple=False):
    g = p.add_mutually_exclusive_group(required=not multiple)
    action = "append" if multiple else "store"
    g.add_argument("--matrix", action=action, metavar="PATH", help="Matrix Market coordinate file")
    g.add_argument(
        "--synthetic", action=action, metavar="SPEC", help="alt-diag:<n> or inv-iota:<n>:<n_over_i|i_over_n>"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xarnoldi", description="Extrapolated restarted k-step Arnoldi.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="single solve; CSV trace on stdout, summary on stderr")
    _add_source(p)
    p.add_argument("--solver", choices=("kstep", "power", "block"), default="kstep")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--gamma", default="none", help="none | const:<v> | half-sq-ratio | ratio | ratio-pow-j | power")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-outer", type=int, default=1000)
    p.add_argument("--y0", default="ones", help="ones | basis:<i> | file:<path>")
    p.add_argument("--explicit-residual", action="store_true", help="recompute residuals with a fresh matvec")

    p = sub.add_parser("table", help="iterations to convergence per matrix and strategy")
    _add_source(p, multiple=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-outer", type=int, default=1000)
    p.add_argument("--strategies", default=",".join(DEFAULT_TABLE_STRATEGIES))

    p = sub.add_parser("bench", help="one CSV trace per (k, strategy) plus manifest.csv")
    _add_source(p)
    p.add_argument("--k", default="2,4,8", help="comma-separated subspace sizes")
    p.add_argument("--strategies", default="none,const:-0.75,ratio-pow-j,power")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-outer", type=int, default=1000)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="cells solved concurrently")

    p = sub.add_parser("profile", help="single Arnoldi passes on a diagonal matrix; errors vs k")
    _add_source(p)
    p.add_argument("--k", default="5,10,15,20,25,30,35,40")
    return parser


def _single_source(args) -> MatrixSource:
    if args.matrix is not None:
        return MatrixSource("path", args.matrix)
    return MatrixSource("synthetic", args.synthetic)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            spec = RunSpec(
                _single_source(args), solver=args.solver, k=args.k, strategy=args.gamma, tol=args.tol,
                max_outer=args.max_outer, y0=args.y0, explicit_residual=args.explicit_residual,
            )
            return cmd_run(spec)
        if args.command == "table":
            sources = [MatrixSource("path", p) for p in args.matrix or []]
            sources += [MatrixSource("synthetic", s) for s in args.synthetic or []]
            if not sources:
                raise UsageError("need at least one --matrix or --synthetic")
            return cmd_table(sources, args.k, args.tol, _strategy_list(args.strategies), args.max_outer)
        if args.command == "bench":
            return cmd_bench(
                _single_source(args), _int_list(args.k), _strategy_list(args.strategies), args.tol,
                args.out, args.max_outer, args.jobs,
            )
        if args.command == "profile":
            return cmd_profile(_single_source(args), _int_list(args.k))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, MatrixMarketError, *SOLVE_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
