"""Command-line harness: ``table1``, ``table2``, ``figure1`` and ``solve``.

Every report embeds the parsed configuration.  Terminal tables print six
significant digits; CSV and JSON files keep full precision.  The exit code is
0 only when every requested row completed and every built-in check passed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import bound_report, perturbation_sweep
from .coarse import CoarsePolicy
from .dense import sym_eig
from .errors import DeflatronError
from .krylov import CgConfig
from .linalg import (
    as_scipy,
    assert_spd_sample,
    dense_limit,
    read_dense_market,
    read_matrix_market,
    write_dense_market,
)
from .problems import fig1_eigenvalues, laplace_bilinear, make_rng, random_unit_solution_rhs, spectrum_matrix
from .projection import DeflationBasis
from .solvers import deflated_cg
from .subspaces import (
    AggregateSet,
    aggregation_basis,
    direct_interpolation,
    eigen_basis,
    full_coarsening,
    verify_wap_tau,
)

TABLE2_MAX_N = 63
FIG1_N = 100
FIG1_MAGNITUDES = (0.0,) + tuple(float(t) for t in np.logspace(-8, 0, 17))
FIG1_KAPPA_SLACK = 1e-6

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- formatting


def fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "NA" if not math.isfinite(x) else f"{x:.6g}"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def render_table(rows: list[dict], columns: list[str]) -> str:
    cells = [columns] + [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def rows_to_csv(rows: list[dict], columns: list[str], config: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(_jsonable(config), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["NA" if isinstance(v, float) and not math.isfinite(v) else repr(v) if isinstance(v, float) else v
                    for v in (r.get(c, "") for c in columns)])
    return buf.getvalue()


def emit(args, rows: list[dict], columns: list[str], config: dict, extra: dict | None = None) -> None:
    """Print the table and, with ``--out``, write the full-precision report."""
    print(render_table(rows, columns))
    if args.out is None:
        return
    path = Path(args.out)
    if args.format == "json":
        doc = {"config": config, "rows": rows}
        if extra:
            doc.update(extra)
        path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
    else:
        path.write_text(rows_to_csv(rows, columns, config))


def base_config(args) -> dict:
    cfg = {k: str(v) if isinstance(v, CoarsePolicy) else v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    return cfg


def cg_config(args, absolute: bool) -> CgConfig:
    return CgConfig(tol_rel=args.tol, max_iter=args.max_iter, absolute=absolute)


def parse_policy(text: str) -> CoarsePolicy:
    try:
        return CoarsePolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# ---------------------------------------------------------------- table1


TABLE1_COLUMNS = ["p", "N", "n", "m", "iterations", "converged", "residual", "error", "error_a", "inner_iterations", "seconds", "status"]


def cmd_table1(args) -> int:
    if not 4 <= args.p_min <= args.p_max <= 9:
        raise UsageError(f"need 4 <= p_min <= p_max <= 9, got p_min={args.p_min}, p_max={args.p_max}")
    config = base_config(args)
    cfg = cg_config(args, absolute=args.stop == "absolute")
    rows, ok = [], True
    for p in range(args.p_min, args.p_max + 1):
        N = 2**p - 1
        row = {"p": p, "N": N, "n": N * N}
        t0 = time.perf_counter()
        try:
            prob = laplace_bilinear(N)
            basis = direct_interpolation(prob.matrix, full_coarsening(N))
            x_true, b = random_unit_solution_rhs(prob.matrix, args.seed)
            rep = deflated_cg(prob.matrix, basis, args.inner, b, cfg=cfg)
            err = x_true - rep.x
            row.update(
                m=basis.m,
                iterations=rep.iterations,
                converged=rep.converged,
                residual=rep.final_residual,
                error=float(np.linalg.norm(err)),
                error_a=float(np.sqrt(max(err @ (prob.matrix @ err), 0.0))),
                inner_iterations=rep.inner_iterations_total,
                status="ok" if rep.converged else "not converged",
            )
            ok &= rep.converged
        except (DeflatronError, MemoryError, ArithmeticError, RuntimeError) as exc:
            row["status"] = f"error: {exc}"
            ok = False
        row["seconds"] = time.perf_counter() - t0
        rows.append(row)
    emit(args, rows, TABLE1_COLUMNS, config)
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------- table2


TABLE2_COLUMNS = ["quantity", "value"]
TABLE2_ORDER = ["lambda_min", "lambda_max", "kappa", "mu_ell", "mu_1", "kappa_eff", "K", "gamma", "bound", "xi", "m", "tau", "norm_gershgorin"]


def cmd_table2(args) -> int:
    N = args.N
    if N < 3:
        raise UsageError(f"N must be >= 3, got {N}")
    if N > TABLE2_MAX_N or N * N > dense_limit():
        print(f"size limit: dense analysis supports N <= {TABLE2_MAX_N} (n <= {dense_limit()}), got N={N}", file=sys.stderr)
        return EXIT_FAILED
    config = base_config(args)
    prob = laplace_bilinear(N)
    split = full_coarsening(N)
    basis = direct_interpolation(prob.matrix, split)
    rep = bound_report(prob.matrix, basis, strict=False)
    values = rep.to_dict()
    values["tau"] = verify_wap_tau(prob.matrix, split, basis)
    values["norm_gershgorin"] = float(np.abs(as_scipy(prob.matrix)).sum(axis=1).max())
    violations = rep.violations()
    rows = [{"quantity": k, "value": values[k]} for k in TABLE2_ORDER]
    emit(args, rows, TABLE2_COLUMNS, config, extra={"report": values, "violations": violations})
    for v in violations:
        print(f"bound check failed: {v}", file=sys.stderr)
    return EXIT_OK if not violations else EXIT_FAILED


# ---------------------------------------------------------------- figure1


FIG1_PLOT_COLUMNS = ["e1_frob", "Eff. Cond", "Estimate", "Opt. Cond.", "Cond."]


def _fig1_direction(n: int, v1: np.ndarray, seed) -> np.ndarray:
    d = make_rng(seed).standard_normal(n)
    d -= (v1 @ d) * v1
    return d / np.linalg.norm(d)


def cmd_figure1(args) -> int:
    mags = FIG1_MAGNITUDES if args.magnitudes is None else tuple(args.magnitudes)
    if any(t < 0.0 for t in mags):
        raise UsageError("magnitudes must be non-negative")
    config = base_config(args)
    config["magnitudes"] = list(mags)
    prob = spectrum_matrix(FIG1_N, fig1_eigenvalues(FIG1_N), frame=args.frame, seed=args.seed)
    eig = sym_eig(prob.matrix)
    k = FIG1_N - 1
    direction = _fig1_direction(FIG1_N, eig.vectors[:, k], args.seed)
    sweep = perturbation_sweep(prob.matrix, eig, k, direction[:, None], mags)
    sweep.meta.update(config=_jsonable(config))

    problems = []
    defined = sweep.estimate_defined()
    for r, d in zip(sweep.records, defined):
        if d and math.isfinite(r.kappa_eff_estimate) and r.kappa_eff_actual > r.kappa_eff_estimate * (1.0 + 1e-12):
            problems.append(f"estimate {r.kappa_eff_estimate} below actual {r.kappa_eff_actual} at |E1|_F={r.e1_frob}")
        if r.kappa_eff_actual > sweep.kappa * (1.0 + FIG1_KAPPA_SLACK):
            problems.append(f"kappa_eff {r.kappa_eff_actual} exceeds kappa {sweep.kappa} at |E1|_F={r.e1_frob}")

    rows = [
        {"e1_frob": r.e1_frob, "delta": r.delta_measured, "kappa_eff": r.kappa_eff_actual,
         "estimate": r.kappa_eff_estimate, "kappa_opt": r.kappa_opt, "kappa": sweep.kappa}
        for r in sweep.records
    ]
    print(render_table(rows, ["e1_frob", "delta", "kappa_eff", "estimate", "kappa_opt", "kappa"]))
    if args.out is not None:
        path = Path(args.out)
        if args.format == "json":
            path.write_text(sweep.to_json() + "\n")
        else:
            path.write_text(f"# config: {json.dumps(_jsonable(config), sort_keys=True)}\n" + sweep.to_csv())
    if args.plot_data is not None:
        plot_rows = [
            {"e1_frob": r.e1_frob, "Eff. Cond": r.kappa_eff_actual, "Estimate": r.kappa_eff_estimate,
             "Opt. Cond.": r.kappa_opt, "Cond.": sweep.kappa}
            for r in sweep.records
        ]
        Path(args.plot_data).write_text(rows_to_csv(plot_rows, FIG1_PLOT_COLUMNS, config))
    for msg in problems:
        print(f"check failed: {msg}", file=sys.stderr)
    return EXIT_OK if not problems else EXIT_FAILED


# ---------------------------------------------------------------- solve


def _json_arg(text: str) -> str:
    path = Path(text)
    if not text.lstrip().startswith(("[", "{")) and path.is_file():
        return path.read_text()
    return text


def build_subspace(spec: str, a) -> DeflationBasis:
    """Parse ``aggregation:<json>``, ``interpolation:full_coarsening:<N>``,
    ``eigen:<k>`` or ``basis_file:<mm>``."""
    kind, _, arg = spec.partition(":")
    n = a.shape[0]
    if kind == "aggregation":
        agg = AggregateSet.from_json(_json_arg(arg))
        if agg.n != n:
            raise UsageError(f"aggregation covers {agg.n} variables, matrix has {n}")
        return aggregation_basis(agg)
    if kind == "interpolation":
        method, _, size = arg.partition(":")
        if method != "full_coarsening" or not size:
            raise UsageError(f"unknown interpolation spec {arg!r}")
        N = int(size)
        if N * N != n:
            raise UsageError(f"full coarsening on an {N}x{N} grid needs n={N * N}, matrix has {n}")
        return direct_interpolation(a, full_coarsening(N))
    if kind == "eigen":
        if n > dense_limit():
            raise UsageError(f"eigen subspace needs a dense eigensolve, n={n} exceeds {dense_limit()}")
        return eigen_basis(sym_eig(a.toarray()), int(arg))
    if kind == "basis_file":
        return DeflationBasis(read_dense_market(arg), "user_supplied")
    raise UsageError(f"unknown subspace spec {spec!r}")


def cmd_solve(args) -> int:
    config = base_config(args)
    a = read_matrix_market(args.matrix)
    if not assert_spd_sample(a, seed=args.seed):
        print("matrix failed the SPD sample check", file=sys.stderr)
        return EXIT_FAILED
    basis = build_subspace(args.subspace, a)
    if args.rhs is not None:
        b = read_dense_market(args.rhs).ravel()
    else:
        _, b = random_unit_solution_rhs(a, args.seed)
    rep = deflated_cg(a, basis, args.inner, b, cfg=cg_config(args, absolute=args.stop == "absolute"))
    summary = {"config": config, "n": a.shape[0], "m": basis.m, **rep.summary()}
    if args.solution is not None:
        write_dense_market(args.solution, rep.x)
    text = json.dumps(_jsonable(summary), indent=2)
    if args.out is not None:
        Path(args.out).write_text(text + "\n")
    print(render_table([summary], ["n", "m", "iterations", "converged", "final_residual", "true_residual", "inner_iterations_total"]))
    return EXIT_OK if rep.converged else EXIT_FAILED


# ---------------------------------------------------------------- parser


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-6, help="outer residual tolerance (default 1e-6)")
    common.add_argument("--max-iter", type=int, default=10_000, help="outer iteration cap")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("--out", default=None, help="report file")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    return common


def _solver_flags(inner: str, stop: str) -> argparse.ArgumentParser:
    # built per subcommand: parent actions are shared, so defaults must not be
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--inner", type=parse_policy, default=CoarsePolicy.parse(inner),
                        help=f"coarse solve: direct | fixed:<tc> | adaptive:<c> (default {inner})")
    solver.add_argument("--stop", choices=("absolute", "relative"), default=stop,
                        help=f"stop on ||r|| <= tol or on ||r|| <= tol*||b|| (default {stop})")
    return solver


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deflatron", description="Deflated CG experiments and solver.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("table1", parents=[_common_flags(), _solver_flags("adaptive:1", "absolute")], help="iteration counts on the 9-point grids")
    p1.add_argument("--p-min", type=int, default=4)
    p1.add_argument("--p-max", type=int, default=9)
    p1.set_defaults(func=cmd_table1)

    p2 = sub.add_parser("table2", parents=[_common_flags()], help="condition numbers and bound constants")
    p2.add_argument("--N", type=int, default=31)
    p2.set_defaults(func=cmd_table2)

    p3 = sub.add_parser("figure1", parents=[_common_flags()], help="perturbed eigenvector sweep")
    p3.add_argument("--magnitudes", type=lambda s: [float(t) for t in s.split(",")], default=None,
                    help="comma-separated ||E1||_F values")
    p3.add_argument("--frame", choices=("diagonal", "random_orthogonal"), default="diagonal")
    p3.add_argument("--plot-data", default=None, help="CSV with the four plotted series")
    p3.set_defaults(func=cmd_figure1)

    p4 = sub.add_parser("solve", parents=[_common_flags(), _solver_flags("direct", "relative")], help="deflated CG on a Matrix Market file")
    p4.add_argument("matrix")
    p4.add_argument("--subspace", required=True,
                    help="aggregation:<json> | interpolation:full_coarsening:<N> | eigen:<k> | basis_file:<mm>")
    p4.add_argument("--rhs", default=None, help="Matrix Market array file; default b = A x for a seeded unit x")
    p4.add_argument("--solution", default=None, help="write the solution vector here")
    p4.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.tol <= 0.0 or args.tol >= 1.0:
            raise UsageError("--tol must lie in (0, 1)")
        if args.max_iter < 1:
            raise UsageError("--max-iter must be >= 1")
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (DeflatronError, ValueError, OSError) as exc:
        print(f"deflatron: error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
