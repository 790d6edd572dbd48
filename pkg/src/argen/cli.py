"""Command-line front end: single solves with traces, benchmark sweeps and
the admissible-region grid generator.

Exit codes: 0 on certified termination, 1 on usage errors, 2 when an
iteration budget ran out (the trace is still written).  Output files are
only opened after all arguments validate, so usage errors leave no partial
files behind.  CSV floats use the shortest representation that round-trips.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .driver import ARTrace, IterationBudgetError, ar1pgn_solve, ar2gn_solve
from .linalg import smallest_eigenpair
from .model import ARConfig, RegularizedQuadratic
from .norms import GeneralNorm
from .problems import BUILTIN_NAMES, builtin_problem, householder_matrix

TRACE_COLUMNS = (
    "k", "f", "dual_grad_norm", "lambda_min", "sigma", "rho", "step_norm",
    "accepted", "inner_iterations", "descent_ok", "grad_residual",
    "curvature_residual", "x",
)

DEFAULT_STARTS = {
    "quadratic": lambda n: np.ones(n),
    "rosenbrock": lambda n: np.array([-1.2, 1.0] * ((n + 1) // 2))[:n],
    "sixhumpcamel": lambda n: np.array([0.1, -0.1]),
    "rastrigin2d": lambda n: np.array([0.4, -0.3]),
    "regquad_as_objective": lambda n: np.zeros(2),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures raise instead of exiting with 2."""

    def error(self, message):
        raise UsageError(message)


def trace_rows(trace: ARTrace):
    """Per-iteration dictionaries in the fixed trace schema."""
    rows = []
    for r in trace.records:
        rows.append({
            "k": r.k,
            "f": r.f,
            "dual_grad_norm": r.dual_grad_norm,
            "lambda_min": r.lambda_min,
            "sigma": r.sigma,
            "rho": r.rho,
            "step_norm": r.step_norm,
            "accepted": r.accepted,
            "inner_iterations": r.inner_iterations,
            "descent_ok": r.certificate.descent_ok,
            "grad_residual": r.certificate.grad_residual,
            "curvature_residual": r.certificate.curvature_residual,
            "x": [float(v) for v in r.x],
        })
    return rows


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ";".join(repr(float(v)) for v in value)
    return str(value)


def write_trace_csv(path: str, trace: ARTrace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in trace_rows(trace):
            writer.writerow([_cell(row[c]) for c in TRACE_COLUMNS])


def write_trace_json(path: str, trace: ARTrace):
    with open(path, "w") as fh:
        json.dump(trace_rows(trace), fh)
        fh.write("\n")


def read_trace_csv(path: str):
    """Parse a trace CSV back into the same dictionaries as trace_rows."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append({
                "k": int(rec["k"]),
                "f": float(rec["f"]),
                "dual_grad_norm": float(rec["dual_grad_norm"]),
                "lambda_min": float(rec["lambda_min"]) if rec["lambda_min"] else None,
                "sigma": float(rec["sigma"]),
                "rho": float(rec["rho"]),
                "step_norm": float(rec["step_norm"]),
                "accepted": rec["accepted"] == "1",
                "inner_iterations": int(rec["inner_iterations"]),
                "descent_ok": rec["descent_ok"] == "1",
                "grad_residual": float(rec["grad_residual"]),
                "curvature_residual": (float(rec["curvature_residual"])
                                       if rec["curvature_residual"] else None),
                "x": [float(v) for v in rec["x"].split(";")] if rec["x"] else [],
            })
    return out


def _parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v != ""])
    except ValueError as exc:
        raise UsageError(f"expected comma-separated floats, got {text!r}") from exc


def _build_config(args, p: int) -> ARConfig:
    try:
        return ARConfig(
            p=p,
            sigma0=args.sigma0,
            eps1=args.eps1,
            eps2=getattr(args, "eps2", 1e-5) or 1e-5,
            max_outer=args.max_outer,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_solve(args) -> int:
    if args.algo == "ar2gn" and args.p != 2:
        raise UsageError("ar2gn requires --p 2")
    if args.problem not in BUILTIN_NAMES:
        raise UsageError(f"unknown problem {args.problem!r}")
    cfg = _build_config(args, args.p)
    norm = GeneralNorm(args.norm)
    problem = builtin_problem(args.problem, args.n)
    x0 = _parse_floats(args.x0) if args.x0 else DEFAULT_STARTS[args.problem](args.n)
    if x0.shape != (problem.dim,):
        raise UsageError(f"x0 has {x0.shape[0]} entries, problem needs {problem.dim}")

    code = 0
    try:
        if args.algo == "ar1pgn":
            x, trace = ar1pgn_solve(problem, x0, cfg, norm, inner_mode=args.inner)
        else:
            x, trace = ar2gn_solve(problem, x0, cfg, norm, inner_mode=args.inner)
    except IterationBudgetError as exc:
        x, trace = exc.x, exc.trace
        code = 2
    if args.trace:
        if args.format == "csv":
            write_trace_csv(args.trace, trace)
        else:
            write_trace_json(args.trace, trace)
    status = "terminated" if trace.terminated else "budget exhausted"
    print(f"{args.algo} on {args.problem} ({args.norm}): {status} after "
          f"{trace.iterations} iterations, f = {trace.final_f!r}, "
          f"dual grad norm = {trace.final_dual_grad_norm!r}, "
          f"n_f={trace.n_f} n_g={trace.n_g} n_H={trace.n_H}")
    return code


def _bench_cell(algo, problem_name, n, norm_kind, eps1, eps2, seed, repeat, max_outer):
    problem = builtin_problem(problem_name, n)
    norm = GeneralNorm(norm_kind)
    rng = np.random.default_rng(seed)
    x0 = DEFAULT_STARTS[problem_name](n) + rng.uniform(-0.5, 0.5, size=problem.dim)
    cfg = ARConfig(p=2, eps1=eps1, eps2=eps2, max_outer=max_outer)
    start = time.perf_counter()
    terminated = True
    try:
        if algo == "ar1pgn":
            _, trace = ar1pgn_solve(problem, x0, cfg, norm)
        else:
            _, trace = ar2gn_solve(problem, x0, cfg, norm)
    except IterationBudgetError as exc:
        trace = exc.trace
        terminated = False
    wall = time.perf_counter() - start
    return {
        "algo": algo, "problem": problem_name, "n": n, "norm": norm_kind,
        "eps1": eps1, "eps2": eps2, "repeat": repeat,
        "successful_iterations": trace.successful,
        "total_iterations": trace.iterations,
        "n_f": trace.n_f, "n_g": trace.n_g, "n_H": trace.n_H,
        "wall_time_s": wall, "terminated": terminated,
    }


BENCH_COLUMNS = ("algo", "problem", "n", "norm", "eps1", "eps2", "repeat",
                 "successful_iterations", "total_iterations", "n_f", "n_g",
                 "n_H", "wall_time_s", "terminated")


def cmd_bench(args) -> int:
    problems = [p for p in args.problems.split(",") if p]
    norms = [v for v in args.norms.split(",") if v]
    eps_values = [float(v) for v in args.eps_list.split(",") if v]
    for p in problems:
        if p not in BUILTIN_NAMES:
            raise UsageError(f"unknown problem {p!r}")
    for v in norms:
        if v not in GeneralNorm.kinds:
            raise UsageError(f"unknown norm {v!r}")
    if not problems or not norms or not eps_values or args.repeats < 1:
        raise UsageError("empty benchmark sweep")
    vary = args.vary or ("eps2" if args.algo == "ar2gn" else "eps1")
    if vary == "eps2" and args.algo != "ar2gn":
        raise UsageError("--vary eps2 only applies to ar2gn")

    cells = []
    root = np.random.SeedSequence(args.seed)
    for problem_name in problems:
        for norm_kind in norms:
            for eps in eps_values:
                for rep in range(args.repeats):
                    eps1 = eps if vary == "eps1" else args.eps1_fixed
                    eps2 = eps if vary == "eps2" else args.eps2_fixed
                    cells.append((len(cells), (
                        args.algo, problem_name, args.n, norm_kind, eps1, eps2,
                        root.spawn(1)[0], rep, args.max_outer)))

    workers = int(os.environ.get("ARGEN_THREADS", "0")) or min(8, os.cpu_count() or 1)
    results = [None] * len(cells)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_bench_cell, *cell): i for i, cell in cells}
        for fut, i in futures.items():
            results[i] = fut.result()

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for row in results:
            writer.writerow([_cell(row[c]) for c in BENCH_COLUMNS])
    print(f"wrote {len(results)} benchmark rows to {args.out}")
    return 0


@dataclass(frozen=True)
class RegionCell:
    """One grid point of the admissible-region scan."""

    s: tuple
    descent_ok: bool
    noc1_band: bool
    noc2_ok: bool


@dataclass
class RegionGrid:
    axis1: np.ndarray
    axis2: np.ndarray
    descent_ok: np.ndarray
    noc1_band: np.ndarray
    noc2_ok: np.ndarray
    params: dict

    def cell(self, i: int, j: int) -> RegionCell:
        return RegionCell(
            (float(self.axis1[i]), float(self.axis2[j])),
            bool(self.descent_ok[i, j]),
            bool(self.noc1_band[i, j]),
            bool(self.noc2_ok[i, j]),
        )


def region_scan(u=(5.0, 1.0), sigma: float = 6.0, g=(0.0, 0.0), norm_kind: str = "l2",
                grid: int = 801, half_width: float = None, tol1: float = 0.01,
                tol2: float = 0.1) -> RegionGrid:
    """Admissible-region booleans for the 2-D reflection instance on a grid.

    The Hessian is the reflection built from ``u``; the model is the
    cubic-regularized quadratic with weight ``sigma``.  Cells record whether
    the model does not increase (descent_ok), whether the first-order
    residual stays inside the band tol1 * sigma/2 ||s||^2 (noc1_band), and
    whether the second-order residual stays above -tol2 * sigma ||s||
    (noc2_ok).  The default half width is the model's a-priori step radius.
    """
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    if u.shape != (2,) or g.shape != (2,):
        raise ValueError("u and g must be two-dimensional")
    norm = GeneralNorm(norm_kind)
    H = householder_matrix(u)
    q = RegularizedQuadratic(0.0, g, H, sigma, norm)
    eig = smallest_eigenpair(H)
    lam, evec = eig.lambda_min, eig.u
    R = half_width if half_width is not None else q.kappa_upper()
    axis = np.linspace(-R, R, grid)
    S1, S2 = np.meshgrid(axis, axis, indexing="ij")

    if norm.kind == "l1":
        T = np.abs(S1) + np.abs(S2)
    elif norm.kind == "l2":
        T = np.hypot(S1, S2)
    else:
        T = np.maximum(np.abs(S1), np.abs(S2))

    G1 = g[0] + H[0, 0] * S1 + H[0, 1] * S2
    G2 = g[1] + H[1, 0] * S1 + H[1, 1] * S2
    if norm.kind == "l1":
        Gd = np.maximum(np.abs(G1), np.abs(G2))
    elif norm.kind == "l2":
        Gd = np.hypot(G1, G2)
    else:
        Gd = np.abs(G1) + np.abs(G2)

    quad_drop = (g[0] * S1 + g[1] * S2
                 + 0.5 * (H[0, 0] * S1 * S1 + 2.0 * H[0, 1] * S1 * S2
                          + H[1, 1] * S2 * S2))
    descent_ok = quad_drop + sigma / 6.0 * T ** 3 <= 0.0

    half_curv = 0.5 * sigma * T * T
    noc1_band = np.abs(Gd - half_curv) <= tol1 * half_curv

    inner = -np.abs(G1 * evec[0] + G2 * evec[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.maximum(0.0, 1.0 + 2.0 * inner / (sigma * T * T))
    psi[T == 0.0] = 0.0
    omega = 1.0 + 2.0 * np.sqrt(psi) / math.sqrt(3.0)
    omega[T == 0.0] = 1.0
    noc2_ok = lam + omega * sigma * T >= -tol2 * sigma * T

    params = {"u": [float(v) for v in u], "g": [float(v) for v in g],
              "sigma": sigma, "norm": norm_kind, "grid": grid,
              "half_width": float(R), "tol1": tol1, "tol2": tol2,
              "lambda_min": float(lam)}
    return RegionGrid(axis, axis, descent_ok, noc1_band, noc2_ok, params)


def write_region_csv(path: str, rg: RegionGrid):
    with open(path, "w", newline="") as fh:
        for key, value in rg.params.items():
            fh.write(f"# {key}={json.dumps(value)}\n")
        writer = csv.writer(fh)
        writer.writerow(("s1", "s2", "descent_ok", "noc1_band", "noc2_ok"))
        n1, n2 = rg.descent_ok.shape
        for i in range(n1):
            a1 = repr(float(rg.axis1[i]))
            for j in range(n2):
                writer.writerow((
                    a1, repr(float(rg.axis2[j])),
                    "1" if rg.descent_ok[i, j] else "0",
                    "1" if rg.noc1_band[i, j] else "0",
                    "1" if rg.noc2_ok[i, j] else "0",
                ))


def cmd_region(args) -> int:
    if args.sigma <= 0.0:
        raise UsageError("sigma must be positive")
    u = _parse_floats(args.u)
    g = _parse_floats(args.g)
    if u.shape != (2,) or g.shape != (2,):
        raise UsageError("--u and --g need exactly two components")
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    rg = region_scan(u=u, sigma=args.sigma, g=g, norm_kind=args.norm,
                     grid=args.grid, half_width=args.half_width,
                     tol1=args.tol1, tol2=args.tol2)
    write_region_csv(args.out, rg)
    print(f"wrote {args.grid * args.grid} region cells to {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="argen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one solve and write its trace")
    ps.add_argument("--problem", required=True)
    ps.add_argument("--n", type=int, default=2)
    ps.add_argument("--algo", choices=("ar1pgn", "ar2gn"), default="ar2gn")
    ps.add_argument("--p", type=int, choices=(1, 2), default=2)
    ps.add_argument("--norm", choices=GeneralNorm.kinds, default="l2")
    ps.add_argument("--eps1", type=float, default=1e-5)
    ps.add_argument("--eps2", type=float, default=1e-5)
    ps.add_argument("--sigma0", type=float, default=1.0)
    ps.add_argument("--inner", choices=("full", "relaxed1", "relaxed2"), default=None)
    ps.add_argument("--max-outer", type=int, default=500)
    ps.add_argument("--x0", default=None, help="comma-separated start point")
    ps.add_argument("--trace", default=None, help="trace output path")
    ps.add_argument("--format", choices=("csv", "json"), default="csv")
    ps.add_argument("--seed", type=int, default=0,
                    help="accepted for interface uniformity; solves are deterministic")
    ps.set_defaults(func=cmd_solve)

    pb = sub.add_parser("bench", help="benchmark sweep over (problem, norm, eps) cells")
    pb.add_argument("--algo", choices=("ar1pgn", "ar2gn"), required=True)
    pb.add_argument("--problems", required=True, help="comma-separated problem names")
    pb.add_argument("--norms", required=True, help="comma-separated norm kinds")
    pb.add_argument("--eps-list", required=True, help="comma-separated tolerances")
    pb.add_argument("--repeats", type=int, default=1)
    pb.add_argument("--n", type=int, default=2)
    pb.add_argument("--vary", choices=("eps1", "eps2"), default=None,
                    help="which tolerance the eps list sweeps (default: eps1 for "
                         "ar1pgn, eps2 for ar2gn)")
    pb.add_argument("--eps1-fixed", type=float, default=1e-5)
    pb.add_argument("--eps2-fixed", type=float, default=1e-5)
    pb.add_argument("--max-outer", type=int, default=500)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=cmd_bench)

    pr = sub.add_parser("region", help="admissible-region grid for the 2-D instance")
    pr.add_argument("--u", default="5,1")
    pr.add_argument("--sigma", type=float, default=6.0)
    pr.add_argument("--g", default="0,0")
    pr.add_argument("--norm", choices=GeneralNorm.kinds, default="l2")
    pr.add_argument("--grid", type=int, default=801)
    pr.add_argument("--half-width", type=float, default=None)
    pr.add_argument("--tol1", type=float, default=0.01)
    pr.add_argument("--tol2", type=float, default=0.1)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_region)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            if not (0.0 < args.eps1 <= 1.0):
                raise UsageError("eps1 must lie in (0, 1]")
            if args.algo == "ar2gn" and not (0.0 < args.eps2 <= 1.0):
                raise UsageError("eps2 must lie in (0, 1]")
            if args.inner is None:
                args.inner = "relaxed1" if args.algo == "ar2gn" else "relaxed2"
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
