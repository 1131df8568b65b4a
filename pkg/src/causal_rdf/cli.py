"""Command-line interface: ``causal-rdf {solve,sweep,realize,validate,compare,check}``.

Exit codes: 0 success, 2 validation failure, 3 capacity, 4 non-convergence,
5 parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .errors import CapacityError, CausalRDFError, DistortionRangeError, DomainError, SpecError, SpecParseError
from .oracle import OracleConfig, brute_force_lagrangian, verify_causal_factorization
from .realization import realize_and_estimate
from .solver import (
    RDPoint,
    SolverConfig,
    check_distortion_equality,
    classical_for_target_distortion,
    mutual_information,
    solve_fixed_point,
    solve_for_target_distortion,
    sweep,
    verify_markov_reduction,
)
from .distortion import average_distortion
from .probability import CausalKernelFamily
from .source import build_joint, joint_source_measure
from .specfile import ProblemSpec, check_multiplier, dump_spec, load_spec, parse_s_grid

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3
EXIT_NONCONVERGED = 4
EXIT_PARSE = 5

LN2 = math.log(2.0)
MIN_PATHS = 1000
ORACLE_TOL = 5e-3
DEFAULT_GRID = "0:-5:0.25"
VALIDATE_S = (-0.5, -1.5, -3.0)

SWEEP_COLUMNS = ("s", "D_total", "R_total_nats", "R_per_letter_bits", "iterations", "converged")
COMPARE_COLUMNS = (
    "s",
    "D_total",
    "R_causal_nats",
    "R_classical_nats",
    "R_causal_per_letter_bits",
    "R_classical_per_letter_bits",
    "converged",
)

log = logging.getLogger("causal_rdf")


class CLIFailure(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _config(spec: ProblemSpec, **overrides) -> SolverConfig:
    kw = {}
    if spec.tol is not None:
        kw["tol"] = spec.tol
    if spec.max_iter is not None:
        kw["max_iter"] = spec.max_iter
    kw.update(overrides)
    return SolverConfig(**kw)


def _grid(spec: ProblemSpec, text: str | None) -> tuple[float, ...]:
    if text is not None:
        return parse_s_grid(text)
    if spec.s_grid is not None:
        return spec.s_grid
    return parse_s_grid(DEFAULT_GRID)


def _solve_point(spec: ProblemSpec, s: float | None, target: float | None) -> RDPoint:
    if s is not None and target is not None:
        raise CLIFailure("give either --s or --target-D, not both", EXIT_VALIDATION)
    if s is None and target is None:
        s, target = spec.s, spec.target_D
        if s is None and target is None:
            raise CLIFailure("no multiplier: pass --s or --target-D (or set solver.s / solver.target_D)", EXIT_VALIDATION)
    if target is not None and s is None:
        return solve_for_target_distortion(spec.source, spec.distortion, target, _config(spec))
    return solve_fixed_point(spec.source, spec.distortion, _config(spec, s=check_multiplier(s, "--s")))


def point_record(pt: RDPoint) -> dict:
    n1 = pt.letters
    rec = {
        "s": pt.s,
        "horizon": pt.horizon,
        "D_total": pt.D,
        "D_per_letter": pt.D / n1,
        "R_total_nats": pt.R,
        "R_total_bits": pt.R / LN2,
        "R_per_letter_nats": pt.R / n1,
        "R_per_letter_bits": pt.R / n1 / LN2,
        "I_total_nats": pt.I,
        "lagrangian_nats": pt.lagrangian,
        "iterations": pt.iterations,
        "converged": pt.converged,
        "residual": pt.residual,
        "monotone": pt.monotone,
    }
    if pt.kernel is not None:
        rec["markov_reduction"] = verify_markov_reduction(pt.kernel)
        rec["distortion_equality"] = check_distortion_equality(pt)
    return rec


def kernel_record(pt: RDPoint) -> dict:
    nx, ny = pt.kernel.nx, pt.kernel.ny
    return {
        "kernel": [
            {"stage": st.stage, "history_radices": [ny] * st.stage + [nx] * (st.stage + 1), "rows": st.rows.tolist()}
            for st in pt.kernel.stages
        ],
        "output_family": [
            {"stage": i, "history_radices": [ny] * i, "rows": t.reshape(-1, ny).tolist()}
            for i, t in enumerate(pt.output_family.stages)
        ],
    }


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- commands -----------------------------------------------------------------


def cmd_solve(args) -> int:
    spec = load_spec(args.spec)
    pt = _solve_point(spec, args.s, args.target_D)
    rec = point_record(pt)
    if args.emit_kernel:
        rec.update(kernel_record(pt))
    _write(json.dumps(rec, indent=2) + "\n", args.output)
    return EXIT_OK if pt.converged else EXIT_NONCONVERGED


def cmd_sweep(args) -> int:
    spec = load_spec(args.spec)
    grid = _grid(spec, args.s_grid)
    pts = sweep(spec.source, spec.distortion, grid, _config(spec), warm_start=not args.no_warm_start,
                max_workers=args.workers)
    rows = [
        [_fmt(p.s), _fmt(p.D), _fmt(p.R), _fmt(p.R / p.letters / LN2), _fmt(p.iterations), _fmt(p.converged)]
        for p in pts
    ]
    _write(_csv(SWEEP_COLUMNS, rows), args.output)
    return EXIT_OK if all(p.converged for p in pts) else EXIT_NONCONVERGED


def cmd_compare(args) -> int:
    spec = load_spec(args.spec)
    grid = _grid(spec, args.s_grid)
    cfg = _config(spec)
    pts = sweep(spec.source, spec.distortion, grid, cfg)
    mu = joint_source_measure(spec.source)
    rows = []
    for p in pts:
        cl = classical_for_target_distortion(mu, spec.distortion, p.D, cfg)
        r_cl = cl.R
        rows.append([
            _fmt(p.s), _fmt(p.D), _fmt(p.R), _fmt(r_cl),
            _fmt(p.R / p.letters / LN2), _fmt(r_cl / p.letters / LN2), _fmt(p.converged),
        ])
    _write(_csv(COMPARE_COLUMNS, rows), args.output)
    return EXIT_OK if all(p.converged for p in pts) else EXIT_NONCONVERGED


def cmd_realize(args) -> int:
    if args.paths < MIN_PATHS:
        raise CLIFailure(f"--paths must be at least {MIN_PATHS} for a meaningful standard error", EXIT_VALIDATION)
    spec = load_spec(args.spec)
    pt = _solve_point(spec, args.s, args.target_D)
    rep = realize_and_estimate(spec.source, pt, args.paths, args.seed)
    rec = rep.to_dict()
    rec["computed_converged"] = pt.converged
    z = rep.distortion_zscore()
    rec["distortion_zscore"] = z
    rec["within_4_stderr"] = None if z is None else abs(z) <= 4.0
    _write(json.dumps(rec, indent=2) + "\n", args.output)
    return EXIT_OK if pt.converged else EXIT_NONCONVERGED


def _perturbed_lagrangian(pt: RDPoint, weight: float) -> float:
    """Lagrangian of the solver kernel mixed toward the worst-distortion output (test hook)."""
    rho = pt.rho.rho
    worst = np.zeros_like(rho)
    worst[np.arange(rho.shape[0]), rho.argmax(axis=1)] = 1.0
    tables = []
    for st in pt.kernel.stages:
        bad = np.broadcast_to(worst, st.table.shape)
        tables.append((1 - weight) * st.table + weight * bad)
    q = CausalKernelFamily.from_tables(tables, pt.kernel.nx, pt.kernel.ny)
    joint = build_joint(pt.source, q)
    return mutual_information(joint) - pt.s * average_distortion(joint, pt.rho)


def cmd_validate(args) -> int:
    spec = load_spec(args.spec)
    s_values = [check_multiplier(v, "--s") for v in args.s] if args.s else (
        [spec.s] if spec.s is not None else list(VALIDATE_S)
    )
    ocfg = OracleConfig(restarts=args.restarts, seed=args.seed, markov_rows=args.markov_rows)
    mu = joint_source_measure(spec.source)
    ok_all = True
    lines = []
    for s in s_values:
        try:
            oracle_value, oracle_kernel = brute_force_lagrangian(spec.source, spec.distortion, s, ocfg)
        except CapacityError as exc:
            raise CLIFailure(f"{exc}. The oracle only handles tiny instances; validate a smaller spec.",
                             EXIT_CAPACITY) from exc
        pt = solve_fixed_point(spec.source, spec.distortion, _config(spec, s=s))
        solver_value = pt.lagrangian if not args.perturb else _perturbed_lagrangian(pt, args.perturb)
        delta = solver_value - oracle_value
        causal = verify_causal_factorization(build_joint(mu, oracle_kernel))
        ok = abs(delta) < ORACLE_TOL and causal and pt.converged
        ok_all &= ok
        lines.append(
            f"{'PASS' if ok else 'FAIL'} s={s:g} solver={solver_value:.9f} oracle={oracle_value:.9f} "
            f"delta={delta:+.3e} tol={ORACLE_TOL:g} oracle_causal={causal} converged={pt.converged}"
        )
    lines.append("PASS" if ok_all else "FAIL")
    _write("\n".join(lines) + "\n", args.output)
    return EXIT_OK if ok_all else EXIT_VALIDATION


def cmd_check(args) -> int:
    spec = load_spec(args.spec)
    _write(dump_spec(spec), args.output)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal-rdf", description="Causal rate distortion on finite alphabets.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("spec", help="problem-spec TOML file")
        p.add_argument("-o", "--output", help="write to this file instead of stdout")

    p = sub.add_parser("solve", help="solve one point, emit JSON")
    common(p)
    p.add_argument("--s", type=float)
    p.add_argument("--target-D", dest="target_D", type=float, help="total (block) distortion target")
    p.add_argument("--emit-kernel", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="trace the curve over an s grid, emit CSV")
    common(p)
    p.add_argument("--s-grid", help='"start:stop:step" or comma list (default %s)' % DEFAULT_GRID)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("realize", help="sample the filter cascade, emit JSON")
    common(p)
    p.add_argument("--s", type=float)
    p.add_argument("--target-D", dest="target_D", type=float)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("validate", help="compare the solver with the brute-force oracle")
    common(p)
    p.add_argument("--s", type=float, action="append")
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--markov-rows", action="store_true",
                   help="let oracle rows depend on (y^{i-1}, x_i) only; sound for memoryless sources")
    p.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", help="causal vs classical rates at matched distortion, emit CSV")
    common(p)
    p.add_argument("--s-grid")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="validate a spec and re-emit it in canonical form")
    common(p)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CLIFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SpecError as exc:
        where = f" (line {exc.line})" if exc.line and "line" not in str(exc) else ""
        print(f"spec error: {exc}{where}", file=sys.stderr)
        return EXIT_PARSE if isinstance(exc, SpecParseError) else EXIT_VALIDATION
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (DistortionRangeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CausalRDFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
