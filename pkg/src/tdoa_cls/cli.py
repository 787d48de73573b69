"""Command line front end.

Exit codes: 0 success, 1 usage or input error, 2 solver error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bench import Scenario, builtin_scenario, run_monte_carlo
from .estimators import Method, estimate_cls
from .geometry import (
    ScenarioError,
    ScenarioFile,
    build_system,
    check_assumption1,
    check_local_pe,
    load_scenario,
    simulate_measurements,
)
from .numerics import SingularMatrixError
from .scenarios import BUILTIN_ARRAYS
from .solver import DegenerateSpectrum, NoRealCandidate, SolverOptions
from .spectrum import pd_interval

_log = logging.getLogger("tdoa_cls")

SEED_ENV = "TDOA_CLS_SEED"
EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sigmas(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sigma list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", "-i", help="scenario JSON file")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", "-f", choices=["json", "csv", "text"])
    common.add_argument("--seed", type=int, help=f"seed override (default: ${SEED_ENV} or the file's seed)")
    common.add_argument("--tol-h", type=float, help="relative tolerance on the constraint function h")
    common.add_argument("--tol-sign", type=float, help="relative tolerance deciding y_1 > 0")

    parser = _Parser(prog="tdoa-cls", description="Range-difference localization by exact constrained least squares.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve a scenario")
    sub.add_parser("simulate", parents=[common], help="draw measurements for a scenario")
    sub.add_parser("spectrum", parents=[common], help="multiplier interval and endpoint null spaces")
    sub.add_parser("check-pe", parents=[common], help="identifiability diagnostics")
    bench = sub.add_parser("bench", parents=[common], help="Monte Carlo RMSE sweep (CSV)")
    bench.add_argument("--builtin", choices=sorted(BUILTIN_ARRAYS), help="use a built-in geometry instead of --input")
    bench.add_argument("--trials", type=int, default=1000)
    bench.add_argument("--sigmas", type=_sigmas, default=None, help="comma separated noise levels")
    bench.add_argument("--method", action="append", choices=[m.value for m in Method], help="repeatable")
    bench.add_argument("--workers", type=int, default=1)
    return parser


def _seed(args) -> Optional[int]:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"${SEED_ENV} is not an integer: {env!r}") from None
    return None


def _options(args) -> SolverOptions:
    opts = SolverOptions()
    if args.tol_h is not None:
        opts = replace(opts, tol_h=args.tol_h)
    if args.tol_sign is not None:
        opts = replace(opts, tol_sign=args.tol_sign)
    return opts


def _scenario(args) -> ScenarioFile:
    if not args.input:
        raise UsageError("--input is required")
    try:
        return load_scenario(args.input)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.input}") from None
    except ScenarioError as exc:
        raise UsageError(f"cannot parse scenario: {exc}") from None


def _emit(args, text: str) -> None:
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _text(doc: dict) -> str:
    return "".join(f"{k}: {json.dumps(v, default=_jsonable)}\n" for k, v in doc.items())


def cmd_solve(args) -> str:
    scn = _scenario(args)
    try:
        meas = scn.resolve_measurements(_seed(args))
    except ScenarioError as exc:
        raise UsageError(str(exc)) from None
    est = estimate_cls(scn.array, meas, _options(args))
    sol = est.solution
    doc = {
        "x_hat": sol.x_hat,
        "y": sol.y_opt,
        "lambda": sol.lambda_opt,
        "objective": sol.objective,
        "classification": sol.classification.value,
        "branch": sol.branch.value,
        "residuals": sol.certificate.as_dict(),
    }
    if sol.second_solution is not None:
        doc["second_y"] = sol.second_solution
    if sol.continuum_basis is not None:
        doc["continuum"] = {"base": sol.continuum_base, "null_basis": sol.continuum_basis.T}
    for key in ("infeasible_measurements", "coincident_sensors"):
        if key in est.diagnostics:
            doc[key] = est.diagnostics[key]
    return _text(doc) if args.format == "text" else _json(doc)


def cmd_simulate(args) -> str:
    scn = _scenario(args)
    if scn.source is None:
        raise UsageError("simulate needs 'source' in the scenario")
    seed = _seed(args)
    seed = seed if seed is not None else (scn.seed if scn.seed is not None else 0)
    sigma = scn.sigma if scn.sigma is not None else 0.0
    meas = simulate_measurements(scn.array, scn.source, sigma, seed)
    out = ScenarioFile(scn.array, scn.source, meas)
    doc = out.to_dict()
    doc["noise"] = {"sigma": sigma, "seed": seed}
    return _json(doc)


def cmd_spectrum(args) -> str:
    scn = _scenario(args)
    try:
        meas = scn.resolve_measurements(_seed(args))
    except ScenarioError as exc:
        raise UsageError(str(exc)) from None
    spec = pd_interval(build_system(scn.array, meas))
    doc = {
        "lambda_l": spec.lambda_l,
        "lambda_u": spec.lambda_u,
        "mult_l": spec.mult_l,
        "mult_u": spec.mult_u,
        "null_l": spec.null_l.T,
        "null_u": spec.null_u.T,
    }
    return _text(doc) if args.format == "text" else _json(doc)


def cmd_check_pe(args) -> str:
    scn = _scenario(args)
    rep = check_local_pe(scn.array, scn.source)
    doc = {
        "collinear_or_coplanar": rep.collinear_or_coplanar,
        "affine_rank": rep.affine_rank,
        "jacobian_rank": rep.jacobian_rank,
        "jacobian_min_singular_value": rep.jacobian_min_singular_value,
        "pe_holds": rep.pe_holds,
        "note": rep.note,
    }
    try:
        meas = scn.resolve_measurements(_seed(args))
    except ScenarioError:
        meas = None
    if meas is not None:
        a1 = check_assumption1(build_system(scn.array, meas), scn.array, 256, _seed(args) or 0)
        doc["assumption1_sampled"] = {
            "heuristic": True,
            "passed_samples": a1.passed_samples,
            "num_samples": a1.num_samples,
            "min_norm_seen": a1.min_norm_seen,
            "a_gram_min_eig": a1.a_gram_min_eig,
        }
    return _text(doc) if args.format == "text" else _json(doc)


def cmd_bench(args) -> str:
    seed = _seed(args)
    methods = tuple(args.method) if args.method else (Method.CLS, Method.ULS)
    if args.builtin:
        sigmas = args.sigmas or [0.01, 0.1, 0.3]
        scn = builtin_scenario(args.builtin, sigmas, args.trials, seed or 0, methods)
    else:
        f = _scenario(args)
        if f.source is None:
            raise UsageError("bench needs 'source' in the scenario")
        sigmas = args.sigmas or ([f.sigma] if f.sigma else [0.01, 0.1, 0.3])
        use_seed = seed if seed is not None else (f.seed or 0)
        scn = Scenario(f.array, f.source, tuple(sigmas), args.trials, use_seed, methods)
    table = run_monte_carlo(scn, _options(args), workers=args.workers)
    if args.format in (None, "csv"):
        return table.to_csv()
    rows = [
        {"sigma": r.sigma, "ten_log_inv_sigma2": r.ten_log_inv_sigma2, "method": r.method.value,
         "rmse": r.rmse, "mse": r.mse, "trials": r.trials, "failed": r.failed}
        for r in table.rows
    ]
    return _json(rows) if args.format == "json" else "".join(_text(r) + "\n" for r in rows)


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "check-pe": cmd_check_pe,
    "bench": cmd_bench,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if args.command == "bench" and (args.trials < 1 or args.workers < 1):
            raise UsageError("--trials and --workers must be positive")
        _emit(args, COMMANDS[args.command](args))
    except UsageError as exc:
        print(f"tdoa-cls: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateSpectrum, NoRealCandidate, SingularMatrixError, ArithmeticError) as exc:
        print(f"tdoa-cls: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"tdoa-cls: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
