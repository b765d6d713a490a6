"""Command-line harness: generate scenarios, solve, evaluate schemes, and batch-compare algorithms.

Exit codes: 0 ok, 1 infeasible or constraint violation, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import sys
from pathlib import Path

from msplace.errors import (
    DimensionMismatchError,
    EnumerationTooLargeError,
    GeneratorConfigError,
    InfeasibleScenarioError,
    MsplaceError,
    ScenarioFormatError,
    StateSpaceTooLargeError,
    UndefinedRoutingError,
)
from msplace.evaluator import FPP_GUARD, system_average_time
from msplace.generator import GeneratorConfig, generate_scenario
from msplace.model import Scenario, dumps_scenario, load_scenario, load_scheme, validate_scenario
from msplace.solvers import ALGORITHMS, OPTIMAL_GUARD, SERVICE_ORDERS, solve

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2
CSV_HEADER = ("seed", "algorithm", "t_ms", "wall_ms", "feasible", "instances")


class InputError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text}")
    return v


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _load_valid(path: str) -> Scenario:
    try:
        scenario = load_scenario(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except (ScenarioFormatError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    problems = validate_scenario(scenario)
    if problems:
        raise InputError(f"{path}: invalid scenario: " + "; ".join(problems))
    return scenario


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.config).read_text()) if args.config else {}
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    flags = {"seed": args.seed, "n_servers": args.servers, "n_services": args.services,
             "n_user_requirements": args.requirements, "user_count": args.users}
    doc.update({k: v for k, v in flags.items() if v is not None})
    try:
        scenario = generate_scenario(GeneratorConfig.from_dict(doc))
    except (GeneratorConfigError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    _emit(dumps_scenario(scenario), args.output)
    summary = (f"scenario seed={scenario.seed}: {scenario.n_servers} servers, {scenario.n_services} services, "
               f"{len(scenario.function_ids)} functions, {len(scenario.dependency_graph.edges)} calls, "
               f"{len(scenario.demand.entries)} demand entries")
    print(summary, file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK


def _run(scenario: Scenario, algorithm: str, args: argparse.Namespace):
    return solve(scenario, algorithm, improve=args.improve, seed=args.seed, trials=args.trials,
                 service_order=args.service_order, guard=args.guard)


def cmd_solve(args: argparse.Namespace) -> int:
    scenario = _load_valid(args.scenario)
    try:
        result = _run(scenario, args.algorithm, args)
    except StateSpaceTooLargeError as exc:
        raise InputError(str(exc)) from exc
    except InfeasibleScenarioError as exc:
        doc = {"algorithm": args.algorithm, "feasible": False, "error": str(exc)}
        if getattr(exc, "service", None):
            doc["service"] = exc.service
        _emit(_json(doc), args.output)
        return EXIT_INFEASIBLE
    _emit(_json(result.to_dict()), args.output)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_evaluate(args: argparse.Namespace) -> int:
    scenario = _load_valid(args.scenario)
    try:
        scheme = load_scheme(args.scheme)
        scheme.check_against(scenario)
        report = system_average_time(scheme, scenario, mode=args.mode, guard=args.guard)
    except OSError as exc:
        raise InputError(f"cannot read {args.scheme}: {exc}") from exc
    except (DimensionMismatchError, ScenarioFormatError, EnumerationTooLargeError) as exc:
        raise InputError(str(exc)) from exc
    except UndefinedRoutingError as exc:
        doc = {"mode": args.mode, "constraints_ok": False, "error": str(exc), "service": exc.service}
        _emit(_json(doc), args.output)
        return EXIT_INFEASIBLE
    _emit(_json(report.to_dict()), args.output)
    return EXIT_OK if report.constraints_ok else EXIT_INFEASIBLE


def _compare_rows(paths: list[str], algorithms: list[str], args: argparse.Namespace) -> list[list[str]]:
    rows = []
    for path in paths:
        try:
            scenario = _load_valid(path)
        except InputError as exc:
            rows.extend([Path(path).stem, a, "", "", f"error: {exc}", ""] for a in algorithms)
            continue
        ident = str(scenario.seed) if scenario.seed is not None else Path(path).stem
        for algorithm in algorithms:
            try:
                res = _run(scenario, algorithm, args)
            except MsplaceError as exc:
                rows.append([ident, algorithm, "", "", f"error: {type(exc).__name__}: {exc}", ""])
                continue
            wall = "" if args.no_timing else f"{res.wall_time_ms:.3f}"
            rows.append([ident, algorithm, repr(res.t_system), wall, str(res.feasible).lower(), str(res.instances)])
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    paths = sorted({p for pattern in args.scenarios for p in glob.glob(pattern)})
    if not paths:
        raise InputError(f"no scenario files match {args.scenarios}")
    algorithms = args.algorithms or list(ALGORITHMS[:4])
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown:
        raise InputError(f"unknown algorithms {unknown}; choose from {list(ALGORITHMS)}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(_compare_rows(paths, algorithms, args))
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--improve", action="store_true", help="run the instance-adding improvement pass afterwards")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for the random baseline")
    p.add_argument("--trials", type=_positive_int, default=100, help="random baseline trials")
    p.add_argument("--service-order", choices=SERVICE_ORDERS, default="pseudocode",
                   help="B-QSRFP candidate order: smallest (pseudocode) or largest (prose) mu/r_s first")
    p.add_argument("--guard", type=_positive_int, default=OPTIMAL_GUARD,
                   help="state-space limit for the exhaustive optimal search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msplace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a random scenario")
    g.add_argument("--config", help="generator config JSON; flags override its values")
    g.add_argument("--seed", type=int)
    g.add_argument("--servers", type=_positive_int)
    g.add_argument("--services", type=_positive_int)
    g.add_argument("--requirements", type=_positive_int, help="number of user-requested entry functions")
    g.add_argument("--users", type=_nonneg_int, help="total user count")
    g.add_argument("--output", "-o", help="scenario file to write (default stdout)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="compute a deployment scheme")
    s.add_argument("scenario")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="bd-qsrfp")
    _solver_flags(s)
    s.add_argument("--output", "-o", help="result JSON to write (default stdout)")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="score a given deployment scheme")
    e.add_argument("scenario")
    e.add_argument("scheme")
    e.add_argument("--mode", choices=("qsrfp", "fpp"), default="qsrfp")
    e.add_argument("--guard", type=_positive_int, default=FPP_GUARD, help="response-path limit in fpp mode")
    e.add_argument("--output", "-o")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="run several algorithms on several scenarios, write CSV")
    c.add_argument("scenarios", nargs="+", help="scenario files or glob patterns")
    c.add_argument("--algorithms", nargs="+", metavar="ALG",
                   help=f"subset of {', '.join(ALGORITHMS)} (default: all but optimal)")
    _solver_flags(c)
    c.add_argument("--no-timing", action="store_true", help="leave wall_ms empty so reruns are byte-identical")
    c.add_argument("--output", "-o", help="CSV file to write (default stdout)")
    c.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"msplace {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
