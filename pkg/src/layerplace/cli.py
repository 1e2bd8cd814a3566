"""Command-line interface: ``layerplace {solve,evaluate,generate,bench,fixtures,export-lp}``.

Exit codes: 0 success, 1 invalid input or I/O error, 2 infeasible (or no
placement found by the heuristic), 3 budget exhausted without any placement.
Machine-readable output goes to stdout (or ``--output``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import __version__
from .errors import BudgetExceeded, Infeasible, NoPlacementFound, PlacementError, ValidationError
from .fixtures import CNN_FIXTURES, PROBLEM_PRESETS, builtin_fixture, fixture_names, preset_problem
from .harness import FORMATS, ExperimentConfig, emit_report, run_experiment
from .latency import EvalConventions, Placement, check_feasibility, evaluate
from .linearize import linearize
from .model import validate_problem
from .problem_file import dump_json, load_problem, problem_to_dict
from .scenario import TRANSMISSION_PROFILES, ScenarioParams, generate
from .solver import METHODS, SolverConfig, solve

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _err(msg):
    print(f"layerplace: {msg}", file=sys.stderr)


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def parse_L_values(text):
    """``"1..4,C"`` -> ``[1, 2, 3, 4, "C"]``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.upper() == "C":
            out.append("C")
        elif ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out or any(v != "C" and v < 1 for v in out):
        raise argparse.ArgumentTypeError(f"bad L list {text!r}")
    return out


def _csv(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_conventions(p):
    g = p.add_argument_group("evaluation conventions")
    g.add_argument("--paper-compat", action="store_true",
                   help="weight layer j's compute by the next layer's reach probability, drop the last "
                        "layer's compute, and treat KB payloads as kilobits (compat mode)")
    g.add_argument("--no-processing", action="store_true", help="transmission-only objective")


def _conventions(args, base=None):
    base = base or EvalConventions()
    if args.paper_compat:
        base = EvalConventions.paper_compat(base.include_processing)
    if args.no_processing:
        base = dataclasses.replace(base, include_processing=False)
    return base


def _add_problem_overrides(p):
    p.add_argument("--L", type=int, help="max layers per unit (overrides the file)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rate", type=float, help="data rate in bits/s (overrides the file)")
    g.add_argument("--profile", choices=sorted(TRANSMISSION_PROFILES), help="named radio profile")


def _load(args):
    problem = load_problem(args.problem)
    changes = {"eval_conventions": _conventions(args, problem.eval_conventions)}
    if args.L is not None:
        changes["layers_per_unit_cap"] = args.L
    if args.rate is not None:
        changes["data_rate_bits_per_s"] = args.rate
    elif args.profile:
        changes["data_rate_bits_per_s"] = TRANSMISSION_PROFILES[args.profile][0]
    return validate_problem(problem.replace(**changes))


def _add_solver(p, default="branch_and_bound"):
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=METHODS, default=default)
    g.add_argument("--seed", type=int, default=0, help="tie-breaking and heuristic seed (default 0)")
    g.add_argument("--time-budget", type=float, help="seconds")
    g.add_argument("--max-nodes", type=_positive_int, help="branch-and-bound node limit")
    g.add_argument("--restarts", type=_positive_int, default=8, help="local-search restarts (default 8)")


def _solver_config(args):
    return SolverConfig(method=args.method, seed=args.seed, time_budget=args.time_budget,
                        max_nodes=args.max_nodes, restarts=args.restarts)


def cmd_solve(args):
    problem = _load(args)
    sol = solve(problem, _solver_config(args))
    if not sol.proven_optimal and args.method != "local_search":
        _err("budget exhausted; reporting the best placement found, optimality not proven")
    doc = sol.to_document(problem, include_timing=args.timing)
    doc["seed"] = args.seed
    _write(dump_json(doc), args.output)
    return EXIT_OK


def cmd_evaluate(args):
    problem = _load(args)
    with open(args.placement) as fh:
        placement = Placement.from_document(json.load(fh), problem)
    unknown = sorted({unit for _, unit in placement.items() if unit not in problem.unit_ids})
    if unknown:
        raise ValidationError([f"placement uses unknown units: {', '.join(unknown)}"])
    violations = check_feasibility(placement, problem)
    doc = {"feasible": not violations, "violations": [str(v) for v in violations]}
    doc["breakdown"] = evaluate(placement, problem).to_record()
    _write(dump_json(doc), args.output)
    for v in violations:
        _err(f"violation: {v}")
    return EXIT_INFEASIBLE if violations else EXIT_OK


def cmd_generate(args):
    params = ScenarioParams.from_names(args.mix, args.profile, n_units=args.n_units,
                                       n_sources=args.sources, area_side=args.area)
    conv = _conventions(args)
    problem = generate(params, args.cnn, args.L, args.seed, conventions=conv)
    doc = problem_to_dict(problem, seed=args.seed, mix=args.mix, profile=args.profile)
    _write(dump_json(doc), args.output)
    return EXIT_OK


def cmd_bench(args):
    config = ExperimentConfig(
        cnns=tuple(args.cnn), L_values=tuple(args.L), profiles=tuple(args.profile),
        mixes=tuple(args.mix), conventions=_conventions(args), trials=args.trials, seed=args.seed,
        solver=SolverConfig(method=args.method, seed=args.seed, restarts=args.restarts,
                            time_budget=args.time_budget),
        n_units=args.n_units, workers=args.workers)
    rows = run_experiment(config)
    failures = sum(r.failures for r in rows)
    if failures:
        _err(f"{failures} trial solves failed and were excluded from the moments")
    _write(emit_report(rows, args.format), args.output)
    return EXIT_OK


def cmd_fixtures(args):
    if not args.name:
        names = fixture_names() + sorted(PROBLEM_PRESETS)
        _write("".join(n + "\n" for n in names), args.output)
        return EXIT_OK
    if args.name in PROBLEM_PRESETS:
        overrides = {"L": args.L} if args.L is not None else {}
        _write(dump_json(problem_to_dict(preset_problem(args.name, **overrides))), args.output)
        return EXIT_OK
    _write(dump_json(builtin_fixture(args.name).to_dict()), args.output)
    return EXIT_OK


def cmd_export_lp(args):
    problem = _load(args)
    model = linearize(problem, sharing_mode=args.sharing_mode, prune=args.prune)
    _write(model.to_lp(), args.output)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="layerplace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("solve", help="find a minimum-latency placement")
    p.add_argument("problem", help="problem JSON file")
    _add_problem_overrides(p)
    _add_solver(p)
    _add_conventions(p)
    p.add_argument("--timing", action="store_true", help="include wall time in stats (not reproducible)")
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="latency breakdown and constraint check of a given placement")
    p.add_argument("problem", help="problem JSON file")
    p.add_argument("placement", help="placement JSON (as printed by solve, or a list of unit lists)")
    _add_problem_overrides(p)
    _add_conventions(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="random connected problem instance")
    p.add_argument("--cnn", action="append", choices=CNN_FIXTURES,
                   help="CNN fixture; repeat for several CNNs (default cnn5)")
    p.add_argument("--L", type=_positive_int, default=1)
    p.add_argument("--n-units", type=_positive_int, default=30)
    p.add_argument("--sources", type=_positive_int, default=1)
    p.add_argument("--area", type=float, default=30.0, help="side of the square in m")
    p.add_argument("--mix", default="50-50", help="STM32H7-Raspberry percentages, e.g. 10-90")
    p.add_argument("--profile", default="wifi4", choices=sorted(TRANSMISSION_PROFILES))
    p.add_argument("--seed", type=int, default=0)
    _add_conventions(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="Monte-Carlo experiment over random layouts")
    p.add_argument("--cnn", type=_csv, default=["cnn5"], help="comma-separated CNN fixtures")
    p.add_argument("--mix", type=_csv, default=["50-50"], help="comma-separated mixes")
    p.add_argument("--profile", type=_csv, default=["wifi4"], help="comma-separated radio profiles")
    p.add_argument("--L", type=parse_L_values, default=[1, 2, 3, 4, "C"],
                   help="L values, e.g. 1..4,C where C means all layers (default)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--n-units", type=_positive_int, default=30)
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--method", choices=METHODS, default="local_search")
    p.add_argument("--restarts", type=_positive_int, default=8)
    p.add_argument("--time-budget", type=float, help="seconds per solve")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=_positive_int, default=1)
    _add_conventions(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixtures", help="list built-in fixtures or print one as JSON")
    p.add_argument("name", nargs="?")
    p.add_argument("--L", type=_positive_int, help="L for problem presets")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("export-lp", help="write the linearized model in LP format")
    p.add_argument("problem")
    _add_problem_overrides(p)
    _add_conventions(p)
    p.add_argument("--sharing-mode", choices=("substitute", "equality"), default="substitute")
    p.add_argument("--prune", choices=("edge", "all", "none"), default="edge")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_lp)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "generate" and not args.cnn:
        args.cnn = ["cnn5"]
    if args.command == "bench":
        if args.trials < 1:
            _err(f"--trials must be >= 1, got {args.trials}")
            return EXIT_INVALID
        if args.cnn and any(c not in CNN_FIXTURES for c in args.cnn):
            _err(f"unknown CNN in --cnn; choose from {', '.join(CNN_FIXTURES)}")
            return EXIT_INVALID
    try:
        return args.func(args)
    except ValidationError as exc:
        for line in exc.errors:
            _err(line)
        return EXIT_INVALID
    except NoPlacementFound as exc:
        _err(f"no placement found: {exc}")
        return EXIT_INFEASIBLE
    except Infeasible as exc:
        _err(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    except BudgetExceeded as exc:
        _err(f"budget exceeded: {exc}")
        return EXIT_BUDGET
    except (OSError, ValueError, KeyError, PlacementError) as exc:
        _err(str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
