"""Monte-Carlo runs over random layouts, aggregated as mean and sample std per configuration.

Trial ``k`` of an experiment with master seed ``s`` draws its layout from
``numpy.random.SeedSequence([s, k])``. The same layouts are therefore reused
for every L value, radio profile and device mix, which makes comparisons
between rows paired rather than independent.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import BudgetExceeded, Infeasible, UnsupportedFormat
from .latency import EvalConventions
from .scenario import ScenarioParams, generate
from .solver import SolverConfig, solve

FORMATS = ("csv", "json", "markdown")
CSV_COLUMNS = ("mix", "L", "profile", "mode", "t_t_mean", "t_t_std", "t_p_mean", "t_p_std",
               "t_mean", "t_std", "trials", "failures")


@dataclass(frozen=True)
class ExperimentConfig:
    cnns: tuple = ("cnn5",)
    sharing: tuple = ()
    mode: str | None = None
    L_values: tuple = (1, 2, 3, 4, "C")
    profiles: tuple = ("wifi4",)
    mixes: tuple = ("50-50",)
    conventions: EvalConventions = field(default_factory=EvalConventions)
    trials: int = 100
    seed: int = 0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(method="local_search"))
    n_units: int = 30
    area_side: float = 30.0
    workers: int = 1

    def __post_init__(self):
        for name in ("cnns", "sharing", "L_values", "profiles", "mixes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.mode is None:
            object.__setattr__(self, "mode", "+".join(self.cnns) + ("/shared" if self.sharing else ""))
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        for L in self.L_values:
            if L != "C" and not (isinstance(L, int) and L >= 1):
                raise ValueError(f"L values must be positive integers or 'C', got {L!r}")
        if not self.cnns:
            raise ValueError("at least one CNN is required")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class AggregateRow:
    mix: str
    L: str
    profile: str
    mode: str
    t_t_mean: float
    t_t_std: float
    t_p_mean: float
    t_p_std: float
    t_mean: float
    t_std: float
    trials: int
    failures: int


def resolve_L(L, problem):
    return problem.total_layers if L == "C" else int(L)


def trial_problem(config, mix, profile, trial, L=1):
    """The problem solved in one trial, for reproducing a harness result in isolation."""
    params = ScenarioParams.from_names(mix, profile, n_units=config.n_units, area_side=config.area_side)
    problem = generate(params, config.cnns, 1, np.random.SeedSequence([config.seed, trial]),
                       config.sharing, config.conventions)
    return problem.replace(layers_per_unit_cap=resolve_L(L, problem))


def _run_trial(args):
    config, mix, profile, trial = args
    base = trial_problem(config, mix, profile, trial)
    out = {}
    for L in config.L_values:
        problem = base.replace(layers_per_unit_cap=resolve_L(L, base))
        try:
            sol = solve(problem, config.solver)
        except (Infeasible, BudgetExceeded):
            out[str(L)] = None
            continue
        b = sol.breakdown
        out[str(L)] = (b.t_t * 1e3, b.t_p * 1e3, b.t * 1e3)
    return trial, out


def _moments(values):
    if not values:
        return math.nan, math.nan
    a = np.asarray(values)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


def run_experiment(config):
    """One AggregateRow per (mix, profile, L), in that nesting order."""
    rows = []
    for mix in config.mixes:
        for profile in config.profiles:
            jobs = [(config, mix, profile, k) for k in range(config.trials)]
            if config.workers > 1:
                with ProcessPoolExecutor(config.workers) as pool:
                    results = dict(pool.map(_run_trial, jobs))
            else:
                results = dict(map(_run_trial, jobs))
            for L in config.L_values:
                per = [results[k][str(L)] for k in range(config.trials)]
                ok = [r for r in per if r is not None]
                cols = list(zip(*ok)) if ok else ([], [], [])
                t_t, t_p, t = (_moments(list(c)) for c in cols)
                rows.append(AggregateRow(mix, str(L), profile, config.mode, *t_t, *t_p, *t,
                                         config.trials, len(per) - len(ok)))
    return rows


def _fmt(x):
    return "nan" if math.isnan(x) else f"{x:.2f}"


def emit_report(rows, format="csv"):
    if format not in FORMATS:
        raise UnsupportedFormat(f"unknown report format {format!r}; expected one of {FORMATS}")
    if not rows:
        raise ValueError("no rows to report")
    if format == "json":
        return json.dumps({"rows": [asdict(r) for r in rows]}, indent=2, sort_keys=True) + "\n"
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in (getattr(r, c) for c in CSV_COLUMNS)])
        return buf.getvalue()
    return _markdown(rows)


def _markdown(rows):
    out = []
    groups = {}
    for r in rows:
        groups.setdefault((r.mode, r.profile), []).append(r)
    for (mode, profile), rs in groups.items():
        mixes = list(dict.fromkeys(r.mix for r in rs))
        Ls = list(dict.fromkeys(r.L for r in rs))
        cell = {(r.L, r.mix): r for r in rs}
        out.append(f"### {mode}, {profile}")
        out.append("")
        head = ["L"] + [f"{m} {k}" for m in mixes for k in ("t_t [ms]", "t_p [ms]", "t [ms]")]
        out.append("| " + " | ".join(head) + " |")
        out.append("|" + "---|" * len(head))
        for L in Ls:
            line = [L]
            for m in mixes:
                r = cell.get((L, m))
                if r is None:
                    line += ["", "", ""]
                    continue
                for mean, std in ((r.t_t_mean, r.t_t_std), (r.t_p_mean, r.t_p_std), (r.t_mean, r.t_std)):
                    line.append(f"{_fmt(mean)} ± {_fmt(std)}")
            out.append("| " + " | ".join(line) + " |")
        out.append("")
    return "\n".join(out)


def rows_from_json(text):
    names = {f.name for f in fields(AggregateRow)}
    return [AggregateRow(**{k: v for k, v in d.items() if k in names}) for d in json.loads(text)["rows"]]
