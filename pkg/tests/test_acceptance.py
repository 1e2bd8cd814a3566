"""Acceptance suite: eight criteria, one PASS/FAIL line each.

Run under pytest (``pytest tests/test_acceptance.py -v -s``) or directly
(``python3 tests/test_acceptance.py``). Each check collects every failed
condition so a FAIL line says what broke.
"""

import itertools
import math
import os
import subprocess
import sys
import tempfile
import time

import numpy as np
import pytest

from layerplace import (EvalConventions, GateProfile, Infeasible, PAPER_COMPAT, Placement, PlacementProblem,
                        Topology, Vertex, builtin_fixture, check_feasibility, derive_exit_probabilities,
                        evaluate)
from layerplace.fixtures import FIG1C_PLACEMENT, fig1b_problem
from layerplace.harness import ExperimentConfig, run_experiment
from layerplace.latency import (AS_WRITTEN, BITS_EXACT, BYTES_AS_BITS_COMPAT, NEXT_LAYER_COMPAT, evaluate_many,
                                feasible_many)
from layerplace.linearize import (induced_assignment_many, linear_objective_many, linearize,
                                  quadratic_objective_many, rows_satisfied_many)
from layerplace.scenario import random_small_problem
from layerplace.solver import SolverConfig, solve, solve_branch_and_bound, solve_exhaustive

WIFI4 = 72.2e6
RASPBERRY_SPEED = 560.0

# compute per layer (Mmul) typed in by hand, independent of the fixture module
COMPUTE = {
    "cnn5": [3.76 + 0.05, 20.07 + 0.01, 1.20, 0.07, 0.002],
    "gc6": [3.76 + 0.05, 4.89, 20.07 + 0.01, 1.20, 0.07, 0.002],
    "alexnet": [105.42 + 0.31, 223.95 + 0.39, 149.52, 112.14, 74.76 + 0.08, 37.75, 16.78],
}
COMPUTE["gc-alexnet"] = COMPUTE["alexnet"][:2] + [5.55] + COMPUTE["alexnet"][2:]
REACH = {"cnn5": [1] * 5, "gc6": [1, 1] + [0.01] * 4, "alexnet": [1] * 7, "gc-alexnet": [1, 1, 1] + [0.01] * 5}
EXPECTED_COMPAT = {"cnn5": 44.93, "gc6": 7.27, "alexnet": 1257.71, "gc-alexnet": 596.19}
EXPECTED_AS_WRITTEN = {"cnn5": 44.93, "gc6": 15.92, "alexnet": 1287.68, "gc-alexnet": 606.31}

ALL_CONVENTIONS = [EvalConventions(w, proc, unit) for w in (AS_WRITTEN, NEXT_LAYER_COMPAT)
                   for proc in (True, False) for unit in (BITS_EXACT, BYTES_AS_BITS_COMPAT)]


class Criterion:
    def __init__(self):
        self.failures = []

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)


def _one_raspberry(cnn, conventions):
    topo = Topology.from_positions([Vertex("s", "source", 0, 0), Vertex("f", "sink", 0, 0),
                                    Vertex("n01", "unit", 1, 0)], 2.0)
    return PlacementProblem([cnn], ["s"], topo, {"n01": builtin_fixture("raspberry-3bp")}, cnn.n_layers, WIFI4,
                            eval_conventions=conventions)


def _processing_ms(name, conventions):
    cnn = builtin_fixture(name)
    return evaluate(Placement([["n01"] * cnn.n_layers]), _one_raspberry(cnn, conventions)).t_p * 1e3


def criterion_1(c):
    """Compat processing times on a Raspberry-class unit."""
    for name, expected in EXPECTED_COMPAT.items():
        comp, p = COMPUTE[name], REACH[name]
        oracle = sum(p[j + 1] * comp[j] for j in range(len(comp) - 1)) / RASPBERRY_SPEED * 1e3
        got = _processing_ms(name, PAPER_COMPAT)
        c.check(abs(oracle - expected) <= 0.01, f"{name}: oracle {oracle:.4f} vs {expected}")
        c.check(abs(got - expected) <= 0.01, f"{name}: evaluated {got:.4f} vs {expected}")
        c.check(math.isclose(got, oracle, rel_tol=1e-12), f"{name}: evaluated {got!r} vs oracle {oracle!r}")


def criterion_2(c):
    """As-written processing times on a Raspberry-class unit."""
    for name, expected in EXPECTED_AS_WRITTEN.items():
        oracle = sum(pj * cj for pj, cj in zip(REACH[name], COMPUTE[name])) / RASPBERRY_SPEED * 1e3
        got = _processing_ms(name, EvalConventions())
        c.check(abs(oracle - expected) <= 0.01, f"{name}: oracle {oracle:.4f} vs {expected}")
        c.check(abs(got - expected) <= 0.01, f"{name}: evaluated {got:.4f} vs {expected}")
        c.check(math.isclose(got, oracle, rel_tol=1e-12), f"{name}: evaluated {got!r} vs oracle {oracle!r}")


def criterion_3(c):
    """Exit probabilities of the gate profile."""
    g = derive_exit_probabilities([1, 1, 0.01, 0.01, 0.01, 0.01])
    expected = [0, 0.99, 0, 0, 0, 0.01]
    c.check(len(g) == 6 and all(abs(a - b) <= 1e-12 for a, b in zip(g, expected)), f"g = {g}")


def criterion_4(c):
    """Example network: distances, feasibility facts and optimum vs the reference placement."""
    start = time.perf_counter()
    problem = fig1b_problem(L=1)
    topo = problem.topology
    c.check(topo.hops("n04", "f") == 2, f"d(n04, f) = {topo.hops('n04', 'f')}")
    ref = Placement([list(FIG1C_PLACEMENT)])
    violations = check_feasibility(ref, problem)
    c.check(not violations, f"reference placement infeasible: {violations}")
    # L3 alone on an STM32H7 unit must break its memory cap, whatever the layer cap
    roomy = problem.replace(layers_per_unit_cap=5)
    stm = [uid for uid in problem.unit_ids if problem.unit_classes[uid].name == "stm32h7"]
    c.check(len(stm) == 7, f"expected 7 STM32H7 units, got {stm}")
    for uid in stm:
        units = ["n03"] * 5
        units[2] = uid
        kinds = {(v.kind, v.unit) for v in check_feasibility(Placement([units]), roomy)}
        c.check(("memory", uid) in kinds, f"L3 on {uid} not flagged for memory: {kinds}")
    for conv in ALL_CONVENTIONS:
        p = problem.replace(eval_conventions=conv)
        best = solve_exhaustive(p).objective
        ref_t = evaluate(ref, p).t
        c.check(best <= ref_t * (1 + 1e-12), f"{conv}: optimum {best} > reference {ref_t}")
    elapsed = time.perf_counter() - start
    c.check(elapsed < 1.0, f"took {elapsed:.2f} s")


def _oracle_instances():
    """200 instances, balanced across the sharing and gate combinations."""
    combos = list(itertools.product((False, True), (False, True)))
    for seed in range(200):
        share, gated = combos[seed % 4]
        yield seed, random_small_problem(10_000 + seed, sharing=share, gates=gated, max_cnns=2,
                                         max_units=6, max_layers=4)


def criterion_5(c):
    """Branch-and-bound equals exhaustive; linear objective equals quadratic objective."""
    start = time.perf_counter()
    feasible_count = 0
    for seed, problem in _oracle_instances():
        try:
            ex = solve_exhaustive(problem)
        except Infeasible:
            try:
                solve_branch_and_bound(problem)
                c.check(False, f"seed {seed}: branch-and-bound found a placement, exhaustive did not")
            except Infeasible:
                pass
            continue
        feasible_count += 1
        bb = solve_branch_and_bound(problem)
        c.check(bb.objective == ex.objective, f"seed {seed}: bb {bb.objective!r} vs exhaustive {ex.objective!r}")
        N, S = len(problem.unit_ids), len(problem.slots)
        model = linearize(problem)
        for lo in range(0, N ** S, 20_000):
            A = np.stack(np.unravel_index(np.arange(lo, min(lo + 20_000, N ** S)), (N,) * S), axis=1)
            X = induced_assignment_many(model, A)
            ok = rows_satisfied_many(model, X)
            lin, quad = linear_objective_many(model, X)[ok], quadratic_objective_many(model, A)[ok]
            c.check(np.array_equal(lin, quad), f"seed {seed}: linear and quadratic objectives differ")
    c.check(feasible_count >= 100, f"only {feasible_count} feasible instances")
    elapsed = time.perf_counter() - start
    c.check(elapsed < 120, f"took {elapsed:.1f} s")


def criterion_6(c):
    """Invariants: feasibility, monotonicity in L, rate scaling, co-location, exit probabilities."""
    rng = np.random.default_rng(6)
    for seed in range(50):
        problem = random_small_problem(20_000 + seed, max_space=20_000)
        prev = math.inf
        for L in range(1, 6):
            p = problem.replace(layers_per_unit_cap=L)
            for method in ("branch_and_bound", "local_search"):
                try:
                    sol = solve(p, SolverConfig(method=method, seed=seed))
                except Infeasible:
                    continue
                c.check(not check_feasibility(sol.placement, p), f"seed {seed} L={L} {method}: infeasible output")
                for group in p.sharing:
                    hosts = {sol.placement.unit(u, j) for u, j in group.members}
                    c.check(len(hosts) == 1, f"seed {seed} L={L} {method}: shared layers split over {hosts}")
                if method == "branch_and_bound":
                    c.check(sol.objective <= prev * (1 + 1e-12), f"seed {seed}: optimum rose at L={L}")
                    prev = sol.objective

        # transmission components scale as 1/rate; the argmin set is unchanged without processing
        p1 = problem.replace(eval_conventions=EvalConventions(include_processing=False))
        p3 = p1.replace(data_rate_bits_per_s=p1.data_rate_bits_per_s * 3)
        N, S = len(p1.unit_ids), len(p1.slots)
        A = np.stack(np.unravel_index(np.arange(N ** S), (N,) * S), axis=1)
        t1, t3 = evaluate_many(p1, A), evaluate_many(p3, A)
        c.check(np.allclose(t1, 3 * t3, rtol=1e-12, atol=0), f"seed {seed}: t_t not inversely proportional to rate")
        ok = feasible_many(p1, A)
        if ok.any():
            a1 = set(np.flatnonzero(ok & (t1 <= t1[ok].min() * (1 + 1e-9))))
            a3 = set(np.flatnonzero(ok & (t3 <= t3[ok].min() * (1 + 1e-9))))
            c.check(a1 == a3, f"seed {seed}: argmin set changed with rate")

    for k in range(1000):
        m = int(rng.integers(1, 12))
        reach = np.minimum.accumulate(np.concatenate([[1.0], rng.uniform(0, 1, m - 1)]))
        if rng.random() < 0.3:
            reach[rng.integers(0, m):] = 0.0
            reach[0] = 1.0
        g = derive_exit_probabilities(reach.tolist())
        c.check(abs(math.fsum(g) - 1.0) <= 1e-12 and min(g) >= 0, f"profile {k}: g sums to {math.fsum(g)!r}")
        GateProfile.from_reach(reach.tolist())


def criterion_7(c):
    """Monte-Carlo run: runtime, processing row, ordering of device mixes."""
    start = time.perf_counter()
    rows = run_experiment(ExperimentConfig(mixes=("50-50", "10-90", "90-10"), conventions=PAPER_COMPAT,
                                           trials=100, seed=0))
    elapsed = time.perf_counter() - start
    c.check(elapsed < 300, f"took {elapsed:.1f} s")
    by = {(r.mix, r.L): r for r in rows}
    row = by[("50-50", "C")]
    c.check(f"{row.t_p_mean:.2f}" == "44.93", f"L=C t_p mean {row.t_p_mean}")
    c.check(f"{row.t_p_std:.2f}" == "0.00", f"L=C t_p std {row.t_p_std}")
    c.check(all(r.failures == 0 for r in rows if r.mix == "50-50"), "failed trials in the 50-50 run")
    for L in ("1", "2", "3", "4", "C"):
        fast, slow = by[("10-90", L)], by[("90-10", L)]
        c.check(fast.t_mean < slow.t_mean, f"L={L}: 10-90 mean t {fast.t_mean} >= 90-10 mean t {slow.t_mean}")


def _cli(*argv):
    res = subprocess.run([sys.executable, "-m", "layerplace", *argv], capture_output=True)
    return res.returncode, res.stdout


def criterion_8(c):
    """Repeated CLI runs with the same seed give byte-identical output."""
    with tempfile.TemporaryDirectory() as tmp:
        problem = os.path.join(tmp, "p.json")
        placement = os.path.join(tmp, "sol.json")
        code, _ = _cli("generate", "--n-units", "12", "--seed", "5", "--L", "2", "-o", problem)
        c.check(code == 0, f"generate exited {code}")
        code, _ = _cli("solve", problem, "--seed", "3", "-o", placement)
        c.check(code == 0, f"solve exited {code}")
        commands = [
            ("generate", "--n-units", "12", "--seed", "5", "--L", "2"),
            ("fixtures", "fig1b-two-cnn5-shared"),
            ("solve", problem, "--method", "local_search", "--seed", "3"),
            ("solve", problem, "--method", "branch_and_bound", "--paper-compat", "--max-nodes", "200000"),
            ("evaluate", problem, placement),
            ("export-lp", problem),
            ("bench", "--trials", "4", "--n-units", "12", "--format", "json", "--seed", "9"),
            ("bench", "--trials", "4", "--n-units", "12", "--format", "csv", "--seed", "9", "--mix", "10-90,90-10"),
        ]
        for argv in commands:
            first, second = _cli(*argv), _cli(*argv)
            c.check(first[0] in (0, 2, 3), f"{' '.join(argv[:1])}: exit {first[0]}")
            c.check(first == second, f"{' '.join(argv)}: output differs between runs")
            c.check(len(first[1]) > 0, f"{' '.join(argv)}: empty output")


CRITERIA = [
    (1, "compat processing times", criterion_1),
    (2, "as-written processing times", criterion_2),
    (3, "exit probabilities", criterion_3),
    (4, "example network checks", criterion_4),
    (5, "oracle equivalence", criterion_5),
    (6, "invariant suites", criterion_6),
    (7, "monte-carlo structure", criterion_7),
    (8, "cli determinism", criterion_8),
]


def run_criterion(number):
    _, name, fn = CRITERIA[number - 1]
    c = Criterion()
    try:
        fn(c)
    except Exception as exc:  # an exception is a failure of the criterion, reported like the rest
        c.failures.append(f"{type(exc).__name__}: {exc}")
    line = f"criterion {number} {name}: {'FAIL' if c.failures else 'PASS'}"
    return line, c.failures


@pytest.mark.parametrize("number", [n for n, _, _ in CRITERIA], ids=[f"c{n}-{name.replace(' ', '-')}"
                                                                     for n, name, _ in CRITERIA])
def test_criterion(number, capsys):
    line, failures = run_criterion(number)
    with capsys.disabled():
        print(f"\n{line}")
        for f in failures[:10]:
            print(f"    {f}")
    assert not failures, "\n".join(failures[:10])


if __name__ == "__main__":
    failed = 0
    for n, _, _ in CRITERIA:
        line, failures = run_criterion(n)
        print(line, flush=True)
        for f in failures[:10]:
            print(f"    {f}")
        failed += bool(failures)
    sys.exit(1 if failed else 0)
