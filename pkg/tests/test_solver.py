import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layerplace import (BudgetExceeded, CnnSpec, DeviceClass, EvalConventions, Infeasible, LayerSpec,
                        NoPlacementFound, Placement, PlacementProblem, Topology, Vertex, check_feasibility,
                        evaluate)
from layerplace.fixtures import FIG1C_PLACEMENT, fig1b_problem, preset_problem
from layerplace.latency import PAPER_COMPAT
from layerplace.scenario import random_small_problem
from layerplace.solver import SolverConfig, solve, solve_branch_and_bound, solve_exhaustive, solve_local_search

NO_PROC = EvalConventions(include_processing=False)


def path_problem(cnn, classes, L, edges=None, conv=None):
    """Units a, b (, c ...) on a path s - a - b - ... - f."""
    names = list(classes)
    verts = [Vertex("s", "source"), Vertex("f", "sink")] + [Vertex(u, "unit") for u in names]
    chain = ["s"] + names + ["f"]
    edges = edges or list(zip(chain, chain[1:]))
    return PlacementProblem([cnn], ["s"], Topology.from_edges(verts, edges), classes, L, 1e6,
                            eval_conventions=conv or EvalConventions())


def layers(*mem):
    return [LayerSpec(f"L{j + 1}", m, 1.0, 2.0) for j, m in enumerate(mem)]


def brute_force(problem):
    """Independent oracle: itertools over full placements, scalar evaluate and check_feasibility."""
    best = None
    for combo in itertools.product(problem.unit_ids, repeat=problem.total_layers):
        rows, k = [], 0
        for cnn in problem.cnns:
            rows.append(combo[k:k + cnn.n_layers])
            k += cnn.n_layers
        placement = Placement(rows)
        if check_feasibility(placement, problem):
            continue
        t = evaluate(placement, problem).t
        if best is None or t < best:
            best = t
    return best


def test_single_roomy_unit_takes_everything():
    cnn = CnnSpec("c", 3.0, layers(1, 1))
    problem = path_problem(cnn, {"a": DeviceClass("big", 100, 10)}, 2)
    sol = solve_exhaustive(problem)
    assert sol.placement == Placement([["a", "a"]])
    b = sol.breakdown
    assert b.t_inter == 0
    assert sol.objective == pytest.approx(b.t_s + b.t_p + b.t_f, rel=1e-15)


def test_two_units_split_follows_the_path():
    cnn = CnnSpec("c", 3.0, layers(1, 1))
    dc = DeviceClass("d", 100, 10)
    problem = path_problem(cnn, {"a": dc, "b": dc}, 1)
    sol = solve_exhaustive(problem)
    both = [evaluate(Placement([p]), problem).t for p in (("a", "b"), ("b", "a"))]
    assert sol.placement == Placement([["a", "b"]])
    assert sol.objective == min(both) < max(both)


def test_fig1b_transmission_only_optimum_not_worse_than_published():
    for conv in (NO_PROC, EvalConventions(), PAPER_COMPAT,
                 EvalConventions.paper_compat(include_processing=False)):
        problem = fig1b_problem(conventions=conv)
        published = Placement([FIG1C_PLACEMENT])
        assert check_feasibility(published, problem) == []
        assert solve_exhaustive(problem).objective <= evaluate(published, problem).t


@pytest.mark.parametrize("seed", range(200))
def test_branch_and_bound_matches_exhaustive(seed):
    problem = random_small_problem(seed)
    try:
        ex = solve_exhaustive(problem, SolverConfig(method="exhaustive", seed=seed))
    except Infeasible:
        with pytest.raises(Infeasible):
            solve_branch_and_bound(problem, SolverConfig(seed=seed))
        return
    bb = solve_branch_and_bound(problem, SolverConfig(seed=seed))
    assert bb.objective == ex.objective
    assert bb.placement == ex.placement
    assert bb.proven_optimal and ex.proven_optimal


@pytest.mark.parametrize("seed", range(0, 200, 10))
def test_exhaustive_matches_itertools_oracle(seed):
    problem = random_small_problem(seed, max_space=5000)
    oracle = brute_force(problem)
    if oracle is None:
        with pytest.raises(Infeasible):
            solve_exhaustive(problem)
    else:
        assert solve_exhaustive(problem).objective == pytest.approx(oracle, rel=1e-12)


def test_layer_with_one_host_is_fixed_at_depth_one():
    cnn = CnnSpec("c", 3.0, layers(50, 1, 1))
    small, big = DeviceClass("small", 10, 10), DeviceClass("big", 100, 10)
    problem = path_problem(cnn, {"a": small, "b": big, "c": small}, 3)
    sol = solve_branch_and_bound(problem)
    assert sol.stats["nodes_per_depth"][0] == 1
    assert sol.stats["nodes_per_depth"][1] == 1
    assert sol.placement.unit(0, 0) == "b"


def test_uniform_devices_zero_payloads_closed_form():
    cnn = CnnSpec("c", 4.0, [LayerSpec(f"L{j}", 1, c, 0.0) for j, c in enumerate((2.0, 3.0, 5.0))],
                  final_out_kb=1.0)
    dc = DeviceClass("d", 100, 20)
    problem = path_problem(cnn, {u: dc for u in ("a", "b", "c")}, 3)
    scale = 8000 / problem.data_rate_bits_per_s
    topo = problem.topology
    # free transfers decouple the first and last layer: each end picks its own best unit
    t_s = min(4.0 * scale * topo.hops("s", u) for u in ("a", "b", "c"))
    t_f = min(1.0 * scale * topo.hops(u, "f") for u in ("a", "b", "c"))
    sol = solve_branch_and_bound(problem)
    assert sol.objective == pytest.approx(10.0 / 20 + t_s + t_f, rel=1e-12)
    # with source and sink on the same unit's doorstep a single-unit placement is optimal
    star = path_problem(cnn, {u: dc for u in ("a", "b", "c")}, 3,
                        edges=[("s", "a"), ("a", "f"), ("a", "b"), ("b", "c")])
    single = evaluate(Placement([["a"] * 3]), star).t
    assert solve_branch_and_bound(star).objective == pytest.approx(single, rel=1e-12)


def test_local_search_quality_against_oracle():
    ratios, seen = [], 0
    for seed in range(100):
        problem = random_small_problem(seed)
        try:
            best = solve_exhaustive(problem).objective
        except Infeasible:
            continue
        seen += 1
        try:
            sol = solve_local_search(problem, SolverConfig(method="local_search", seed=seed))
        except NoPlacementFound:
            ratios.append(np.inf)
            continue
        assert sol.objective >= best * (1 - 1e-12)
        assert not sol.proven_optimal
        ratios.append(sol.objective / best)
    assert seen > 50
    assert np.mean(np.array(ratios) <= 1.2) >= 0.9


def test_local_search_finds_the_only_placement():
    cnn = CnnSpec("c", 3.0, layers(50, 20, 5))
    classes = {"a": DeviceClass("a", 5, 1), "b": DeviceClass("b", 50, 1), "c": DeviceClass("c", 20, 1)}
    problem = path_problem(cnn, classes, 1)
    sol = solve_local_search(problem)
    assert sol.placement == Placement([["b", "c", "a"]])


def test_local_search_deterministic():
    problem = fig1b_problem(("cnn5", "gc6"), L=2)
    cfg = SolverConfig(method="local_search", seed=11)
    a, b = solve(problem, cfg), solve(problem, cfg)
    assert a.objective == b.objective
    assert a.to_document(problem) == b.to_document(problem)


def test_infeasible_instance():
    cnn = CnnSpec("c", 3.0, layers(500))
    problem = path_problem(cnn, {"a": DeviceClass("a", 10, 1)}, 1)
    with pytest.raises(Infeasible):
        solve_exhaustive(problem)
    with pytest.raises(Infeasible):
        solve_branch_and_bound(problem)
    with pytest.raises(NoPlacementFound):
        solve_local_search(problem)


def test_budgets():
    problem = fig1b_problem(("gc6",))
    with pytest.raises(BudgetExceeded):
        solve_exhaustive(problem, SolverConfig(method="exhaustive", max_assignments=1000))
    with pytest.raises(BudgetExceeded):
        solve_branch_and_bound(problem, SolverConfig(max_nodes=1))
    full = solve_branch_and_bound(problem)
    partial = solve_branch_and_bound(problem, SolverConfig(max_nodes=full.stats["nodes"] // 2))
    assert not partial.proven_optimal
    assert partial.objective >= full.objective
    assert check_feasibility(partial.placement, problem) == []


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="simplex")
    with pytest.raises(ValueError):
        SolverConfig(time_budget=0)
    with pytest.raises(ValueError):
        SolverConfig(restarts=0)


def test_shared_layers_co_located_on_fig1b():
    problem = preset_problem("fig1b-two-cnn5-shared")
    for method in ("branch_and_bound", "local_search"):
        sol = solve(problem, SolverConfig(method=method))
        rows = sol.placement.units
        assert rows[0][:2] == rows[1][:2]
        assert check_feasibility(sol.placement, problem) == []


def test_two_cnns_without_sharing_each_take_a_single_cnn_optimum():
    single = solve_branch_and_bound(fig1b_problem(conventions=NO_PROC)).objective
    double = solve_branch_and_bound(fig1b_problem(("cnn5", "cnn5"), conventions=NO_PROC))
    # disjoint optimal paths exist, so the pair costs exactly twice the single optimum
    assert double.objective == pytest.approx(2 * single, rel=1e-12)
    assert check_feasibility(double.placement, fig1b_problem(("cnn5", "cnn5"))) == []


def test_solution_document_is_reproducible(fig1b_cnn5):
    sol = solve(fig1b_cnn5)
    doc = sol.to_document(fig1b_cnn5)
    assert "elapsed_s" not in doc["stats"]
    assert "elapsed_s" in sol.to_document(fig1b_cnn5, include_timing=True)["stats"]
    assert doc == solve(fig1b_cnn5).to_document(fig1b_cnn5)


@settings(max_examples=50)
@given(st.integers(0, 100_000), st.sampled_from(["exhaustive", "branch_and_bound", "local_search"]))
def test_solutions_are_feasible_and_objective_exact(seed, method):
    problem = random_small_problem(seed, max_space=20_000)
    try:
        sol = solve(problem, SolverConfig(method=method, seed=seed))
    except Infeasible:
        return
    assert check_feasibility(sol.placement, problem) == []
    assert sol.objective == evaluate(sol.placement, problem).t
    for group in problem.sharing:
        assert len({sol.placement.unit(u, j) for u, j in group.members}) == 1


@settings(max_examples=50)
@given(st.integers(0, 100_000))
def test_optimum_non_increasing_in_L(seed):
    base = random_small_problem(seed, max_space=20_000)
    previous = np.inf
    for L in range(1, 6):
        try:
            value = solve_branch_and_bound(base.replace(layers_per_unit_cap=L)).objective
        except Infeasible:
            value = np.inf
        assert value <= previous * (1 + 1e-12)
        previous = value


@settings(max_examples=30)
@given(st.integers(0, 100_000))
def test_adding_a_unit_never_hurts(seed):
    problem = random_small_problem(seed, max_units=5, max_space=20_000)
    try:
        before = solve_branch_and_bound(problem).objective
    except Infeasible:
        return
    topo = problem.topology
    twin = topo.vertices[topo.index(problem.unit_ids[0])]
    verts = list(topo.vertices) + [Vertex("extra", "unit", twin.x, twin.y)]
    bigger = Topology.from_positions(verts, topo.range)
    classes = {**problem.unit_classes, "extra": DeviceClass("fast", 1e9, 1e9)}
    after = solve_branch_and_bound(problem.replace(topology=bigger, unit_classes=classes)).objective
    assert after <= before * (1 + 1e-12)


@settings(max_examples=40)
@given(st.integers(0, 100_000), st.floats(0.1, 10))
def test_rate_scaling_keeps_the_argmin(seed, lam):
    problem = random_small_problem(seed, max_space=20_000).replace(eval_conventions=NO_PROC)
    try:
        a = solve_exhaustive(problem, SolverConfig(method="exhaustive", seed=seed))
    except Infeasible:
        return
    scaled = problem.replace(data_rate_bits_per_s=problem.data_rate_bits_per_s * lam)
    b = solve_exhaustive(scaled, SolverConfig(method="exhaustive", seed=seed))
    assert b.placement == a.placement
    assert b.objective == pytest.approx(a.objective / lam, rel=1e-12)


@settings(max_examples=150)
@given(st.integers(0, 10**6), st.booleans())
def test_direct_slot_tables_match_linear_model(seed, compat):
    from layerplace.linearize import linearize
    from layerplace.solver import slot_tables
    p = random_small_problem(seed, conventions=PAPER_COMPAT if compat else None)
    model = linearize(p)
    unary, edges = model.cost_tables()
    _, demand, capacity = model.resource_tables()
    u2, e2, d2, c2 = slot_tables(p)
    assert np.array_equal(unary, u2)
    assert np.array_equal(demand, d2) and np.array_equal(capacity, c2)
    assert [(a, b) for a, b, _ in edges] == [(a, b) for a, b, _, _ in e2]
    for (_, _, W), (_, _, W2, _) in zip(edges, e2):
        assert np.array_equal(W, W2)
