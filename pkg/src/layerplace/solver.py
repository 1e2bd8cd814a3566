"""Minimum-latency placement search.

Three methods share one tie-breaking rule. Units are ranked by a permutation
drawn from the seed, and among placements whose objective is within a
relative ``1e-9`` of the optimum the lexicographically smallest rank vector
(slot order) wins. Exhaustive enumeration and branch-and-bound therefore
return the same placement, while local search is a seeded heuristic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, Infeasible, NoPlacementFound
from .latency import evaluate, evaluate_many, feasible_many, placement_from_slots, processing_weights
from .linearize import linearize
from .model import validate_problem

METHODS = ("exhaustive", "branch_and_bound", "local_search")
TIE_REL_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    method: str = "branch_and_bound"
    seed: int = 0
    time_budget: float | None = None
    max_nodes: int | None = None
    max_assignments: int = 50_000_000
    restarts: int = 8
    rcl_fraction: float = 0.25

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ValueError("time_budget must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ValueError("max_nodes must be positive")


@dataclass
class Solution:
    placement: object
    objective: float
    proven_optimal: bool
    breakdown: object
    method: str
    stats: dict = field(default_factory=dict)

    def to_document(self, problem, include_timing=False):
        stats = dict(self.stats)
        if not include_timing:
            stats.pop("elapsed_s", None)
        return {
            "method": self.method,
            "proven_optimal": self.proven_optimal,
            "objective_ms": self.objective * 1e3,
            "breakdown": self.breakdown.to_record(),
            "placement": self.placement.to_document(problem),
            "stats": stats,
        }


def unit_ranks(n_units, seed):
    """Rank of each unit in the seed-shuffled tie-breaking order."""
    order = np.random.default_rng(seed).permutation(n_units)
    rank = np.empty(n_units, dtype=np.int64)
    rank[order] = np.arange(n_units)
    return order, rank


def _tol(best):
    return TIE_REL_TOL * abs(best) if np.isfinite(best) else 0.0


def _finish(problem, row, method, proven, stats, start):
    placement = placement_from_slots(row, problem)
    breakdown = evaluate(placement, problem)
    stats["elapsed_s"] = time.perf_counter() - start
    return Solution(placement, breakdown.t, proven, breakdown, method, stats)


def solve(problem, config=None):
    config = config or SolverConfig()
    return {
        "exhaustive": solve_exhaustive,
        "branch_and_bound": solve_branch_and_bound,
        "local_search": solve_local_search,
    }[config.method](problem, config)


def solve_exhaustive(problem, config=None, chunk=1 << 17):
    """Enumerate every slot assignment; the oracle for the exact methods."""
    config = config or SolverConfig(method="exhaustive")
    validate_problem(problem)
    start = time.perf_counter()
    S, N = len(problem.slots), len(problem.unit_ids)
    total = N ** S
    if total > config.max_assignments:
        raise BudgetExceeded(f"{total} assignments exceed max_assignments={config.max_assignments}")
    _, rank = unit_ranks(N, config.seed)
    best = np.inf
    cand_rows = np.empty((0, S), dtype=np.int64)
    cand_cost = np.empty(0)
    feasible = 0
    shape = (N,) * S
    for lo in range(0, total, chunk):
        if config.time_budget is not None and time.perf_counter() - start > config.time_budget:
            raise BudgetExceeded("exhaustive enumeration ran out of time")
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        A = np.stack(np.unravel_index(idx, shape), axis=1) if S else np.zeros((1, 0), dtype=np.int64)
        A = A[feasible_many(problem, A)]
        if not len(A):
            continue
        feasible += len(A)
        t = evaluate_many(problem, A)
        m = t.min()
        if m < best:
            best = m
        keep = t <= best + _tol(best)
        cand_rows = np.vstack([cand_rows, A[keep]])
        cand_cost = np.concatenate([cand_cost, t[keep]])
        live = cand_cost <= best + _tol(best)
        cand_rows, cand_cost = cand_rows[live], cand_cost[live]
    if not feasible:
        raise Infeasible("no assignment satisfies the layer, memory and compute constraints")
    keys = rank[cand_rows]
    pick = np.lexsort(keys.T[::-1])[0] if S else 0
    stats = {"assignments": int(total), "feasible": int(feasible), "ties": int(len(cand_rows) - 1)}
    return _finish(problem, cand_rows[pick], "exhaustive", True, stats, start)


def slot_tables(problem):
    """Slot-level tables straight from the problem, without building the linear model.

    Returns ``(unary, edges, demand, capacity)`` laid out like
    ``IlpModel.cost_tables`` and ``IlpModel.resource_tables``; ``edges`` holds
    ``(slot_a, slot_b, matrix, (cnn, layer))``.
    """
    conv = problem.eval_conventions
    topo = problem.topology
    units = list(problem.unit_ids)
    n, S = len(units), len(problem.slots)
    scale = conv.bits_per_kb / problem.data_rate_bits_per_s
    D = topo.distance_matrix(units, units)
    to_sink = topo.distance_matrix(units, [problem.sink])[:, 0]
    classes = [problem.unit_classes[x] for x in units]
    speed = np.array([dc.speed_mmul_per_s for dc in classes])
    unary = np.zeros((S, n))
    edges = []
    for u, cnn in enumerate(problem.cnns):
        p, g = cnn.gate.reach_prob, cnn.gate.exit_prob
        weights = processing_weights(cnn, conv)
        src = topo.distance_matrix([problem.sources[u]], units)[0]
        for j, layer in enumerate(cnn.layers):
            coef = np.zeros(n)
            if j == 0:
                coef = coef + p[0] * cnn.input_kb * scale * src
            if g[j] != 0.0:
                coef = coef + g[j] * cnn.final_out_kb * scale * to_sink
            if conv.include_processing:
                coef = coef + weights[j] * layer.compute_mmul / speed
            unary[problem.slot_of[(u, j)]] += coef
        for j in range(cnn.n_layers - 1):
            edge = p[j + 1] * cnn.layers[j].out_repr_kb * scale
            if edge != 0.0:
                edges.append((problem.slot_of[(u, j)], problem.slot_of[(u, j + 1)], edge * D, (u, j)))
    capped = any(dc.compute_cap_mmul is not None for dc in classes)
    demand = np.zeros((3, S))
    for s in range(S):
        layer = problem.slot_layer(s)
        demand[:, s] = (1.0, layer.memory_kb, layer.compute_mmul if capped else 0.0)
    capacity = np.array([[float(problem.layers_per_unit_cap)] * n,
                         [dc.mem_cap_kb for dc in classes],
                         [np.inf if dc.compute_cap_mmul is None else dc.compute_cap_mmul for dc in classes]])
    return unary, edges, demand, capacity


class _Tables:
    """Slot-level cost and resource tables, read off the linear model or computed directly."""

    def __init__(self, problem, from_model=True):
        if from_model:
            model = linearize(problem)
            self.unary, edges = model.cost_tables()
            _, self.demand, self.capacity = model.resource_tables()
            keys = sorted({(u, j) for u, j, _, _ in model.w.values()})
            owner = {key: W for key, (_, _, W) in zip(keys, edges)}
        else:
            self.unary, direct, self.demand, self.capacity = slot_tables(problem)
            edges = [(a, b, W) for a, b, W, _ in direct]
            owner = {key: W for _, _, W, key in direct}
        self.edges = edges
        self.S, self.N = self.unary.shape
        # edges that become fully determined when slot s is assigned (both ends <= s)
        self.closing = [[] for _ in range(self.S)]
        self.incident = [[] for _ in range(self.S)]
        for a, b, W in self.edges:
            self.closing[max(a, b)].append((a, b, W))
            self.incident[a].append((a, b, W))
            self.incident[b].append((a, b, W))
        # per-CNN chains for the relaxed lower bound; a shared slot's unary belongs to its first member
        self.chains = []
        for u, cnn in enumerate(problem.cnns):
            slots = [problem.slot_of[(u, j)] for j in range(cnn.n_layers)]
            owned = [problem.slots[s][0] == (u, j) for j, s in enumerate(slots)]
            mats = [owner.get((u, j)) for j in range(len(slots) - 1)]
            self.chains.append((slots, owned, mats))

    def cost(self, row):
        total = float(self.unary[np.arange(self.S), row].sum())
        for a, b, W in self.edges:
            total += W[row[a], row[b]]
        return total

    def fits(self, load, s, i):
        return bool(np.all(load[:, i] + self.demand[:, s] <= self.capacity[:, i]))


def _chain_bound(tables, row, assigned, load):
    """Lower bound on the full objective given a partial assignment.

    Each CNN chain is minimised independently by dynamic programming, with
    assigned layers pinned to their unit and free layers restricted to units
    that could still take them. Shared layers are decoupled across CNNs.
    """
    free_ok = np.all(load[:, None, :] + tables.demand[:, :, None] <= tables.capacity[:, None, :], axis=0)
    total = 0.0
    for slots, owned, mats in tables.chains:
        v = None
        for j in range(len(slots) - 1, -1, -1):
            s = slots[j]
            cost = tables.unary[s].copy() if owned[j] else np.zeros(tables.N)
            if assigned[s]:
                mask = np.zeros(tables.N, dtype=bool)
                mask[row[s]] = True
            else:
                mask = free_ok[s]
            if v is not None:
                W = mats[j]
                cost = cost + (v.min() if W is None else (W + v[None, :]).min(axis=1))
            cost = np.where(mask, cost, np.inf)
            v = cost
        total += v.min()
    return total


def solve_branch_and_bound(problem, config=None):
    """Depth-first branch-and-bound over the linear model, one slot per level in chain order."""
    config = config or SolverConfig()
    validate_problem(problem)
    start = time.perf_counter()
    T = _Tables(problem)
    S, N = T.S, T.N
    order, _ = unit_ranks(N, config.seed)
    row = np.zeros(S, dtype=np.int64)
    assigned = np.zeros(S, dtype=bool)
    load = np.zeros_like(T.capacity)
    state = {"best": np.inf, "row": None, "nodes": 0, "ties": 0, "pruned": 0, "stopped": False}
    per_depth = [0] * (S + 1)

    def out_of_budget():
        if config.max_nodes is not None and state["nodes"] >= config.max_nodes:
            return True
        return config.time_budget is not None and time.perf_counter() - start > config.time_budget

    def dfs(s, acc):
        if state["stopped"] or out_of_budget():
            state["stopped"] = True
            return
        state["nodes"] += 1
        per_depth[s] += 1
        if s == S:
            if acc < state["best"] - _tol(state["best"]):
                state["best"], state["row"] = acc, row.copy()
            else:
                state["ties"] += 1
            return
        for i in order:
            if state["stopped"]:
                return
            if not T.fits(load, s, i):
                continue
            row[s] = i
            assigned[s] = True
            load[:, i] += T.demand[:, s]
            step = T.unary[s, i]
            for a, b, W in T.closing[s]:
                step += W[row[a], row[b]]
            bound = _chain_bound(T, row, assigned, load)
            if bound < state["best"] - _tol(state["best"]):
                dfs(s + 1, acc + step)
            else:
                state["pruned"] += 1
            load[:, i] -= T.demand[:, s]
            assigned[s] = False

    if S:
        dfs(0, 0.0)
    else:
        state["best"], state["row"] = 0.0, row.copy()
    stats = {"nodes": state["nodes"], "nodes_per_depth": per_depth, "pruned": state["pruned"],
             "ties": state["ties"]}
    if state["row"] is None:
        if state["stopped"]:
            raise BudgetExceeded("branch-and-bound budget exhausted before any placement was found")
        raise Infeasible("no assignment satisfies the layer, memory and compute constraints")
    return _finish(problem, state["row"], "branch_and_bound", not state["stopped"], stats, start)


def _slot_costs(T, row, s):
    """Cost contribution of slot ``s`` on every unit, given the other slots of ``row``."""
    c = T.unary[s].copy()
    for a, b, W in T.incident[s]:
        c += W[:, row[b]] if a == s else W[row[a], :]
    return c


def _fits_all(T, load, s):
    return np.all(load + T.demand[:, s, None] <= T.capacity, axis=0)


def _descend(T, row, load):
    """Best-improvement descent over single-slot reassignment and pairwise unit swaps."""
    moves = 0
    current = T.cost(row)
    while True:
        best_delta, best_move = -_tol(current), None
        for s in range(T.S):
            i0 = row[s]
            c = _slot_costs(T, row, s)
            delta = np.where(_fits_all(T, load, s), c - c[i0], np.inf)
            delta[i0] = np.inf
            i = int(np.argmin(delta))
            if delta[i] < best_delta:
                best_delta, best_move = delta[i], ("move", s, i)
        for s1 in range(T.S):
            for s2 in range(s1 + 1, T.S):
                i1, i2 = row[s1], row[s2]
                if i1 == i2:
                    continue
                d1, d2 = T.demand[:, s1], T.demand[:, s2]
                if np.any(load[:, i1] - d1 + d2 > T.capacity[:, i1]) or \
                        np.any(load[:, i2] - d2 + d1 > T.capacity[:, i2]):
                    continue
                trial = row.copy()
                trial[s1], trial[s2] = i2, i1
                delta = T.cost(trial) - current
                if delta < best_delta:
                    best_delta, best_move = delta, ("swap", s1, s2)
        if best_move is None:
            return row, moves
        kind, x, y = best_move
        if kind == "move":
            load[:, row[x]] -= T.demand[:, x]
            load[:, y] += T.demand[:, x]
            row[x] = y
        else:
            i1, i2 = row[x], row[y]
            load[:, i1] += T.demand[:, y] - T.demand[:, x]
            load[:, i2] += T.demand[:, x] - T.demand[:, y]
            row[x], row[y] = i2, i1
        current = T.cost(row)
        moves += 1


def _repair(T, row, load, s, order):
    """Make room for slot ``s`` by moving one earlier slot to another unit.

    Picks the cheapest (by unary cost) relocation that lets ``s`` fit where the
    moved slot used to be. Returns False when no single move helps.
    """
    best = None
    for i in order:
        for t in range(s):
            if row[t] != i:
                continue
            freed = load[:, i] - T.demand[:, t]
            if np.any(freed + T.demand[:, s] > T.capacity[:, i]):
                continue
            for k in order:
                if k == i or not T.fits(load, t, k):
                    continue
                delta = T.unary[t, k] - T.unary[t, i] + T.unary[s, i]
                if best is None or delta < best[0]:
                    best = (delta, t, i, k)
    if best is None:
        return False
    _, t, i, k = best
    load[:, i] += T.demand[:, s] - T.demand[:, t]
    load[:, k] += T.demand[:, t]
    row[t], row[s] = k, i
    return True


def _construct(T, rng, order, randomized, rcl_fraction):
    row = np.zeros(T.S, dtype=np.int64)
    load = np.zeros_like(T.capacity)
    for s in range(T.S):
        c = T.unary[s].copy()
        for a, b, W in T.closing[s]:
            c += W[:, row[b]] if a == s else W[row[a], :]
        ok = _fits_all(T, load, s)[order]
        if not ok.any():
            if not _repair(T, row, load, s, order):
                return None, None
            continue
        cands = order[ok]
        costs = c[cands]
        if randomized:
            lo, hi = costs.min(), costs.max()
            pool = np.flatnonzero(costs <= lo + rcl_fraction * (hi - lo))
            pick = cands[pool[rng.integers(len(pool))]]
        else:
            pick = cands[int(np.argmin(costs))]
        row[s] = pick
        load[:, pick] += T.demand[:, s]
    return row, load


def solve_local_search(problem, config=None):
    """Seeded multi-restart greedy construction followed by reassign/swap descent.

    The first restart is purely greedy; later ones pick at random among the
    cheapest candidates. Failing to build any placement is reported as
    NoPlacementFound, which does not prove infeasibility.
    """
    config = config or SolverConfig(method="local_search")
    validate_problem(problem)
    start = time.perf_counter()
    T = _Tables(problem, from_model=False)
    order, _ = unit_ranks(T.N, config.seed)
    rng = np.random.default_rng([config.seed, 1])
    best_cost, best_row, found_in, total_moves, failures, done = np.inf, None, None, 0, 0, 0
    for r in range(config.restarts):
        if config.time_budget is not None and done and time.perf_counter() - start > config.time_budget:
            break
        done += 1
        row, load = _construct(T, rng, order, randomized=r > 0, rcl_fraction=config.rcl_fraction)
        if row is None:
            failures += 1
            continue
        row, moves = _descend(T, row, load)
        total_moves += moves
        cost = T.cost(row)
        if cost < best_cost - _tol(best_cost):
            best_cost, best_row, found_in = cost, row.copy(), r
    stats = {"restarts": done, "failed_constructions": failures, "descent_moves": total_moves,
             "best_restart": found_in}
    if best_row is None:
        raise NoPlacementFound("greedy construction failed in every restart")
    return _finish(problem, best_row, "local_search", False, stats, start)
