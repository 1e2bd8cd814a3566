"""Domain types: CNN layer chains, gate profiles, device classes and placement problems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

from .errors import ProfileError, ValidationError
from .latency import EvalConventions
from .topology import Topology

PROB_TOL = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    """One placeable layer. Memory and representation sizes in KB (1000 B),
    compute in millions of multiplications."""

    label: str
    memory_kb: float
    compute_mmul: float
    out_repr_kb: float

    def to_dict(self):
        return {"label": self.label, "memory_kb": self.memory_kb,
                "compute_mmul": self.compute_mmul, "out_repr_kb": self.out_repr_kb}


def derive_exit_probabilities(reach_prob):
    """Probability that the decision is emitted at each layer, from reach probabilities.

    >>> derive_exit_probabilities([1, 1, 1])
    [0.0, 0.0, 1.0]
    """
    p = [float(v) for v in reach_prob]
    if not p:
        raise ProfileError("reach_prob is empty")
    problems = _reach_problems(p)
    if problems:
        raise ProfileError("; ".join(problems))
    g = [p[j] - p[j + 1] for j in range(len(p) - 1)]
    # rounding in the differences can push the remainder a hair below zero
    g.append(max(0.0, 1.0 - math.fsum(g)))
    return g


def _reach_problems(p):
    out = []
    if any(not (0.0 <= v <= 1.0) for v in p):
        out.append("reach_prob entries must lie in [0, 1]")
    if p and abs(p[0] - 1.0) > PROB_TOL:
        out.append("reach_prob[0] must be 1")
    if any(p[j + 1] > p[j] for j in range(len(p) - 1)):
        out.append("reach_prob not non-increasing")
    return out


@dataclass(frozen=True)
class GateProfile:
    reach_prob: tuple
    exit_prob: tuple

    @classmethod
    def from_reach(cls, reach_prob):
        return cls(tuple(float(v) for v in reach_prob),
                   tuple(derive_exit_probabilities(reach_prob)))

    @classmethod
    def plain(cls, n_layers):
        """Profile of an ordinary CNN: every layer runs, the decision leaves at the last one."""
        return cls.from_reach([1.0] * n_layers)

    def problems(self):
        p, g = list(self.reach_prob), list(self.exit_prob)
        out = _reach_problems(p)
        if len(g) != len(p):
            out.append("exit_prob and reach_prob lengths differ")
        if any(v < -PROB_TOL for v in g):
            out.append("exit_prob has negative entries")
        if g and abs(math.fsum(g) - 1.0) > PROB_TOL:
            out.append("exit_prob does not sum to 1")
        if not out and len(p) > 1:
            expected = derive_exit_probabilities(p)
            if any(abs(a - b) > PROB_TOL for a, b in zip(g, expected)):
                out.append("exit_prob inconsistent with reach_prob")
        return out


@dataclass(frozen=True)
class CnnSpec:
    name: str
    input_kb: float
    layers: tuple
    gate: GateProfile = None
    final_out_kb: float = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.gate is None:
            object.__setattr__(self, "gate", GateProfile.plain(len(self.layers)))
        if self.final_out_kb is None and self.layers:
            object.__setattr__(self, "final_out_kb", self.layers[-1].out_repr_kb)

    @property
    def n_layers(self):
        return len(self.layers)

    def problems(self):
        out = []
        where = f"cnn {self.name!r}"
        if not self.layers:
            out.append(f"{where}: needs at least one layer")
        if self.input_kb is None or self.input_kb < 0:
            out.append(f"{where}: input_kb must be >= 0")
        if self.final_out_kb is None or self.final_out_kb < 0:
            out.append(f"{where}: final_out_kb must be >= 0")
        for j, layer in enumerate(self.layers):
            for name in ("memory_kb", "compute_mmul", "out_repr_kb"):
                value = getattr(layer, name)
                if value is None or not math.isfinite(value) or value < 0:
                    out.append(f"{where} layer {j} ({layer.label}): {name} must be a finite value >= 0")
        if len(self.gate.reach_prob) != len(self.layers):
            out.append(f"{where}: gate profile length {len(self.gate.reach_prob)} "
                       f"!= {len(self.layers)} layers")
        out.extend(f"{where}: {msg}" for msg in self.gate.problems())
        return out

    def to_dict(self):
        return {
            "name": self.name,
            "input_kb": self.input_kb,
            "final_out_kb": self.final_out_kb,
            "layers": [layer.to_dict() for layer in self.layers],
            "reach_prob": list(self.gate.reach_prob),
        }

    @classmethod
    def from_dict(cls, data):
        layers = tuple(LayerSpec(str(d["label"]), float(d["memory_kb"]), float(d["compute_mmul"]),
                                 float(d["out_repr_kb"])) for d in data["layers"])
        reach = data.get("reach_prob")
        if reach is None:
            gate = GateProfile.plain(len(layers))
        else:
            reach = tuple(float(v) for v in reach)
            try:
                gate = GateProfile.from_reach(reach)
            except ProfileError:
                # kept so validate_problem can report it alongside everything else
                gate = GateProfile(reach, tuple(0.0 for _ in reach))
        final = data.get("final_out_kb")
        return cls(str(data["name"]), float(data["input_kb"]), layers, gate,
                   None if final is None else float(final))


@dataclass(frozen=True)
class DeviceClass:
    """Memory cap (KB), optional per-decision compute cap (Mmul) and speed (Mmul/s)."""

    name: str
    mem_cap_kb: float
    speed_mmul_per_s: float
    compute_cap_mmul: float | None = None

    def problems(self):
        out = []
        for attr in ("mem_cap_kb", "speed_mmul_per_s", "compute_cap_mmul"):
            value = getattr(self, attr)
            if value is None and attr == "compute_cap_mmul":
                continue
            if value is None or not value > 0:
                out.append(f"device class {self.name!r}: {attr} must be > 0")
        return out

    def to_dict(self):
        return {"name": self.name, "mem_cap_kb": self.mem_cap_kb,
                "compute_cap_mmul": self.compute_cap_mmul,
                "speed_mmul_per_s": self.speed_mmul_per_s}

    @classmethod
    def from_dict(cls, data):
        cap = data.get("compute_cap_mmul")
        return cls(str(data["name"]), float(data["mem_cap_kb"]), float(data["speed_mmul_per_s"]),
                   None if cap is None else float(cap))


@dataclass(frozen=True)
class SharingGroup:
    """Layers of different CNNs that are one physical layer. Members are (cnn, layer) 0-based."""

    members: frozenset

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset((int(u), int(j)) for u, j in self.members))

    def sorted_members(self):
        return sorted(self.members)


@dataclass(frozen=True)
class PlacementProblem:
    cnns: tuple
    sources: tuple
    topology: Topology
    unit_classes: dict
    layers_per_unit_cap: int
    data_rate_bits_per_s: float
    sharing: tuple = ()
    eval_conventions: EvalConventions = field(default_factory=EvalConventions)

    def __post_init__(self):
        object.__setattr__(self, "cnns", tuple(self.cnns))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "sharing", tuple(self.sharing))
        object.__setattr__(self, "unit_classes", dict(self.unit_classes))

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def L(self):
        return self.layers_per_unit_cap

    @cached_property
    def unit_ids(self):
        return tuple(self.topology.units)

    @cached_property
    def sink(self):
        sinks = self.topology.sinks
        return sinks[0] if sinks else None

    @property
    def total_layers(self):
        return sum(c.n_layers for c in self.cnns)

    @cached_property
    def slots(self):
        """Physical layers in placement order.

        Each slot is a tuple of (cnn, layer) members: a single layer, or every member
        of a sharing group. Ordered by first appearance when walking CNNs then layers.
        """
        group_of = {}
        for g in self.sharing:
            key = tuple(g.sorted_members())
            for m in key:
                group_of[m] = key
        out, seen = [], set()
        for u, cnn in enumerate(self.cnns):
            for j in range(cnn.n_layers):
                key = group_of.get((u, j), ((u, j),))
                if key not in seen:
                    seen.add(key)
                    out.append(key)
        return tuple(out)

    @cached_property
    def slot_of(self):
        return {m: s for s, members in enumerate(self.slots) for m in members}

    def slot_layer(self, s):
        u, j = self.slots[s][0]
        return self.cnns[u].layers[j]


def validate_problem(problem):
    """Return ``problem`` if every invariant holds, else raise ValidationError listing all violations."""
    errors = []
    if not isinstance(problem.layers_per_unit_cap, int) or problem.layers_per_unit_cap < 1:
        errors.append(f"layers_per_unit_cap must be a positive integer, got {problem.layers_per_unit_cap!r}")
    rate = problem.data_rate_bits_per_s
    if rate is None or not (rate > 0 and math.isfinite(rate)):
        errors.append(f"data_rate_bits_per_s must be positive, got {rate!r}")
    for cnn in problem.cnns:
        errors.extend(cnn.problems())
    topo = problem.topology
    if len(problem.sources) != len(problem.cnns):
        errors.append(f"{len(problem.sources)} source vertices for {len(problem.cnns)} CNNs")
    for u, s in enumerate(problem.sources):
        if s not in topo:
            errors.append(f"cnn {u}: source {s!r} is not a topology vertex")
        elif topo.role(s) != "source":
            errors.append(f"cnn {u}: vertex {s!r} is not a source")
    if len(topo.sinks) != 1:
        errors.append(f"exactly one sink vertex required, found {len(topo.sinks)}")
    units = topo.units
    if not units:
        errors.append("topology has no compute units")
    for unit in units:
        dc = problem.unit_classes.get(unit)
        if dc is None:
            errors.append(f"unit {unit!r} has no device class")
    for name in sorted({dc.name for dc in problem.unit_classes.values()}):
        dc = next(d for d in problem.unit_classes.values() if d.name == name)
        errors.extend(dc.problems())
    for unit in problem.unit_classes:
        if unit not in topo or topo.role(unit) != "unit":
            errors.append(f"device class assigned to {unit!r}, which is not a compute unit")
    pairs = topo.unreachable_pairs()
    if pairs:
        errors.append(f"topology disconnected ({len(pairs)} unreachable pairs, e.g. {pairs[0][0]}-{pairs[0][1]})")
    errors.extend(_sharing_problems(problem))
    if errors:
        raise ValidationError(errors)
    return problem


def _sharing_problems(problem):
    out = []
    owner = {}
    for k, group in enumerate(problem.sharing):
        members = group.sorted_members()
        if len(members) < 2:
            out.append(f"sharing group {k}: needs at least two members")
        in_range = []
        for u, j in members:
            if not (0 <= u < len(problem.cnns)) or not (0 <= j < problem.cnns[u].n_layers):
                out.append(f"sharing group {k}: member ({u}, {j}) out of range")
            else:
                in_range.append((u, j))
            if (u, j) in owner:
                out.append(f"sharing group {k}: member ({u}, {j}) already in group {owner[(u, j)]}")
            owner[(u, j)] = k
        if len({u for u, _ in members}) != len(members):
            out.append(f"sharing group {k}: members must belong to distinct CNNs")
        layers = [problem.cnns[u].layers[j] for u, j in in_range]
        if layers:
            ref = layers[0]
            for layer in layers[1:]:
                if not math.isclose(layer.memory_kb, ref.memory_kb, rel_tol=1e-12, abs_tol=0):
                    out.append(f"sharing group {k}: members have different memory_kb")
                    break
            for layer in layers[1:]:
                if not math.isclose(layer.compute_mmul, ref.compute_mmul, rel_tol=1e-12, abs_tol=0):
                    out.append(f"sharing group {k}: members have different compute_mmul")
                    break
    return out
