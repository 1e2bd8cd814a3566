"""Decision-latency evaluation of a placement: source, inter-layer, sink and processing terms.

All times are in seconds. Payloads are in KB (1000 bytes), data rates in bits/s,
compute in millions of multiplications and device speeds in Mmul/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingDeviceClass, UnreachableHop, ValidationError

AS_WRITTEN = "as_written"
NEXT_LAYER_COMPAT = "next_layer_compat"
BITS_EXACT = "bits_exact"
BYTES_AS_BITS_COMPAT = "bytes_as_bits_compat"

_BITS_PER_KB = {BITS_EXACT: 8000.0, BYTES_AS_BITS_COMPAT: 1000.0}


@dataclass(frozen=True)
class EvalConventions:
    """How the objective is evaluated.

    ``next_layer_compat`` weights layer j's compute by the reach probability of
    layer j+1 and drops the last layer's compute; ``bytes_as_bits_compat``
    treats KB payloads as kilobits. The defaults weight layer j by its own
    reach probability and use 8000 bits per KB.
    """

    processing_weight: str = AS_WRITTEN
    include_processing: bool = True
    payload_unit: str = BITS_EXACT

    def __post_init__(self):
        if self.processing_weight not in (AS_WRITTEN, NEXT_LAYER_COMPAT):
            raise ValueError(f"unknown processing_weight {self.processing_weight!r}")
        if self.payload_unit not in _BITS_PER_KB:
            raise ValueError(f"unknown payload_unit {self.payload_unit!r}")

    @classmethod
    def paper_compat(cls, include_processing=True):
        return cls(NEXT_LAYER_COMPAT, include_processing, BYTES_AS_BITS_COMPAT)

    @property
    def bits_per_kb(self):
        return _BITS_PER_KB[self.payload_unit]

    def to_dict(self):
        return {"processing_weight": self.processing_weight,
                "include_processing": self.include_processing,
                "payload_unit": self.payload_unit}

    @classmethod
    def from_dict(cls, data):
        return cls(data.get("processing_weight", AS_WRITTEN),
                   bool(data.get("include_processing", True)),
                   data.get("payload_unit", BITS_EXACT))


PAPER_COMPAT = EvalConventions.paper_compat()


@dataclass(frozen=True)
class Placement:
    """Unit id of every layer: ``units[u][j]`` hosts layer j of CNN u."""

    units: tuple

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(tuple(row) for row in self.units))

    @classmethod
    def from_mapping(cls, assign, layer_counts):
        return cls(tuple(tuple(assign[(u, j)] for j in range(m)) for u, m in enumerate(layer_counts)))

    def unit(self, u, j):
        return self.units[u][j]

    def items(self):
        for u, row in enumerate(self.units):
            for j, unit in enumerate(row):
                yield (u, j), unit

    def to_document(self, problem):
        return [
            {"cnn": cnn.name,
             "layers": [{"layer": layer.label, "unit": unit}
                        for layer, unit in zip(cnn.layers, self.units[u])]}
            for u, cnn in enumerate(problem.cnns)
        ]

    @classmethod
    def from_document(cls, doc, problem):
        """Inverse of :meth:`to_document`; entries may be dicts or bare unit ids."""
        if isinstance(doc, dict):
            doc = doc.get("placement", doc)
        if len(doc) != len(problem.cnns):
            raise ValidationError([f"placement lists {len(doc)} CNNs, problem has {len(problem.cnns)}"])
        rows, errors = [], []
        for u, (entry, cnn) in enumerate(zip(doc, problem.cnns)):
            layers = entry["layers"] if isinstance(entry, dict) else entry
            row = [item["unit"] if isinstance(item, dict) else item for item in layers]
            if len(row) != cnn.n_layers:
                errors.append(f"cnn {cnn.name!r}: {len(row)} layers placed, {cnn.n_layers} expected")
            rows.append(row)
        if errors:
            raise ValidationError(errors)
        return cls(rows)


@dataclass(frozen=True)
class LatencyBreakdown:
    t_s: float = 0.0
    t_inter: float = 0.0
    t_f: float = 0.0
    t_p_per_unit: dict = field(default_factory=dict)

    @property
    def t_t(self):
        return self.t_s + self.t_inter + self.t_f

    @property
    def t_p(self):
        return sum(self.t_p_per_unit.values(), 0.0)

    @property
    def t(self):
        return self.t_t + self.t_p

    def to_record(self):
        """Flat record in milliseconds."""
        return {"t_ms": self.t * 1e3, "t_t_ms": self.t_t * 1e3, "t_p_ms": self.t_p * 1e3,
                "t_s_ms": self.t_s * 1e3, "t_inter_ms": self.t_inter * 1e3, "t_f_ms": self.t_f * 1e3}


def transmission_time(payload_kb, rate_bits_per_s, hops, unit_convention=BITS_EXACT):
    if hops is None or hops is np.ma.masked or (isinstance(hops, float) and math.isinf(hops)):
        raise UnreachableHop("transmission over an unreachable hop distance")
    return payload_kb * _BITS_PER_KB[unit_convention] / rate_bits_per_s * hops


def _conv(problem, conventions):
    return problem.eval_conventions if conventions is None else conventions


def source_time(placement, problem, conventions=None):
    conv = _conv(problem, conventions)
    topo, rate = problem.topology, problem.data_rate_bits_per_s
    total = 0.0
    for u, cnn in enumerate(problem.cnns):
        d = topo.hops(problem.sources[u], placement.unit(u, 0))
        total += cnn.gate.reach_prob[0] * transmission_time(cnn.input_kb, rate, d, conv.payload_unit)
    return total


def inter_layer_time(placement, problem, conventions=None):
    conv = _conv(problem, conventions)
    topo, rate = problem.topology, problem.data_rate_bits_per_s
    total = 0.0
    for u, cnn in enumerate(problem.cnns):
        p = cnn.gate.reach_prob
        for j in range(cnn.n_layers - 1):
            d = topo.hops(placement.unit(u, j), placement.unit(u, j + 1))
            total += p[j + 1] * transmission_time(cnn.layers[j].out_repr_kb, rate, d, conv.payload_unit)
    return total


def sink_time(placement, problem, conventions=None):
    conv = _conv(problem, conventions)
    topo, rate, sink = problem.topology, problem.data_rate_bits_per_s, problem.sink
    total = 0.0
    for u, cnn in enumerate(problem.cnns):
        for j, g in enumerate(cnn.gate.exit_prob):
            if g == 0.0:
                continue
            d = topo.hops(placement.unit(u, j), sink)
            total += g * transmission_time(cnn.final_out_kb, rate, d, conv.payload_unit)
    return total


def processing_weights(cnn, conventions):
    """Per-layer multiplier of compute in the processing term."""
    p = cnn.gate.reach_prob
    if conventions.processing_weight == AS_WRITTEN:
        return list(p)
    return [p[j + 1] for j in range(cnn.n_layers - 1)] + [0.0]


def processing_time(placement, problem, conventions=None):
    """Processing seconds per unit that hosts at least one layer."""
    conv = _conv(problem, conventions)
    out = {}
    for u, cnn in enumerate(problem.cnns):
        weights = processing_weights(cnn, conv)
        for j, layer in enumerate(cnn.layers):
            unit = placement.unit(u, j)
            dc = problem.unit_classes.get(unit)
            if dc is None:
                raise MissingDeviceClass(unit)
            value = weights[j] * layer.compute_mmul / dc.speed_mmul_per_s if conv.include_processing else 0.0
            out[unit] = out.get(unit, 0.0) + value
    return out


def evaluate(placement, problem, conventions=None):
    """Full latency breakdown of ``placement`` under the problem's (or given) conventions."""
    return LatencyBreakdown(
        t_s=source_time(placement, problem, conventions),
        t_inter=inter_layer_time(placement, problem, conventions),
        t_f=sink_time(placement, problem, conventions),
        t_p_per_unit=processing_time(placement, problem, conventions),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    unit: str | None = None

    def __str__(self):
        return f"[{self.kind}] {self.message}"


def check_feasibility(placement, problem):
    """Every constraint violated by ``placement`` (empty list when feasible).

    Shared layers count once per unit towards the layer, memory and compute caps.
    """
    out = []
    units = set(problem.unit_ids)
    if len(placement.units) != len(problem.cnns):
        out.append(Violation("assignment", f"{len(placement.units)} CNNs placed, {len(problem.cnns)} expected"))
        return out
    for u, (row, cnn) in enumerate(zip(placement.units, problem.cnns)):
        if len(row) != cnn.n_layers:
            out.append(Violation("assignment", f"cnn {u}: {len(row)} of {cnn.n_layers} layers assigned"))
        for j, unit in enumerate(row):
            if unit not in units:
                out.append(Violation("assignment", f"cnn {u} layer {j}: {unit!r} is not a compute unit", unit))
    if out:
        return out

    hosted = {}
    for s, members in enumerate(problem.slots):
        hosts = {placement.unit(u, j) for u, j in members}
        if len(hosts) > 1:
            labels = ", ".join(f"({u},{j})" for u, j in members)
            out.append(Violation("sharing", f"shared layer {labels} split across {sorted(hosts)}"))
        for h in hosts:
            hosted.setdefault(h, []).append(s)

    for unit in problem.unit_ids:
        slots = hosted.get(unit, [])
        if not slots:
            continue
        dc = problem.unit_classes.get(unit)
        if len(slots) > problem.layers_per_unit_cap:
            out.append(Violation("layers", f"{unit}: {len(slots)} layers > L={problem.layers_per_unit_cap}", unit))
        if dc is None:
            out.append(Violation("assignment", f"{unit}: no device class", unit))
            continue
        mem = sum(problem.slot_layer(s).memory_kb for s in slots)
        if mem > dc.mem_cap_kb:
            out.append(Violation("memory", f"{unit} ({dc.name}): memory {mem:.2f} KB > {dc.mem_cap_kb:.2f} KB", unit))
        if dc.compute_cap_mmul is not None:
            comp = sum(problem.slot_layer(s).compute_mmul for s in slots)
            if comp > dc.compute_cap_mmul:
                out.append(Violation("compute", f"{unit} ({dc.name}): compute {comp:.4f} Mmul > "
                                                f"{dc.compute_cap_mmul:.4f} Mmul", unit))
    return out


def slot_assignment(placement, problem):
    """Unit index per slot (the first member decides for split shared layers)."""
    index = {unit: i for i, unit in enumerate(problem.unit_ids)}
    return np.array([index[placement.unit(*members[0])] for members in problem.slots], dtype=np.int64)


def placement_from_slots(row, problem):
    ids = problem.unit_ids
    assign = {m: ids[int(row[s])] for s, members in enumerate(problem.slots) for m in members}
    return Placement.from_mapping(assign, [c.n_layers for c in problem.cnns])


def evaluate_many(problem, assignments, conventions=None):
    """Objective ``t`` for a batch of slot assignments.

    ``assignments`` has shape (n, n_slots) holding unit indices into
    ``problem.unit_ids``. Computed straight from the latency formulas with
    array gathers, independently of the scalar path.
    """
    conv = _conv(problem, conventions)
    A = np.asarray(assignments, dtype=np.int64)
    topo = problem.topology
    unit_ids = list(problem.unit_ids)
    scale = conv.bits_per_kb / problem.data_rate_bits_per_s
    D = topo.distance_matrix(unit_ids, unit_ids)
    sink_d = topo.distance_matrix(unit_ids, [problem.sink])[:, 0]
    speed = np.array([problem.unit_classes[i].speed_mmul_per_s for i in unit_ids])
    t_s = np.zeros(A.shape[0])
    t_inter = np.zeros(A.shape[0])
    t_f = np.zeros(A.shape[0])
    t_p = np.zeros(A.shape[0])
    for u, cnn in enumerate(problem.cnns):
        cols = [problem.slot_of[(u, j)] for j in range(cnn.n_layers)]
        src_d = topo.distance_matrix([problem.sources[u]], unit_ids)[0]
        p, g = cnn.gate.reach_prob, cnn.gate.exit_prob
        t_s += p[0] * cnn.input_kb * scale * src_d[A[:, cols[0]]]
        for j in range(cnn.n_layers - 1):
            t_inter += p[j + 1] * cnn.layers[j].out_repr_kb * scale * D[A[:, cols[j]], A[:, cols[j + 1]]]
        for j in range(cnn.n_layers):
            if g[j] != 0.0:
                t_f += g[j] * cnn.final_out_kb * scale * sink_d[A[:, cols[j]]]
        if conv.include_processing:
            for j, w in enumerate(processing_weights(cnn, conv)):
                t_p += w * cnn.layers[j].compute_mmul / speed[A[:, cols[j]]]
    return t_s + t_inter + t_f + t_p


def feasible_many(problem, assignments):
    """Boolean mask of slot assignments meeting the layer, memory and compute caps."""
    A = np.asarray(assignments, dtype=np.int64)
    mem = np.array([problem.slot_layer(s).memory_kb for s in range(len(problem.slots))])
    comp = np.array([problem.slot_layer(s).compute_mmul for s in range(len(problem.slots))])
    R, N = A.shape[0], len(problem.unit_ids)
    cell = (np.arange(R)[:, None] * N + A).ravel()

    def per_unit(weights):
        w = None if weights is None else np.broadcast_to(weights, A.shape).ravel()
        return np.bincount(cell, weights=w, minlength=R * N).reshape(R, N)

    classes = [problem.unit_classes[u] for u in problem.unit_ids]
    ok = np.all(per_unit(None) <= problem.layers_per_unit_cap, axis=1)
    ok &= np.all(per_unit(mem) <= np.array([dc.mem_cap_kb for dc in classes]), axis=1)
    caps = np.array([np.inf if dc.compute_cap_mmul is None else dc.compute_cap_mmul for dc in classes])
    if np.isfinite(caps).any():
        ok &= np.all(per_unit(comp) <= caps, axis=1)
    return ok
