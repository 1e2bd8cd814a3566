"""Seeded random instances: uniform layouts in a square, rejected until connected."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationExhausted, UnknownProfile
from .fixtures import builtin_fixture, raspberry_3bp, stm32h7
from .latency import EvalConventions
from .model import CnnSpec, DeviceClass, GateProfile, LayerSpec, PlacementProblem, SharingGroup, validate_problem
from .topology import Topology, Vertex

TRANSMISSION_PROFILES = {
    "wifi4": (72.2e6, 7.5),
    "halow": (7.2e6, 7.5),
}


def paper_transmission_profile(name):
    """(rate in bits/s, range in m) of a named radio."""
    try:
        return TRANSMISSION_PROFILES[name]
    except KeyError:
        raise UnknownProfile(name) from None


def device_mix(name):
    """``"a-b"`` means a% STM32H7 and b% Raspberry Pi 3B+."""
    try:
        slow, fast = (float(v) for v in name.split("-"))
    except ValueError:
        raise ValueError(f"mix must look like '50-50', got {name!r}") from None
    if slow < 0 or fast < 0 or abs(slow + fast - 100.0) > 1e-9:
        raise ValueError(f"mix percentages must be >= 0 and sum to 100, got {name!r}")
    return ((stm32h7(), slow / 100.0), (raspberry_3bp(), fast / 100.0))


@dataclass(frozen=True)
class ScenarioParams:
    n_units: int = 30
    area_side: float = 30.0
    range: float = 7.5
    device_mix: tuple = ((stm32h7(), 0.5), (raspberry_3bp(), 0.5))
    n_sources: int = 1
    rate: float = 72.2e6
    max_attempts: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "device_mix", tuple(tuple(p) for p in self.device_mix))
        if self.n_units < 1 or self.n_sources < 1:
            raise ValueError("n_units and n_sources must be positive")
        if not (self.area_side > 0 and self.range > 0 and self.rate > 0):
            raise ValueError("area_side, range and rate must be positive")
        probs = [p for _, p in self.device_mix]
        if not probs or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("device_mix probabilities must be >= 0 and sum to 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be positive")

    @classmethod
    def from_names(cls, mix="50-50", profile="wifi4", **kw):
        rate, range_ = paper_transmission_profile(profile)
        return cls(device_mix=device_mix(mix), rate=rate, range=range_, **kw)


def draw_classes(mix, n, rng):
    classes = [dc for dc, _ in mix]
    idx = rng.choice(len(classes), size=n, p=np.array([p for _, p in mix]))
    return [classes[k] for k in idx]


def unit_ids(n):
    width = max(2, len(str(n)))
    return [f"n{i + 1:0{width}d}" for i in range(n)]


def source_ids(n):
    return [f"s{i + 1}" for i in range(n)]


def random_layout(params, rng):
    """Vertices of a connected uniform layout; raises GenerationExhausted after ``max_attempts``."""
    names = unit_ids(params.n_units)
    srcs = source_ids(params.n_sources)
    n = params.n_units + params.n_sources + 1
    for attempt in range(params.max_attempts):
        xy = rng.uniform(0.0, params.area_side, size=(n, 2))
        ids = names + srcs + ["f"]
        roles = ["unit"] * params.n_units + ["source"] * params.n_sources + ["sink"]
        vertices = [Vertex(v, r, float(x), float(y)) for v, r, (x, y) in zip(ids, roles, xy)]
        topo = Topology.from_positions(vertices, params.range)
        if topo.is_connected():
            return topo, attempt + 1
    raise GenerationExhausted(
        f"no connected layout of {params.n_units} units in {params.max_attempts} attempts "
        f"(side {params.area_side}, range {params.range})")


def generate(params, cnns, L, seed, sharing=(), conventions=None):
    """A connected random problem. ``seed`` is an int or a numpy SeedSequence.

    CNN u reads from source ``s{u % n_sources + 1}``. Positions are drawn
    before device classes, so the layout for a seed does not depend on the mix.
    """
    rng = np.random.default_rng(seed)
    topo, _ = random_layout(params, rng)
    cnn_specs = [builtin_fixture(c) if isinstance(c, str) else c for c in cnns]
    classes = draw_classes(params.device_mix, params.n_units, rng)
    srcs = source_ids(params.n_sources)
    problem = PlacementProblem(
        cnns=cnn_specs,
        sources=[srcs[u % params.n_sources] for u in range(len(cnn_specs))],
        topology=topo,
        unit_classes=dict(zip(topo.units, classes)),
        layers_per_unit_cap=int(L),
        data_rate_bits_per_s=params.rate,
        sharing=[g if isinstance(g, SharingGroup) else SharingGroup(g) for g in sharing],
        eval_conventions=conventions or EvalConventions(),
    )
    return validate_problem(problem)


def _random_profile(rng, m, gated):
    if not gated or m < 2:
        return GateProfile.plain(m)
    reach = [1.0]
    for _ in range(m - 1):
        reach.append(reach[-1] if rng.random() < 0.4 else round(reach[-1] * rng.uniform(0.0, 1.0), 6))
    return GateProfile.from_reach(reach)


def random_small_problem(seed, max_units=6, max_layers=4, max_cnns=2, sharing=None, gates=None,
                         L=None, max_space=200_000, conventions=None):
    """Small random instance for oracle comparisons.

    Sizes are drawn so that the exhaustive search space (units ** slots) stays
    below ``max_space``. Memory caps are drawn so that capacity binds on some
    instances; a few payloads and probabilities are zero to exercise pruning.
    ``sharing``/``gates`` of None means decide at random.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_units + 1))
    C = int(rng.integers(1, max_cnns + 1))
    share = bool(rng.random() < 0.5) if sharing is None else sharing
    gated = bool(rng.random() < 0.5) if gates is None else gates
    ms = [int(rng.integers(1, max_layers + 1)) for _ in range(C)]
    while n ** sum(ms) > max_space:
        k = int(np.argmax(ms))
        ms[k] -= 1
    cnns = []
    for u, m in enumerate(ms):
        layers = []
        for j in range(m):
            k = 0.0 if rng.random() < 0.15 else round(float(rng.uniform(0.5, 60.0)), 3)
            layers.append(LayerSpec(f"L{j + 1}", round(float(rng.uniform(1, 100)), 3),
                                    round(float(rng.uniform(0.1, 50)), 3), k))
        cnns.append(CnnSpec(f"c{u}", round(float(rng.uniform(1, 40)), 3), layers,
                            _random_profile(rng, m, gated), round(float(rng.uniform(0, 5)), 3)))
    groups = []
    if share and C >= 2:
        j0, j1 = int(rng.integers(ms[0])), int(rng.integers(ms[1]))
        ref, mine = cnns[0].layers[j0], cnns[1].layers[j1]
        layers = list(cnns[1].layers)
        layers[j1] = LayerSpec(mine.label, ref.memory_kb, ref.compute_mmul, mine.out_repr_kb)
        cnns[1] = CnnSpec(cnns[1].name, cnns[1].input_kb, layers, cnns[1].gate, cnns[1].final_out_kb)
        groups.append(SharingGroup({(0, j0), (1, j1)}))

    side, range_ = 10.0, 4.0
    while True:
        xy = rng.uniform(0, side, size=(n + 2, 2))
        vertices = [Vertex(uid, "unit", float(x), float(y)) for uid, (x, y) in zip(unit_ids(n), xy[:n])]
        vertices += [Vertex("s1", "source", *map(float, xy[n])), Vertex("f", "sink", *map(float, xy[n + 1]))]
        topo = Topology.from_positions(vertices, range_)
        if topo.is_connected():
            break
        range_ *= 1.15
    classes = {}
    for uid in topo.units:
        mem = float(rng.choice([60.0, 120.0, 250.0, 1000.0]))
        cap = None if rng.random() < 0.7 else round(float(rng.uniform(20, 120)), 3)
        classes[uid] = DeviceClass(f"d{uid}", mem, round(float(rng.uniform(1, 100)), 3), cap)
    if L is None:
        L = int(rng.integers(1, 4))
    return PlacementProblem(cnns, ["s1"] * C, topo, classes, L,
                            float(rng.choice([1e6, 7.2e6, 72.2e6])), groups,
                            conventions or EvalConventions())
