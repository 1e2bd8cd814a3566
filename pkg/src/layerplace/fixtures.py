"""Built-in CNN footprints, device classes and the 11-unit example network.

Pooling sublayers carry no parameters and are fused with the convolution
before them, so each conv + pool pair is one placeable layer.
"""

from __future__ import annotations

from .errors import UnknownFixture
from .latency import EvalConventions
from .model import CnnSpec, DeviceClass, GateProfile, LayerSpec, PlacementProblem, SharingGroup
from .topology import Topology, Vertex

GATE_CONFIDENCE = 0.99


def _layer(label, m, c, k):
    return LayerSpec(label, m, c, k)


def cnn5():
    layers = (
        _layer("L1 5x5 conv 64 + pool", 19.20, 3.76 + 0.05, 50.18),
        _layer("L2 5x5 conv 64 + pool", 409.60, 20.07 + 0.01, 12.54),
        _layer("L3 fc 384", 4816.90, 1.20, 1.54),
        _layer("L4 fc 192", 294.91, 0.07, 0.77),
        _layer("L5 fc 10", 7.68, 2e-3, 0.04),
    )
    return CnnSpec("cnn5", 9.41, layers, GateProfile.plain(5), 0.04)


def gc6(confidence=GATE_CONFIDENCE):
    q = round(1.0 - confidence, 12)
    layers = (
        _layer("L1 5x5 conv 64 + pool", 19.20, 3.76 + 0.05, 50.18),
        _layer("L2 gate fc 384,192,10", 19570.18, 4.89, 50.18),
        _layer("L3 5x5 conv 64 + pool", 409.60, 20.07 + 0.01, 12.54),
        _layer("L4 fc 384", 4816.90, 1.20, 1.54),
        _layer("L5 fc 192", 294.91, 0.07, 0.77),
        _layer("L6 fc 10", 7.68, 2e-3, 0.04),
    )
    return CnnSpec("gc6", 9.41, layers, GateProfile.from_reach([1.0, 1.0, q, q, q, q]), 0.04)


_ALEX_HEAD = (
    ("L1 11x11 conv 96 /4 + pool", 139.78, 105.42 + 0.31, 279.94),
    ("L2 5x5 conv 256 + pool", 1229.82, 223.95 + 0.39, 173.06),
)
_ALEX_TAIL = (
    ("3x3 conv 384", 3540.48, 149.52, 259.58),
    ("3x3 conv 384", 2655.74, 112.14, 259.58),
    ("3x3 conv 256 + pool", 1770.50, 74.76 + 0.08, 36.86),
    ("fc 4096", 151011.39, 37.75, 16.38),
    ("fc 4096, 2", 67158.02, 16.78, 16.38),
)


def alexnet():
    rows = _ALEX_HEAD + _ALEX_TAIL
    layers = tuple(_layer(label if label.startswith("L") else f"L{j + 1} {label}", m, c, k)
                   for j, (label, m, c, k) in enumerate(rows))
    return CnnSpec("alexnet", 618.35, layers, GateProfile.plain(len(layers)), 16.38)


def gc_alexnet(confidence=GATE_CONFIDENCE):
    q = round(1.0 - confidence, 12)
    rows = _ALEX_HEAD + (("gate fc 128,64,2", 22185.22, 5.55, 173.06),) + _ALEX_TAIL
    layers = tuple(_layer(label if label.startswith("L") else f"L{j + 1} {label}", m, c, k)
                   for j, (label, m, c, k) in enumerate(rows))
    reach = [1.0, 1.0, 1.0] + [q] * (len(layers) - 3)
    return CnnSpec("gc-alexnet", 618.35, layers, GateProfile.from_reach(reach), 16.38)


def stm32h7():
    return DeviceClass("stm32h7", 512.0, 40.0)


def raspberry_3bp():
    return DeviceClass("raspberry-3bp", 512_000.0, 560.0)


def odroid_c2():
    return DeviceClass("odroid-c2", 1_000_000.0, 600.0)


FIG1B_RANGE = 2.5
FIG1B_UNITS = {
    # id: (x, y, device class)
    "n01": (3.0, -2.0, "stm32h7"),
    "n02": (5.0, -3.0, "stm32h7"),
    "n03": (3.5, 1.0, "odroid-c2"),
    "n04": (1.0, -2.75, "odroid-c2"),
    "n05": (-1.0, -1.5, "stm32h7"),
    "n06": (2.0, -0.5, "stm32h7"),
    "n07": (-1.0, 0.75, "stm32h7"),
    "n08": (1.25, 1.55, "stm32h7"),
    "n09": (-2.5, -1.0, "stm32h7"),
    "n10": (-1.3, -3.0, "odroid-c2"),
    "n11": (4.25, -1.0, "odroid-c2"),
}
FIG1C_PLACEMENT = ("n05", "n10", "n04", "n01", "n06")


def fig1b():
    """The 11-unit network with source and sink co-located at the origin."""
    vertices = [Vertex("s", "source", 0.0, 0.0), Vertex("f", "sink", 0.0, 0.0)]
    vertices += [Vertex(uid, "unit", x, y) for uid, (x, y, _) in FIG1B_UNITS.items()]
    return Topology.from_positions(vertices, FIG1B_RANGE)


def fig1b_unit_classes():
    classes = {"stm32h7": stm32h7(), "odroid-c2": odroid_c2()}
    return {uid: classes[cls] for uid, (_, _, cls) in FIG1B_UNITS.items()}


_FIXTURES = {
    "cnn5": cnn5,
    "gc6": gc6,
    "alexnet": alexnet,
    "gc-alexnet": gc_alexnet,
    "stm32h7": stm32h7,
    "raspberry-3bp": raspberry_3bp,
    "odroid-c2": odroid_c2,
    "fig1b": fig1b,
}

CNN_FIXTURES = ("cnn5", "gc6", "alexnet", "gc-alexnet")
DEVICE_FIXTURES = ("stm32h7", "raspberry-3bp", "odroid-c2")


def builtin_fixture(name):
    try:
        factory = _FIXTURES[name]
    except KeyError:
        raise UnknownFixture(name) from None
    return factory()


def fixture_names():
    return list(_FIXTURES)


def fig1b_problem(cnns=("cnn5",), L=1, rate=72.2e6, sharing=(), conventions=None):
    """A problem on the 11-unit example network; every CNN reads from ``s`` and reports to ``f``."""
    cnn_specs = [builtin_fixture(c) if isinstance(c, str) else c for c in cnns]
    return PlacementProblem(
        cnns=cnn_specs,
        sources=["s"] * len(cnn_specs),
        topology=fig1b(),
        unit_classes=fig1b_unit_classes(),
        layers_per_unit_cap=L,
        data_rate_bits_per_s=rate,
        sharing=[g if isinstance(g, SharingGroup) else SharingGroup(g) for g in sharing],
        eval_conventions=conventions or EvalConventions(),
    )


PROBLEM_PRESETS = {
    "fig1b-cnn5": dict(cnns=("cnn5",)),
    "fig1b-gc6": dict(cnns=("gc6",)),
    "fig1b-two-cnn5": dict(cnns=("cnn5", "cnn5")),
    # both CNNs share their two convolutional layers
    "fig1b-two-cnn5-shared": dict(cnns=("cnn5", "cnn5"),
                                  sharing=({(0, 0), (1, 0)}, {(0, 1), (1, 1)})),
}


def preset_problem(name, **overrides):
    try:
        kw = dict(PROBLEM_PRESETS[name])
    except KeyError:
        raise UnknownFixture(name) from None
    kw.update(overrides)
    return fig1b_problem(**kw)
