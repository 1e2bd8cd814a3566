"""JSON problem files.

Top-level keys: ``cnns``, ``units``, ``topology``, ``sharing``, ``config``.
Anywhere a CNN, device class or topology is expected, a built-in fixture
name may be given instead. See the README for the full schema.
"""

from __future__ import annotations

import json

from .errors import UnknownFixture, UnknownProfile, ValidationError
from .fixtures import builtin_fixture
from .latency import EvalConventions
from .model import CnnSpec, DeviceClass, PlacementProblem, SharingGroup
from .topology import Topology


def _fixture(name, kind, errors):
    try:
        value = builtin_fixture(name)
    except UnknownFixture:
        errors.append(f"unknown fixture {name!r}")
        return None
    if not isinstance(value, kind):
        errors.append(f"fixture {name!r} is not a {kind.__name__}")
        return None
    return value


def _cnn(entry, errors):
    if isinstance(entry, str):
        return _fixture(entry, CnnSpec, errors), None
    if "fixture" in entry:
        return _fixture(entry["fixture"], CnnSpec, errors), entry.get("source")
    try:
        return CnnSpec.from_dict(entry), entry.get("source")
    except (KeyError, TypeError, ValueError) as exc:
        errors.append(f"cnn entry {entry.get('name', '?')!r}: malformed ({exc})")
        return None, None


def problem_from_dict(data, L=None, rate=None, conventions=None):
    """Build a PlacementProblem; keyword arguments override the file's ``config``."""
    from .scenario import paper_transmission_profile

    errors = []
    if not isinstance(data, dict):
        raise ValidationError(["problem file must hold a JSON object"])
    for key in ("cnns", "units", "topology"):
        if key not in data:
            errors.append(f"missing top-level key {key!r}")
    if errors:
        raise ValidationError(errors)

    topo_entry = data["topology"]
    if isinstance(topo_entry, str):
        topology = _fixture(topo_entry, Topology, errors)
    else:
        try:
            topology = Topology.from_dict(topo_entry)
        except ValidationError as exc:
            errors.extend(exc.errors)
            topology = None

    cnns, sources = [], []
    for entry in data["cnns"]:
        cnn, source = _cnn(entry, errors)
        if cnn is not None:
            cnns.append(cnn)
            sources.append(source)
    if topology is not None and any(s is None for s in sources):
        if len(topology.sources) == 1:
            sources = [s or topology.sources[0] for s in sources]
        else:
            errors.append("every cnn needs a 'source' unless the topology has exactly one source")

    units = data["units"]
    classes = {}
    for name, spec in units.get("classes", {}).items():
        if isinstance(spec, str):
            classes[name] = _fixture(spec, DeviceClass, errors)
        else:
            try:
                classes[name] = DeviceClass.from_dict({"name": name, **spec})
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"device class {name!r}: malformed ({exc})")
    unit_classes = {}
    for uid, cls_name in units.get("members", {}).items():
        if cls_name in classes:
            unit_classes[uid] = classes[cls_name]
        else:
            dc = _fixture(cls_name, DeviceClass, []) if isinstance(cls_name, str) else None
            if dc is None:
                errors.append(f"unit {uid!r}: unknown device class {cls_name!r}")
            else:
                unit_classes[uid] = dc

    sharing = []
    for k, group in enumerate(data.get("sharing", [])):
        try:
            sharing.append(SharingGroup({(int(u), int(j)) for u, j in group}))
        except (TypeError, ValueError):
            errors.append(f"sharing group {k}: expected a list of [cnn, layer] pairs")

    config = data.get("config", {})
    if L is None:
        L = config.get("L", 1)
    if rate is None:
        if "rate_bits_per_s" in config:
            rate = float(config["rate_bits_per_s"])
        else:
            try:
                rate = paper_transmission_profile(config.get("profile", "wifi4"))[0]
            except UnknownProfile as exc:
                errors.append(str(exc))
    if conventions is None:
        try:
            conventions = EvalConventions.from_dict(config.get("conventions", {}))
        except ValueError as exc:
            errors.append(str(exc))
    if errors:
        raise ValidationError(errors)
    return PlacementProblem(cnns, sources, topology, unit_classes, L, rate, sharing, conventions)


def problem_to_dict(problem, **metadata):
    classes = {}
    members = {}
    for uid in problem.unit_ids:
        dc = problem.unit_classes[uid]
        classes[dc.name] = {k: v for k, v in dc.to_dict().items() if k != "name"}
        members[uid] = dc.name
    out = {
        "cnns": [{**cnn.to_dict(), "source": src} for cnn, src in zip(problem.cnns, problem.sources)],
        "units": {"classes": classes, "members": members},
        "topology": problem.topology.to_dict(),
        "sharing": [[list(m) for m in g.sorted_members()] for g in problem.sharing],
        "config": {"L": problem.L, "rate_bits_per_s": problem.data_rate_bits_per_s,
                   "conventions": problem.eval_conventions.to_dict()},
    }
    if metadata:
        out["metadata"] = metadata
    return out


def load_problem(path, **overrides):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError([f"{path}: invalid JSON ({exc})"]) from None
    return problem_from_dict(data, **overrides)


def dump_json(obj):
    """Deterministic JSON text used for every machine-readable output."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
