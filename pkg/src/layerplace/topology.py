"""Disk-graph connectivity and hop distances between units, sources and the sink."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedTopology, UnreachableHop, ValidationError

ROLES = ("unit", "source", "sink")


@dataclass(frozen=True)
class Vertex:
    id: str
    role: str
    x: float | None = None
    y: float | None = None

    @property
    def position(self):
        if self.x is None or self.y is None:
            return None
        return (self.x, self.y)


def build_disk_graph(positions, range_):
    """Boolean adjacency of the disk graph over ``positions``.

    Two distinct vertices are adjacent iff their Euclidean distance is at most
    ``range_`` (a distance of exactly ``range_`` counts as an edge).
    """
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    adj = dist <= range_
    np.fill_diagonal(adj, False)
    return adj


def all_pairs_hop_distance(adjacency):
    """Unweighted shortest-path lengths by breadth-first search from every vertex.

    Returns an integer masked array; masked entries are unreachable pairs.
    """
    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]
    neighbours = [np.flatnonzero(adj[i]) for i in range(n)]
    dist = np.zeros((n, n), dtype=np.int64)
    reached = np.zeros((n, n), dtype=bool)
    for src in range(n):
        reached[src, src] = True
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for w in neighbours[v]:
                if not reached[src, w]:
                    reached[src, w] = True
                    dist[src, w] = dist[src, v] + 1
                    queue.append(w)
    return np.ma.MaskedArray(dist, mask=~reached)


@dataclass(frozen=True, eq=False)
class Topology:
    vertices: tuple
    adjacency: np.ndarray
    range: float | None = None
    hop_dist: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        adj.setflags(write=False)
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "adjacency", adj)
        if self.hop_dist is None:
            object.__setattr__(self, "hop_dist", all_pairs_hop_distance(adj))
        object.__setattr__(self, "_index", {v.id: k for k, v in enumerate(self.vertices)})

    @classmethod
    def from_positions(cls, vertices, range_):
        vertices = tuple(vertices)
        adj = build_disk_graph([v.position for v in vertices], range_)
        return cls(vertices, adj, range=float(range_))

    @classmethod
    def from_edges(cls, vertices, edges):
        vertices = tuple(vertices)
        index = {v.id: k for k, v in enumerate(vertices)}
        adj = np.zeros((len(vertices), len(vertices)), dtype=bool)
        for a, b in edges:
            if a != b:
                adj[index[a], index[b]] = adj[index[b], index[a]] = True
        return cls(vertices, adj)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.range == other.range
            and np.array_equal(self.adjacency, other.adjacency)
        )

    __hash__ = None

    def index(self, vertex_id):
        return self._index[vertex_id]

    def __contains__(self, vertex_id):
        return vertex_id in self._index

    def ids(self, role=None):
        return [v.id for v in self.vertices if role is None or v.role == role]

    @property
    def units(self):
        return self.ids("unit")

    @property
    def sources(self):
        return self.ids("source")

    @property
    def sinks(self):
        return self.ids("sink")

    def role(self, vertex_id):
        return self.vertices[self._index[vertex_id]].role

    def hops(self, a, b):
        i, k = self._index[a], self._index[b]
        if self.hop_dist.mask[i, k]:
            raise UnreachableHop(f"no path between {a!r} and {b!r}")
        return int(self.hop_dist.data[i, k])

    def unreachable_pairs(self):
        ii, kk = np.nonzero(np.triu(np.ma.getmaskarray(self.hop_dist), 1))
        return [(self.vertices[i].id, self.vertices[k].id) for i, k in zip(ii, kk)]

    def is_connected(self):
        return not np.ma.getmaskarray(self.hop_dist).any()

    def distance_matrix(self, rows, cols):
        """Dense hop-count block for the given vertex ids; raises if any pair is unreachable."""
        ri = [self._index[r] for r in rows]
        ci = [self._index[c] for c in cols]
        block = self.hop_dist[np.ix_(ri, ci)]
        if np.ma.getmaskarray(block).any():
            raise UnreachableHop("requested distance block contains unreachable pairs")
        return np.asarray(block.data, dtype=float)

    def with_edge(self, a, b):
        adj = self.adjacency.copy()
        i, k = self._index[a], self._index[b]
        adj[i, k] = adj[k, i] = True
        return Topology(self.vertices, adj, range=self.range)

    def to_dict(self):
        out = {"vertices": []}
        for v in self.vertices:
            entry = {"id": v.id, "role": v.role}
            if v.position is not None:
                entry["x"], entry["y"] = v.x, v.y
            out["vertices"].append(entry)
        if self.range is not None:
            out["range"] = self.range
        else:
            ii, kk = np.nonzero(np.triu(self.adjacency, 1))
            out["edges"] = [[self.vertices[i].id, self.vertices[k].id] for i, k in zip(ii, kk)]
        return out

    @classmethod
    def from_dict(cls, data):
        errors = []
        vertices = []
        seen = set()
        for entry in data.get("vertices", []):
            role = entry.get("role", "unit")
            if role not in ROLES:
                errors.append(f"vertex {entry.get('id')!r}: unknown role {role!r}")
            if entry["id"] in seen:
                errors.append(f"duplicate vertex id {entry['id']!r}")
            seen.add(entry["id"])
            x, y = entry.get("x"), entry.get("y")
            vertices.append(Vertex(str(entry["id"]), role,
                                   None if x is None else float(x),
                                   None if y is None else float(y)))
        if len(vertices) < 1:
            errors.append("topology has no vertices")
        if "edges" in data:
            ids = {v.id for v in vertices}
            for a, b in data["edges"]:
                for end in (a, b):
                    if end not in ids:
                        errors.append(f"edge references unknown vertex {end!r}")
            if errors:
                raise ValidationError(errors)
            return cls.from_edges(vertices, data["edges"])
        rng = data.get("range")
        if rng is None or float(rng) <= 0:
            errors.append("topology needs a positive 'range' or an explicit 'edges' list")
        if any(v.position is None for v in vertices):
            errors.append("geometric topology requires x/y for every vertex")
        if errors:
            raise ValidationError(errors)
        return cls.from_positions(vertices, float(rng))


def assert_connected(topology):
    """Raise DisconnectedTopology unless every pair of vertices is reachable."""
    pairs = topology.unreachable_pairs()
    if pairs:
        raise DisconnectedTopology(pairs)
