"""Integer linear model of the placement problem.

Each product of consecutive-layer indicators alpha[u,j,i] * alpha[u,j+1,k] is
replaced by a binary w[u,j,i,k] with the three standard linking rows, which
makes the quadratic objective linear without changing its optimum.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteAssignment
from .latency import processing_weights
from .model import validate_problem

SUBSTITUTE = "substitute"
EQUALITY = "equality"


@dataclass(frozen=True)
class Row:
    name: str
    coefs: dict
    sense: str  # "<=", "=", ">="
    rhs: float
    kind: str

    def lhs(self, assignment):
        return sum(c * assignment[v] for v, c in self.coefs.items())

    def satisfied(self, assignment, tol=1e-9):
        lhs = self.lhs(assignment)
        if self.sense == "<=":
            return lhs <= self.rhs + tol * max(1.0, abs(self.rhs))
        if self.sense == ">=":
            return lhs >= self.rhs - tol * max(1.0, abs(self.rhs))
        return abs(lhs - self.rhs) <= tol * max(1.0, abs(self.rhs))


@dataclass
class IlpModel:
    unit_ids: tuple
    variables: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    # alpha variable -> (cnn, layer, unit index); the layer is the canonical member for shared slots
    alpha: dict = field(default_factory=dict)
    # w variable -> (cnn, layer, unit i, unit k) standing for alpha[u,j,i] * alpha[u,j+1,k]
    w: dict = field(default_factory=dict)
    sharing_mode: str = SUBSTITUTE
    n_slots: int = 0
    slot_of: dict = field(default_factory=dict)
    alpha_name: dict = field(default_factory=dict)

    def add_var(self, name, coef=0.0):
        self.variables.append(name)
        self.objective[name] = coef
        return name

    def alpha_var(self, u, j, i):
        """Name of the indicator for (cnn u, layer j) on unit index i."""
        return self.alpha_name[(u, j, i)]

    def rows_of_kind(self, *kinds):
        return [r for r in self.rows if r.kind in kinds]

    def cost_tables(self):
        """Objective as slot-level tables: unary (slots x units) and one matrix per chain edge.

        Only meaningful in substitution mode, where each slot owns one alpha per unit.
        Returns ``(unary, edges)`` with ``edges`` a list of ``(slot_a, slot_b, matrix)``.
        """
        n = len(self.unit_ids)
        unary = np.zeros((self.n_slots, n))
        for name, (u, j, i) in self.alpha.items():
            unary[self.slot_of[(u, j)], i] += self.objective[name]
        by_edge = {}
        for name, (u, j, i, k) in self.w.items():
            mat = by_edge.setdefault((u, j), np.zeros((n, n)))
            mat[i, k] += self.objective[name]
        edges = [(self.slot_of[(u, j)], self.slot_of[(u, j + 1)], mat)
                 for (u, j), mat in sorted(by_edge.items())]
        return unary, edges

    def resource_tables(self):
        """Per-slot demand and per-unit capacity for every capacity row kind.

        Returns ``(kinds, demand, capacity)``; ``demand`` has shape (kinds, slots)
        and ``capacity`` (kinds, units), with ``inf`` where a unit has no such row.
        """
        kinds = ("count", "memory", "compute")
        n = len(self.unit_ids)
        demand = np.zeros((len(kinds), self.n_slots))
        capacity = np.full((len(kinds), n), np.inf)
        for row in self.rows_of_kind(*kinds):
            r = kinds.index(row.kind)
            for name, coef in row.coefs.items():
                u, j, i = self.alpha[name]
                capacity[r, i] = row.rhs
                if coef > 0:
                    demand[r, self.slot_of[(u, j)]] = coef
        return kinds, demand, capacity

    def to_lp(self):
        buf = io.StringIO()
        write_lp(self, buf)
        return buf.getvalue()


def linearize(problem, sharing_mode=SUBSTITUTE, prune="edge"):
    """Build the linear model of ``problem``.

    ``sharing_mode="substitute"`` gives every sharing group one set of alpha
    variables; ``"equality"`` keeps one set per member tied by equality rows
    and relieves the capacity rows by k-1 of the k members.
    ``prune``: ``"edge"`` skips w variables of chain edges whose payload or
    reach probability is zero, ``"all"`` additionally drops zero-coefficient
    unit pairs, ``"none"`` keeps everything.
    """
    validate_problem(problem)
    if sharing_mode not in (SUBSTITUTE, EQUALITY):
        raise ValueError(f"unknown sharing_mode {sharing_mode!r}")
    if prune not in ("edge", "all", "none"):
        raise ValueError(f"unknown prune mode {prune!r}")
    conv = problem.eval_conventions
    topo = problem.topology
    units = list(problem.unit_ids)
    n = len(units)
    scale = conv.bits_per_kb / problem.data_rate_bits_per_s
    D = topo.distance_matrix(units, units)
    to_sink = topo.distance_matrix(units, [problem.sink])[:, 0]
    speed = [problem.unit_classes[x].speed_mmul_per_s for x in units]

    model = IlpModel(tuple(units), sharing_mode=sharing_mode, n_slots=len(problem.slots),
                     slot_of=dict(problem.slot_of))

    # alpha variables, one set per slot (substitute) or per member (equality)
    canonical = {}
    for members in problem.slots:
        head = members[0]
        for m in members:
            canonical[m] = head if sharing_mode == SUBSTITUTE else m
    for u, cnn in enumerate(problem.cnns):
        for j in range(cnn.n_layers):
            cu, cj = canonical[(u, j)]
            for i in range(n):
                key = (cu, cj, i)
                if (u, j) == (cu, cj):
                    name = model.add_var(f"a_u{u}_j{j}_i{i}")
                    model.alpha[name] = key
                model.alpha_name[(u, j, i)] = f"a_u{cu}_j{cj}_i{i}"

    for u, cnn in enumerate(problem.cnns):
        p, g = cnn.gate.reach_prob, cnn.gate.exit_prob
        weights = processing_weights(cnn, conv)
        src = topo.distance_matrix([problem.sources[u]], units)[0]
        for j, layer in enumerate(cnn.layers):
            for i in range(n):
                coef = 0.0
                if j == 0:
                    coef += p[0] * cnn.input_kb * scale * src[i]
                if g[j] != 0.0:
                    coef += g[j] * cnn.final_out_kb * scale * to_sink[i]
                if conv.include_processing:
                    coef += weights[j] * layer.compute_mmul / speed[i]
                model.objective[model.alpha_var(u, j, i)] += coef

    for u, cnn in enumerate(problem.cnns):
        p = cnn.gate.reach_prob
        for j in range(cnn.n_layers - 1):
            edge = p[j + 1] * cnn.layers[j].out_repr_kb * scale
            if edge == 0.0 and prune != "none":
                continue
            for i in range(n):
                for k in range(n):
                    coef = edge * D[i, k]
                    if coef == 0.0 and prune == "all":
                        continue
                    name = model.add_var(f"w_u{u}_j{j}_i{i}_k{k}", coef)
                    model.w[name] = (u, j, i, k)
                    a, b = model.alpha_var(u, j, i), model.alpha_var(u, j + 1, k)
                    model.rows.append(Row(f"lk1_{name}", {name: 1.0, a: -1.0}, "<=", 0.0, "link"))
                    model.rows.append(Row(f"lk2_{name}", {name: 1.0, b: -1.0}, "<=", 0.0, "link"))
                    model.rows.append(Row(f"lk3_{name}", {a: 1.0, b: 1.0, name: -1.0}, "<=", 1.0, "link"))

    # each layer on exactly one unit
    for u, j in sorted({(u, j) for u, j, _ in model.alpha.values()}):
        coefs = {model.alpha_var(u, j, i): 1.0 for i in range(n)}
        model.rows.append(Row(f"assign_u{u}_j{j}", coefs, "=", 1.0, "assign"))

    relief = []  # members whose alpha is subtracted from capacity rows (equality mode)
    if sharing_mode == EQUALITY:
        for k_group, members in enumerate(problem.slots):
            if len(members) < 2:
                continue
            head = members[0]
            for m in members[1:]:
                relief.append(m)
                for i in range(n):
                    a, b = model.alpha_var(*m, i), model.alpha_var(*head, i)
                    model.rows.append(Row(f"share_g{k_group}_u{m[0]}_j{m[1]}_i{i}",
                                          {a: 1.0, b: -1.0}, "=", 0.0, "share"))

    for i, unit in enumerate(units):
        dc = problem.unit_classes[unit]
        caps = [("count", lambda layer: 1.0, float(problem.layers_per_unit_cap)),
                ("memory", lambda layer: layer.memory_kb, dc.mem_cap_kb)]
        if dc.compute_cap_mmul is not None:
            caps.append(("compute", lambda layer: layer.compute_mmul, dc.compute_cap_mmul))
        for kind, demand, cap in caps:
            coefs = {}
            for name, (u, j, ii) in model.alpha.items():
                if ii == i:
                    coefs[name] = demand(problem.cnns[u].layers[j])
            for m in relief:
                name = model.alpha_var(*m, i)
                coefs[name] = coefs.get(name, 0.0) - demand(problem.cnns[m[0]].layers[m[1]])
            model.rows.append(Row(f"{kind}_i{i}", coefs, "<=", cap, kind))
    return model


def assignment_from_placement(model, placement):
    """0/1 value for every variable, with each w set to the product it replaces."""
    values = {}
    for name, (u, j, i) in model.alpha.items():
        values[name] = 1 if placement.unit(u, j) == model.unit_ids[i] else 0
    for name, (u, j, i, k) in model.w.items():
        a = placement.unit(u, j) == model.unit_ids[i]
        b = placement.unit(u, j + 1) == model.unit_ids[k]
        values[name] = 1 if (a and b) else 0
    return values


def objective_of_assignment(model, assignment):
    missing = [v for v in model.variables if v not in assignment]
    if missing:
        raise IncompleteAssignment(missing[:5])
    total = 0.0
    for name in model.variables:
        total += model.objective[name] * assignment[name]
    return total


def quadratic_objective(model, assignment):
    """Objective with every w replaced by the product of its two alpha indicators."""
    total = 0.0
    for name in model.variables:
        if name in model.w:
            u, j, i, k = model.w[name]
            value = assignment[model.alpha_var(u, j, i)] * assignment[model.alpha_var(u, j + 1, k)]
        else:
            value = assignment[name]
        total += model.objective[name] * value
    return total


def violated_rows(model, assignment):
    return [row.name for row in model.rows if not row.satisfied(assignment)]


def _alpha_matrix(model, assignments):
    """One-hot alpha values (n, n_alpha) for slot assignments, columns in model variable order."""
    A = np.asarray(assignments, dtype=np.int64)
    names = [v for v in model.variables if v in model.alpha]
    cols = {v: c for c, v in enumerate(names)}
    X = np.zeros((A.shape[0], len(names)), dtype=np.int8)
    for name, (u, j, i) in model.alpha.items():
        X[:, cols[name]] = A[:, model.slot_of[(u, j)]] == i
    return X, cols


def induced_assignment_many(model, assignments):
    """Full variable matrix (n, n_vars) for slot assignments, w set to alpha products."""
    Xa, cols = _alpha_matrix(model, assignments)
    X = np.zeros((Xa.shape[0], len(model.variables)), dtype=np.int8)
    for c, name in enumerate(model.variables):
        if name in model.alpha:
            X[:, c] = Xa[:, cols[name]]
        else:
            u, j, i, k = model.w[name]
            X[:, c] = Xa[:, cols[model.alpha_var(u, j, i)]] & Xa[:, cols[model.alpha_var(u, j + 1, k)]]
    return X


def linear_objective_many(model, X):
    # accumulated in variable order, like the scalar paths, so results compare exactly
    total = np.zeros(X.shape[0])
    for c, name in enumerate(model.variables):
        total += model.objective[name] * X[:, c]
    return total


def quadratic_objective_many(model, assignments):
    Xa, cols = _alpha_matrix(model, assignments)
    total = np.zeros(Xa.shape[0])
    for name in model.variables:
        if name in model.alpha:
            value = Xa[:, cols[name]]
        else:
            u, j, i, k = model.w[name]
            value = Xa[:, cols[model.alpha_var(u, j, i)]] * Xa[:, cols[model.alpha_var(u, j + 1, k)]]
        total += model.objective[name] * value
    return total


def rows_satisfied_many(model, X, kinds=None):
    """Mask of variable matrices satisfying every row (optionally only given kinds)."""
    index = {v: c for c, v in enumerate(model.variables)}
    ok = np.ones(X.shape[0], dtype=bool)
    Xf = X.astype(float)
    for row in model.rows:
        if kinds is not None and row.kind not in kinds:
            continue
        lhs = np.zeros(X.shape[0])
        for v, c in row.coefs.items():
            lhs += c * Xf[:, index[v]]
        tol = 1e-9 * max(1.0, abs(row.rhs))
        if row.sense == "<=":
            ok &= lhs <= row.rhs + tol
        elif row.sense == ">=":
            ok &= lhs >= row.rhs - tol
        else:
            ok &= np.abs(lhs - row.rhs) <= tol
    return ok


def to_milp_arrays(model):
    """Dense ``(c, A, lower, upper)`` arrays for handing the model to a generic MILP solver."""
    index = {v: c for c, v in enumerate(model.variables)}
    c = np.array([model.objective[v] for v in model.variables])
    A = np.zeros((len(model.rows), len(model.variables)))
    lo = np.full(len(model.rows), -np.inf)
    hi = np.full(len(model.rows), np.inf)
    for r, row in enumerate(model.rows):
        for v, coef in row.coefs.items():
            A[r, index[v]] += coef
        if row.sense in ("<=", "="):
            hi[r] = row.rhs
        if row.sense in (">=", "="):
            lo[r] = row.rhs
    return c, A, lo, hi


def _fmt(x):
    return repr(float(x))


def _terms(coefs):
    parts = []
    for name, c in coefs.items():
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(c))} {name}")
    if not parts:
        return "0 " + next(iter(coefs), "")
    first = parts[0]
    if first.startswith("+ "):
        parts[0] = first[2:]
    return " ".join(parts)


def _wrap(text, indent=" ", width=200):
    out, line = [], indent
    for tok in text.split(" "):
        if len(line) + len(tok) + 1 > width:
            out.append(line.rstrip())
            line = indent + "  "
        line += tok + " "
    out.append(line.rstrip())
    return "\n".join(out)


def write_lp(model, fh):
    """Write ``model`` in CPLEX LP text format."""
    fh.write("\\ layer placement model\n")
    for i, unit in enumerate(model.unit_ids):
        fh.write(f"\\ unit i{i} = {unit}\n")
    fh.write("Minimize\n")
    obj = {v: model.objective[v] for v in model.variables}
    fh.write(_wrap(f"obj: {_terms(obj)}") + "\n")
    fh.write("Subject To\n")
    for row in model.rows:
        fh.write(_wrap(f"{row.name}: {_terms(row.coefs)} {row.sense} {_fmt(row.rhs)}") + "\n")
    fh.write("Binaries\n")
    for k in range(0, len(model.variables), 8):
        fh.write(" " + " ".join(model.variables[k:k + 8]) + "\n")
    fh.write("End\n")
