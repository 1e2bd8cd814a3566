"""Walk through the 11-unit example network with the 5-layer CNN.

Shows hop distances, the cost of a hand-made placement, and what the exact
solver finds under each evaluation convention.
"""

from layerplace import EvalConventions, PAPER_COMPAT, Placement, check_feasibility, evaluate, solve
from layerplace.fixtures import FIG1C_PLACEMENT, fig1b_problem


def ms(x):
    return f"{x * 1e3:8.3f} ms"


problem = fig1b_problem(L=1)
topo = problem.topology
print("units:", ", ".join(f"{u} ({problem.unit_classes[u].name})" for u in problem.unit_ids))
print("hops from the sink:", {u: topo.hops(u, "f") for u in problem.unit_ids})

hand = Placement([list(FIG1C_PLACEMENT)])
print("\nhand-made placement:", " -> ".join(FIG1C_PLACEMENT))
print("violations:", check_feasibility(hand, problem) or "none")

for label, conv in [("equations as written", EvalConventions()),
                    ("compat conventions", PAPER_COMPAT),
                    ("transmission only", EvalConventions(include_processing=False))]:
    p = problem.replace(eval_conventions=conv)
    b = evaluate(hand, p)
    sol = solve(p)
    print(f"\n[{label}]")
    print(f"  hand-made   t = {ms(b.t)}  (t_t {ms(b.t_t)}, t_p {ms(b.t_p)})")
    print(f"  optimum     t = {ms(sol.objective)}  placement {' -> '.join(sol.placement.units[0])}")
    print(f"  search      {sol.stats['nodes']} nodes, {sol.stats['pruned']} pruned")

# with more layers allowed per unit, the optimum can only improve
for L in (1, 2, 3, 5):
    sol = solve(problem.replace(layers_per_unit_cap=L))
    print(f"L = {L}: t = {ms(sol.objective)}  {' -> '.join(sol.placement.units[0])}")
