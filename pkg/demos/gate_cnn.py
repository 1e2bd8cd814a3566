"""A CNN with an early exit: exit probabilities and their effect on latency."""

from layerplace import EvalConventions, PAPER_COMPAT, builtin_fixture, solve
from layerplace.fixtures import fig1b_problem

cnn = builtin_fixture("gc6")
print("layers:", [layer.label for layer in cnn.layers])
print("reach probability p:", cnn.gate.reach_prob)
print("exit probability  g:", [round(g, 12) for g in cnn.gate.exit_prob])

for label, conv in [("as written", EvalConventions()), ("compat", PAPER_COMPAT)]:
    plain = solve(fig1b_problem(cnns=("cnn5",), L=2, conventions=conv))
    gated = solve(fig1b_problem(cnns=("gc6",), L=2, conventions=conv))
    print(f"\n[{label}] L = 2")
    for name, sol in (("cnn5", plain), ("gc6", gated)):
        b = sol.breakdown
        print(f"  {name:5s} t = {b.t * 1e3:7.3f} ms  t_p = {b.t_p * 1e3:7.3f} ms  "
              f"placement {' -> '.join(sol.placement.units[0])}")
