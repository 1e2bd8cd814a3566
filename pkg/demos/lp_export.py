"""Export the linear model of a small problem and solve it with an external MILP solver.

The LP text is what ``layerplace export-lp`` writes. If scipy is installed the
same model is solved with scipy.optimize.milp and compared with branch-and-bound.
"""

import numpy as np

from layerplace import linearize, solve
from layerplace.fixtures import fig1b_problem
from layerplace.linearize import to_milp_arrays

problem = fig1b_problem(L=2)
model = linearize(problem)
text = model.to_lp()
print(f"{len(model.variables)} binaries, {len(model.rows)} rows; first lines of the LP file:")
print("\n".join(text.splitlines()[:8]))

try:
    from scipy.optimize import Bounds, LinearConstraint, milp
except ImportError:
    print("scipy not installed; skipping the MILP solve")
else:
    c, A, lo, hi = to_milp_arrays(model)
    res = milp(c, constraints=LinearConstraint(A, lo, hi), integrality=np.ones_like(c), bounds=Bounds(0, 1))
    print(f"\nMILP optimum      {res.fun * 1e3:.6f} ms")
    print(f"branch-and-bound  {solve(problem).objective * 1e3:.6f} ms")
