"""Two copies of the 5-layer CNN, with and without their first two layers shared.

A shared layer is stored once: both CNNs must run it on the same unit, and it
counts once against that unit's memory and layer cap.
"""

from layerplace import Infeasible, solve
from layerplace.fixtures import preset_problem

for name in ("fig1b-two-cnn5", "fig1b-two-cnn5-shared"):
    for L in (1, 2):
        problem = preset_problem(name, L=L)
        try:
            sol = solve(problem)
        except Infeasible as exc:
            print(f"{name:24s} L={L}: {type(exc).__name__}: {exc}")
            continue
        print(f"{name:24s} L={L}: t = {sol.objective * 1e3:8.3f} ms  slots {len(problem.slots)}")
        for u, units in enumerate(sol.placement.units):
            print(f"    cnn {u}: {' -> '.join(units)}")
