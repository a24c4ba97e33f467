"""Quasiconvexity probes: a neutral radial family, a null Lagrangian and a
laminate witness for an energy that is not rank-one convex."""
import numpy as np

from isoconvex.energy_core import W_magic_plus, det_energy
from isoconvex.expression import make_split_energy
from isoconvex.harness import ContractingRadial, MollifiedLaminate, TrigBubble, search_violation

cases = [
    ("W_magic_plus / radial", W_magic_plus(), ContractingRadial()),
    ("det / bubble", det_energy(), TrigBubble(K=2, n_cells=4)),
    ("-(t+1/t) - z^2 / laminate", make_split_energy("-(t + 1/t)", "-(z^2)", "synthetic", check_symmetry=False),
     MollifiedLaminate(n_cells=16)),
]
for label, W, fam in cases:
    res = search_violation(W, np.eye(2), fam, budget=120, seed=0, restarts=2)
    print(f"{label:28s} {res.verdict.value:20s} min excess {res.min_excess: .3e} (error {res.error:.1e})")
    if res.refined:
        print(" " * 29 + f"refined x4: {res.refined['excess']: .3e} (error {res.refined['error']:.1e})")
