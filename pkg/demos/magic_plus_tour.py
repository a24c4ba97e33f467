"""W_magic^+ = t - log t + log z: rank-one convex on the grid, not polyconvex,
and energy neutral on contracting radial maps."""
import numpy as np

from isoconvex.energy_core import W_magic_plus
from isoconvex.polyconvexity import growth_obstruction
from isoconvex.radial import RadialProfile, constancy_check
from isoconvex.rank_one import check_split

W = W_magic_plus()

rep = check_split(W)
print("rank-one:", rep.verdict.value)
for c in rep.conditions:
    print(f"  {c.id:4s} min margin {c.min_margin: .3e}  equality points {len(c.equality_points)}")

g = growth_obstruction(W)
print("growth:", g.verdict.value, "W(lambda I) at lambda =", g.lambdas[-1], "is", g.values[-1])

fam = [RadialProfile.power(k) for k in (2, 3, 4)] + [RadialProfile.blend([1, 3], [0.5, 0.5])]
cc = constancy_check(W, fam)
for name, m in zip(cc.profiles, cc.margins):
    print(f"radial {name:28s} energy - pi W(I) = {m: .2e}")
print("max |margin|:", np.format_float_scientific(cc.max_abs, 2))
