"""Shield transform and the Burkholder functional on a few sample matrices."""
import numpy as np

from isoconvex.energy_core import W_magic_plus, random_glplus
from isoconvex.transforms import BurkholderStar, burkholder_bp, half_magic_minus_one, identity_suite, shield

rng = np.random.default_rng(1)
F = random_glplus(rng, 5)

W = W_magic_plus()
S = shield(W)
print("W(F)      ", np.round(W(F), 6))
print("W##(F)    ", np.round(shield(S)(F), 6))
print("B*# (F)   ", np.round(shield(BurkholderStar())(F), 6))
print("(W+ - 1)/2", np.round(half_magic_minus_one()(F), 6))

for p in (2.0, 3.0, 4.0):
    print(f"B_{p:g}(F) =", np.round(burkholder_bp(F, p), 6))

print("identity suite max defect:", identity_suite(random_glplus(rng, 1000)).max_defect)
