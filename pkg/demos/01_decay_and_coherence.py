"""
Spontaneous emission and the coherence-sensitive observable
===========================================================

A two-level detector with rest mass 1 and gap 0.5 decays on an aligned
momentum grid.  We compare a detector at rest with a moving one and then ask
whether a binary measurement can tell a coherent superposition of the two
from a mixture.
"""

import numpy as np

from udwqrf import CouplingConfig, FockSpace, Species, aligned_decay_grids, first_order_emission, s_norm
from udwqrf.coherence import coherence_scan, coherence_sensitive, decay_pair

# Grids: rapidity spacing equal to a quarter of the recoil rapidity, so that
# the rest-frame decay lands on nodes.
sp = Species(1.0, 0.5)
ex, g, ph = aligned_decay_grids(sp, resolution=4, n_excited=17, n_ground=33, n_photon=16)
space = FockSpace(sp, ex, g, ph)
rest, moving = ex.index_of(1, 0), ex.snap([0.5])[0]
print("excited momenta used:", ex.momenta[rest], ex.momenta[moving])

# s(t) grows like the squared time window; the moving detector emits a
# little less at equal lab time because its clock runs slow.
lam = 0.05
for t in (1.0, 5.0, 10.0):
    s = [s_norm(first_order_emission(space.basis_state("E", n), CouplingConfig(lam, t))) for n in (rest, moving)]
    print(f"t = {t:5.1f}   s_rest = {s[0]:.6f}   s_moving = {s[1]:.6f}   lam^2 s = {lam**2 * s[0]:.2e}")

# The order-lam part of dQ needs alpha_j and beta_i with i != j.
x1, x2, y1, y2 = decay_pair(space, (rest, moving), CouplingConfig(lam, 5.0))
s1, s2 = s_norm(y1), s_norm(y2)
print("alpha only:", coherence_sensitive((1, 1), (0, 0), s1, s2))
print("cross pair:", coherence_sensitive((1, 0), (0, 1), s1, s2))

# Scan in time with a cross-pair observable.
for t, a, b, dq, _ in coherence_scan(space, (rest, moving), lam, np.linspace(0, 10, 6), (1, 0.5j), (0.3, 1)):
    print(f"t = {t:4.1f}   dQ = {dq.real:+.6e}")
