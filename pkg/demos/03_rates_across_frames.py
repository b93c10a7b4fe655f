"""
Transition rates seen from two frames
=====================================

The rate of a static measurement changes between frames by the inverse
Lorentz factor plus a commutator with the gamma operator.  The commutator
drops out when the measurement is diagonal in the ancilla momentum.
"""

import numpy as np

from udwqrf import FockSpace, Species, aligned_decay_grids, make_grid, tensor_with_frame
from udwqrf.fockspace import MASSIVE
from udwqrf.operators import DensityOperator
from udwqrf.qrf import QrfTransform, apply_S, sharply_peaked_state
from udwqrf.rates import build_pi1, build_pi2, rate_transform_residual

sp = Species(1.0, 0.5)
ex, g, ph = aligned_decay_grids(sp, resolution=2, n_excited=9, n_ground=9, n_photon=6)
small = FockSpace(sp, ex, g, ph)
q = QrfTransform.build(small.with_frame(make_grid(MASSIVE, 2.0, 4, ex.spacing, start=-2), "lab"), 3.0)
print("dimension in the ancilla frame:", q.space_A.dim)

chi = np.array([0.3, 0.5, 0.4j, 0.7])
x = tensor_with_frame(sharply_peaked_state(small, 0.0), chi / np.linalg.norm(chi), q.lab, "lab")
rho = DensityOperator.ensemble([(1.0, apply_S(x, q))])

for pi in (build_pi1(q, np.array([0, 0.6, 0.8, 0])), build_pi2(q, np.array([0.6, 0, 0, 0.8j]))):
    r = rate_transform_residual(rho, pi, q, t=1.5, lam=1.0)
    print(f"{r.observable}: lab rate {r.lhs:+.6e}  transformed {r.rhs:+.6e}  residual {r.residual:.1e}")
    print(f"     |commutator term| {r.extra_terms[0]:.3e}  |dS term| {r.extra_terms[1]:.1e}"
          f"  with gamma instead of 1/gamma: {r.literal_gamma_residual:.1e}")

# The finite-difference error is second order in the step.
pi = build_pi2(q, np.array([0.6, 0, 0, 0.8]))
res = [rate_transform_residual(rho, pi, q, t=1.5, lam=1.0, dt=d).residual for d in (0.4, 0.2, 0.1)]
print("residual ratios on halving dt:", [round(a / b, 3) for a, b in zip(res, res[1:])])
