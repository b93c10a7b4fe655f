"""
Changing to the laboratory frame
================================

A detector sharply peaked at rest in the ancilla frame is carried into the
laboratory frame by the parity swap followed by the controlled boost.  A
superposition of ancilla momenta makes the detector's proper time tick at a
superposition of rates.
"""

import numpy as np

from udwqrf import CouplingConfig, FockSpace, InteractionHamiltonian, Species, aligned_decay_grids, make_grid
from udwqrf import first_order_emission, s_norm, tensor_with_frame
from udwqrf.fockspace import MASSIVE
from udwqrf.qrf import (
    QrfTransform, apply_S, apply_S_dagger, picture_change_residual, sharply_peaked_state, superposed_time_evolve,
    transform_hint_check,
)

sp = Species(1.0, 0.5)
ex, g, ph = aligned_decay_grids(sp, resolution=4, n_excited=17, n_ground=33, n_photon=16)
base = FockSpace(sp, ex, g, ph)
lab = make_grid(MASSIVE, 2.0, 4, ex.spacing, start=-2)
q = QrfTransform.build(base.with_frame(lab, "lab"), m_A=3.0)
print("aligned:", q.aligned, " lab momenta:", np.round(lab.momenta, 4))
print("ancilla gammas:", np.round(q.gamma_ancilla, 6))

# Unitarity and the inverse on a product state.
chi = np.array([0.6, 0, 0, 0.8j])
x_a = tensor_with_frame(sharply_peaked_state(base, 0.0), chi, q.lab, "lab")
x_l = apply_S(x_a, q)
print("norm after S:", x_l.norm(), "  round trip error:", (apply_S_dagger(x_l, q) - x_a).norm())

# Covariance of the on-shell interaction and the picture-change identity.
print("covariance residual:", transform_hint_check(q, 1.0))
print("picture change residual:", picture_change_residual(q, 1.0, [x_a]))

# Each ancilla branch evolves for its own dilated duration gamma * dtau.
lam, dtau = 0.05, 4.0
out = superposed_time_evolve(x_l, q, 0.0, dtau, lam)
h0 = InteractionHamiltonian(base, lam)
init = sharply_peaked_state(base, 0.0)
for i in np.flatnonzero(np.abs(x_l.amps["E"]).sum(axis=0)):
    t_lab = q.gamma_ancilla[i] * dtau
    print(f"ancilla mode {i}: p = {q.ancilla.momenta[i]:+.4f}  lab duration {t_lab:.6f}  "
          f"s = {s_norm(first_order_emission(init, CouplingConfig(lam, t_lab), h0)):.6f}")
print("photon weight in superposed state:", out.sector_norm2("G"))
