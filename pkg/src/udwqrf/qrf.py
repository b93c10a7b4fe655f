"""Quantum-reference-frame change between the ancilla rest frame (A) and the laboratory (L).

In the A frame the state carries a laboratory factor (mass ``m_L``); the
transform ``S = P U_D U_E`` boosts detector and photon by the rapidity
``xi(q) = -asinh(q / m_L)`` of each laboratory mode ``q`` and then swaps the
laboratory factor for an ancilla factor of mass ``m_A`` at momentum
``-(m_A / m_L) q``.  On rapidity / log-momentum grids a boost by a whole
number of spacings is an index shift, which makes ``S`` exactly unitary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fockspace import MASSIVE, MASSLESS, SECTOR_AXES, FockSpace, ModeGrid, SectorState, make_grid
from .perturbation import InteractionHamiltonian

MODES = ("exact", "nearest", "linear")
ALIGN_TOL = 1e-9


@lru_cache(maxsize=None)
def _shift_map(grid: ModeGrid, steps: int) -> np.ndarray:
    return grid.shift_map(steps)


def _shift_axis(arr: np.ndarray, axis: int, grid: ModeGrid, steps: int) -> np.ndarray:
    target = _shift_map(grid, int(steps))
    src = np.nonzero(target >= 0)[0]
    out = np.zeros_like(arr)
    a = np.moveaxis(arr, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[target[src]] = a[src]
    return out


def _shift_slab(slab, shifts):
    """Shift every listed axis of ``slab`` by its integer step; ``shifts`` is [(axis, grid, step)]."""
    for ax, grid, step in shifts:
        slab = _shift_axis(slab, ax, grid, step)
    return slab


def _boost_slab(slab, shifts, mode: str):
    """Boost one frame branch; ``shifts`` is [(axis, grid, real shift)].

    ``linear`` interpolates between the two neighbouring lattice boosts of the
    whole configuration, ``(1 - f) S_floor + f S_ceil``; this keeps joint
    configurations on-shell but is not unitary.
    """
    if mode != "linear":
        return _shift_slab(slab, [(a, g, int(np.rint(x))) for a, g, x in shifts])
    fracs = {round(x - np.floor(x), 12) for _, _, x in shifts}
    if len(fracs) > 1:
        raise ValueError("linear boosts need equal detector and photon spacings")
    f = fracs.pop() if fracs else 0.0
    lo = [(a, g, int(np.floor(x))) for a, g, x in shifts]
    out = (1 - f) * _shift_slab(slab, lo)
    if f > 0:
        out = out + f * _shift_slab(slab, [(a, g, st + 1) for a, g, st in lo])
    return out


def ancilla_grid_for(lab: ModeGrid, m_A: float) -> ModeGrid:
    """Mirror image of ``lab`` with mass ``m_A``: ancilla mode ``i`` pairs with lab mode ``n-1-i``."""
    if lab.kind != MASSIVE:
        raise ValueError("the laboratory grid must be a massive rapidity grid")
    start, offset = lab.params["start"], lab.params["offset"]
    return make_grid(MASSIVE, m_A, lab.n, lab.spacing, start=-(start + lab.n - 1), offset=-offset)


@dataclass(frozen=True, eq=False)
class QrfTransform:
    space_A: FockSpace
    space_L: FockSpace
    m_A: float
    m_L: float
    xi: np.ndarray  # boost rapidity per lab mode
    det_shift: np.ndarray  # xi in units of the detector rapidity spacing
    photon_shift: np.ndarray  # xi in units of the photon log spacing
    mode: str = "exact"

    @classmethod
    def build(cls, space_A: FockSpace, m_A: float, mode: str = "exact") -> "QrfTransform":
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not m_A > 0:
            raise ValueError("ancilla mass must be positive")
        if space_A.frame is None or space_A.frame_role != "lab":
            raise ValueError("the ancilla-frame space needs a laboratory factor")
        lab = space_A.frame
        m_L = lab.mass
        if not m_L > 0:
            raise ValueError("laboratory mass must be positive")
        ex, g, ph = space_A.excited, space_A.ground, space_A.photon
        if ex.kind != MASSIVE or g.kind != MASSIVE or ph.kind != MASSLESS:
            raise ValueError("boosts need rapidity detector grids and a log photon grid")
        if not np.isclose(ex.spacing, g.spacing, rtol=1e-14, atol=0):
            raise ValueError("both detector levels need the same rapidity spacing")
        xi = -np.arcsinh(lab.momenta / m_L)
        space_L = space_A.with_frame(ancilla_grid_for(lab, m_A), "ancilla")
        q = cls(space_A, space_L, float(m_A), float(m_L), xi, xi / ex.spacing, xi / ph.spacing, mode)
        if mode == "exact" and not q.aligned:
            raise ValueError(
                f"laboratory momenta are not aligned with the grids (max residual {q.residuals.max():.3g});"
                " use mode='nearest' or 'linear'"
            )
        return q

    @property
    def lab(self) -> ModeGrid:
        return self.space_A.frame

    @property
    def ancilla(self) -> ModeGrid:
        return self.space_L.frame

    @property
    def residuals(self) -> np.ndarray:
        r_det = np.abs(self.det_shift - np.rint(self.det_shift))
        r_ph = np.abs(self.photon_shift - np.rint(self.photon_shift))
        return np.maximum(r_det, r_ph)

    @property
    def aligned(self) -> bool:
        return bool(np.all(self.residuals < ALIGN_TOL))

    def alignment_table(self) -> list[dict]:
        return [
            {"lab_mode": m, "q": float(self.lab.momenta[m]), "xi": float(self.xi[m]),
             "detector_shift": float(self.det_shift[m]), "photon_shift": float(self.photon_shift[m]),
             "residual": float(self.residuals[m])}
            for m in range(self.lab.n)
        ]

    @property
    def gamma_lab(self) -> np.ndarray:
        """gamma of each laboratory mode (A frame, per lab index)."""
        return np.sqrt(1.0 + (self.lab.momenta / self.m_L) ** 2)

    @property
    def gamma_ancilla(self) -> np.ndarray:
        """gamma of each ancilla mode (L frame, per ancilla index)."""
        return np.sqrt(1.0 + (self.ancilla.momenta / self.m_A) ** 2)

    def mirror(self, index):
        return self.lab.n - 1 - np.asarray(index)


def _require(state: SectorState, space: FockSpace, what: str):
    if not space.compatible(state.space):
        raise ValueError(f"state is not bound to the {what} space of this transform")


def parity_swap(state: SectorState, q: QrfTransform) -> SectorState:
    """Relabel the laboratory factor as the mirrored ancilla factor."""
    _require(state, q.space_A, "ancilla-frame")
    return SectorState(q.space_L, {s: a[..., ::-1].copy() for s, a in state.amps.items()}, state.t)


def parity_swap_inverse(state: SectorState, q: QrfTransform) -> SectorState:
    _require(state, q.space_L, "laboratory-frame")
    return SectorState(q.space_A, {s: a[..., ::-1].copy() for s, a in state.amps.items()}, state.t)


def _boost(amps: dict, space: FockSpace, q: QrfTransform, targets, sign: float, frame_order) -> dict:
    out = {}
    for s, arr in amps.items():
        axes = SECTOR_AXES[s]
        new = np.zeros_like(arr)
        for f in range(arr.shape[-1]):
            m = frame_order[f]
            shifts = []
            for ax, name in enumerate(axes):
                kind = "photon" if name == "photon" else "detector"
                if kind in targets:
                    x = q.photon_shift[m] if kind == "photon" else q.det_shift[m]
                    shifts.append((ax, space.grid(name), sign * x))
            new[..., f] = _boost_slab(arr[..., f], shifts, q.mode)
        out[s] = new
    return out


def controlled_boost(state: SectorState, q: QrfTransform, target: str, inverse: bool = False,
                     return_dropped: bool = False):
    """Boost ``target`` (detector or photon) by ``xi(q)`` for every laboratory mode ``q``.

    Works on ancilla-frame states (laboratory factor present).  Weight pushed
    past a grid edge is lost; ``return_dropped`` also returns its fraction.
    """
    if target not in ("detector", "photon"):
        raise ValueError("target must be 'detector' or 'photon'")
    _require(state, q.space_A, "ancilla-frame")
    amps = _boost(state.amps, q.space_A, q, (target,), -1.0 if inverse else 1.0, np.arange(q.lab.n))
    out = SectorState(q.space_A, amps, state.t)
    return (out, _dropped(state, out)) if return_dropped else out


def _dropped(before: SectorState, after: SectorState) -> float:
    n0 = before.norm() ** 2
    return 0.0 if n0 == 0 else max(0.0, 1.0 - after.norm() ** 2 / n0)


def apply_S(state: SectorState, q: QrfTransform, return_dropped: bool = False):
    """``S = P U_D U_E``: ancilla frame to laboratory frame."""
    _require(state, q.space_A, "ancilla-frame")
    boosted = _boost(state.amps, q.space_A, q, ("detector", "photon"), 1.0, np.arange(q.lab.n))
    out = parity_swap(SectorState(q.space_A, boosted, state.t), q)
    return (out, _dropped(state, out)) if return_dropped else out


def apply_S_dagger(state: SectorState, q: QrfTransform, return_dropped: bool = False):
    """Laboratory frame back to the ancilla frame."""
    back = parity_swap_inverse(state, q)
    amps = _boost(back.amps, q.space_A, q, ("detector", "photon"), -1.0, np.arange(q.lab.n))
    out = SectorState(q.space_A, amps, state.t)
    return (out, _dropped(state, out)) if return_dropped else out


def S_matrix(q: QrfTransform) -> np.ndarray:
    """Dense matrix of ``S`` (rows: laboratory-frame space, columns: ancilla-frame space)."""
    dim = q.space_A.dim
    mat = np.zeros((q.space_L.dim, dim), dtype=complex)
    for c in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[c] = 1.0
        mat[:, c] = apply_S(q.space_A.from_vector(e), q).vector()
    return mat


def gamma_operator(space: FockSpace, gammas: np.ndarray, power: float = 1.0) -> np.ndarray:
    """Diagonal of ``gamma^power`` acting on the frame factor, over the flattened space."""
    nf = space.frame.n
    return np.tile(np.asarray(gammas, dtype=float) ** power, space.dim // nf)


def scale_frame(state: SectorState, factors: np.ndarray) -> SectorState:
    return state.map(lambda s, a: a * np.asarray(factors))


def sharply_peaked_state(space: FockSpace, width: float) -> SectorState:
    """Excited detector in a narrow Gaussian around zero momentum, photon vacuum (no frame).

    ``width`` is the momentum spread; below the grid resolution the state is
    the single rest-frame mode.
    """
    ex = space.excited
    rest = ex.snap(0.0)
    st = space.zeros()
    if width <= 0 or width < 0.25 * ex.weights[rest]:
        st.amps["E"][rest] = 1.0
        return st
    amp = np.exp(-(ex.momenta**2) / (4 * width**2)) * np.sqrt(ex.weights / (2 * ex.energies))
    st.amps["E"][...] = amp / np.linalg.norm(amp)
    return st


def rest_partners(h: InteractionHamiltonian, rest: int):
    """One-photon configurations coupled to the excited mode ``rest``."""
    f = h.rotating
    sel = f.det_lower == rest
    return list(zip(f.det_upper[sel].tolist(), f.photon[sel].tolist()))


def transform_hint_check(q: QrfTransform, t: float = 0.0, lab_modes=None, kind: str = "onshell") -> float:
    """Max deviation between ``gamma_A^-1 S H_A S^dag`` and ``H_L`` built directly.

    The comparison runs over the A-frame configurations in which the excited
    detector is at rest (and their one-photon partners) for every laboratory
    mode, i.e. the subspace of the sharply peaked preparation.  ``H_A`` is
    evaluated at proper time ``t / gamma`` of each branch.
    """
    h_a = InteractionHamiltonian(q.space_A, 1.0, kind)
    h_l = InteractionHamiltonian(q.space_L, 1.0, kind)
    rest = q.space_A.excited.snap(0.0)
    if rest < 0 or abs(q.space_A.excited.momenta[rest]) > 1e-12:
        raise ValueError("the excited grid needs a node at zero momentum")
    configs = [("E", (rest,))] + [("G", pc) for pc in rest_partners(h_a, rest)]
    modes = range(q.lab.n) if lab_modes is None else lab_modes
    g_anc = q.gamma_ancilla
    worst = 0.0
    for m in modes:
        tau = t / q.gamma_lab[m]
        for sector, idx in configs:
            b = q.space_A.basis_state(sector, *idx, m)
            lhs = scale_frame(apply_S(h_a.apply(b, tau), q), 1.0 / g_anc)
            rhs = h_l.apply(apply_S(b, q), t)
            worst = max(worst, float(np.max(np.abs((lhs - rhs).vector()))))
    return worst


def superposed_time_evolve(initial: SectorState, q: QrfTransform, tau_i: float, tau_f: float, lam: float,
                           hamiltonian: InteractionHamiltonian | None = None) -> SectorState:
    """First-order laboratory-frame state after ancilla proper time ``tau_f - tau_i``.

    Each ancilla momentum branch is integrated over its own laboratory
    duration ``gamma_pi (tau_f - tau_i)``.
    """
    if tau_f < tau_i:
        raise ValueError("tau_f must not precede tau_i")
    _require(initial, q.space_L, "laboratory-frame")
    h = hamiltonian or InteractionHamiltonian(q.space_L, lam or 1.0)
    psi = h.emission(initial, q.gamma_ancilla * (tau_f - tau_i))
    return initial + psi * lam


# free evolution and the Schroedinger-picture transform


def free_energies_A(q: QrfTransform, sector: str) -> np.ndarray:
    return q.space_A.energies(sector, np.hypot(q.lab.momenta, q.m_L))


def free_energies_L(q: QrfTransform, sector: str) -> np.ndarray:
    return q.space_L.energies(sector, (q.m_L / q.m_A) * np.hypot(q.ancilla.momenta, q.m_A))


def free_evolve(state: SectorState, energies, duration) -> SectorState:
    """``exp(-i H_free duration)``; ``duration`` may vary along the frame axis."""
    return state.map(lambda s, a: a * np.exp(-1j * energies(s) * np.asarray(duration)))


def apply_S_schrodinger(state: SectorState, q: QrfTransform, dtau: float) -> SectorState:
    """``S_S = exp(-i H_L gamma_A dtau) S exp(i H_A dtau)``."""
    x = free_evolve(state, lambda s: free_energies_A(q, s), -dtau)
    x = apply_S(x, q)
    return free_evolve(x, lambda s: free_energies_L(q, s), q.gamma_ancilla * dtau)


def picture_change_residual(q: QrfTransform, dtau: float, states) -> float:
    """Max over ``states`` of ``|S x - exp(i H_L gamma dtau) S_S exp(-i H_A dtau) x|``."""
    worst = 0.0
    for x in states:
        y = free_evolve(x, lambda s: free_energies_A(q, s), dtau)
        y = apply_S_schrodinger(y, q, dtau)
        y = free_evolve(y, lambda s: free_energies_L(q, s), -q.gamma_ancilla * dtau)
        worst = max(worst, (apply_S(x, q) - y).norm())
    return worst


def extended_symmetry_residual(q: QrfTransform, dtau: float, states, h: float = 1e-4) -> float:
    """Check ``H_L = gamma^-1 [S_S H_A S_S^dag + i dS_S/dtau S_S^dag]`` on ``states`` (L frame).

    The tau-derivative is a central difference with step ``h``.
    """
    worst = 0.0
    g_inv = 1.0 / q.gamma_ancilla
    for y in states:
        lhs = y.map(lambda s, a: free_energies_L(q, s) * a)
        x = apply_S_schrodinger_dagger(y, q, dtau)
        hx = x.map(lambda s, a: free_energies_A(q, s) * a)
        term1 = apply_S_schrodinger(hx, q, dtau)
        deriv = (apply_S_schrodinger(x, q, dtau + h) - apply_S_schrodinger(x, q, dtau - h)) * (1j / (2 * h))
        rhs = scale_frame(term1 + deriv, g_inv)
        worst = max(worst, (lhs - rhs).norm() / max(1.0, lhs.norm()))
    return worst


def apply_S_schrodinger_dagger(state: SectorState, q: QrfTransform, dtau: float) -> SectorState:
    x = free_evolve(state, lambda s: free_energies_L(q, s), -q.gamma_ancilla * dtau)
    x = apply_S_dagger(x, q)
    return free_evolve(x, lambda s: free_energies_A(q, s), dtau)


def support_mask(q: QrfTransform) -> dict:
    """Per-sector mask of ancilla-frame configurations that ``S`` keeps on the grids."""
    ones = q.space_A.zeros().map(lambda s, a: np.ones_like(a))
    back = apply_S_dagger(apply_S(ones, q), q)
    return {s: np.abs(a) > 0.5 for s, a in back.amps.items()}
