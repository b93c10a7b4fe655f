"""First-order time-dependent perturbation theory for the detector-photon coupling.

Matrix elements between unit-normalized modes follow from the continuum
resonant Hamiltonian with momentum conservation ``p' = p + k``: the
integration runs over the ground-detector momentum ``p`` and photon momentum
``k`` while the excited-detector momentum is the dependent variable.  The
discrete element of ``b0^dag_p a^dag_k b1_{p+k}`` is therefore

    lam / sqrt(2 pi) * exp(i dw t) / sqrt(8 w0 |k| w1) * sqrt(W_p W_k / W_{p+k})

with ``dw = w0 + |k| - w1`` and ``W`` the mode weights; ``p + k`` is snapped
to the nearest excited-grid node and the term dropped when it leaves the grid.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .fockspace import FockSpace, ModeGrid, SectorState

KINDS = ("resonant", "onshell", "rec")
_SERIES_CUTOFF = 1e-8
_ONSHELL_TOL = 1e-9


@dataclass(frozen=True)
class CouplingConfig:
    lam: float
    t: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("interaction duration must be non-negative")


def time_window(delta_omega, t):
    """``int_0^t exp(i dw t') dt'`` with a series branch near resonance."""
    dw = np.asarray(delta_omega, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time window needs t >= 0")
    x = dw * t
    small = np.abs(x) < _SERIES_CUTOFF
    # (e^{ix} - 1) / (i dw) written without the cancellation in e^{ix} - 1
    exact = t * np.exp(0.5j * x) * np.sinc(x / (2 * np.pi))
    series = t * (1.0 + 0.5j * x)
    out = np.where(small, series, exact)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class _Couplings:
    """One family of transitions ``low -> high`` with unit-coupling elements."""

    lower: str  # sector losing the detector excitation or gaining it
    upper: str
    det_lower: np.ndarray  # detector index in the lower (photon-vacuum) sector
    det_upper: np.ndarray  # detector index in the one-photon sector
    photon: np.ndarray
    element: np.ndarray
    detuning: np.ndarray  # E(one-photon config) - E(vacuum config)


def _pair_grid(a: ModeGrid, b: ModeGrid):
    ia, ib = np.meshgrid(np.arange(a.n), np.arange(b.n), indexing="ij")
    return ia.ravel(), ib.ravel()


def _element(w_lo_e, k, w_hi_e, wts_lo, wt_k, wts_hi):
    # wts_lo belongs to the dependent (annihilated) detector mode
    c = 1.0 / np.sqrt(2 * np.pi) / np.sqrt(8 * w_lo_e * np.abs(k) * w_hi_e)
    return c * np.sqrt(wts_hi * wt_k / wts_lo)


def _rotating(space: FockSpace, energies: dict) -> tuple[_Couplings, np.ndarray]:
    g, ph, ex = space.ground, space.photon, space.excited
    n0, j = _pair_grid(g, ph)
    p_target = g.momenta[n0] + ph.momenta[j]
    n1 = ex.snap(p_target)
    ok = n1 >= 0
    dropped = np.stack([n0[~ok], j[~ok]], axis=1)
    n0, j, n1 = n0[ok], j[ok], n1[ok]
    w0, w1, k = energies["ground"][n0], energies["excited"][n1], ph.momenta[j]
    elem = _element(w1, k, w0, ex.weights[n1], ph.weights[j], g.weights[n0])
    dw = w0 + np.abs(k) - w1
    return _Couplings("E", "G", n1, n0, j, elem, dw), dropped


def _counter(space: FockSpace, energies: dict) -> _Couplings:
    g, ph, ex = space.ground, space.photon, space.excited
    n1, j = _pair_grid(ex, ph)
    n0 = g.snap(ex.momenta[n1] + ph.momenta[j])
    ok = n0 >= 0
    n1, j, n0 = n1[ok], j[ok], n0[ok]
    w0, w1, k = energies["ground"][n0], energies["excited"][n1], ph.momenta[j]
    elem = _element(w0, k, w1, g.weights[n0], ph.weights[j], ex.weights[n1])
    dw = w1 + np.abs(k) - w0
    return _Couplings("V", "X", n0, n1, j, elem, dw)


class InteractionHamiltonian:
    """Interaction-picture coupling restricted to the truncated sectors.

    kind ``resonant`` keeps the rotating-wave terms (emission / absorption),
    ``onshell`` additionally keeps only exactly energy-conserving elements,
    ``rec`` adds the counter-rotating terms acting between the V and X
    sectors.  The frame particle, if any, is a spectator.

    ``energies`` optionally replaces the detector dispersion per grid
    (keys ``excited`` / ``ground``), e.g. by a constant rest energy.
    """

    def __init__(self, space: FockSpace, lam: float = 1.0, kind: str = "resonant", energies: dict | None = None):
        if kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {kind!r}")
        self.space, self.lam, self.kind = space, float(lam), kind
        en = {"excited": space.excited.energies, "ground": space.ground.energies}
        for key, val in (energies or {}).items():
            en[key] = np.broadcast_to(np.asarray(val, dtype=float), en[key].shape)
        rot, dropped = _rotating(space, en)
        self.dropped_pairs = dropped
        if kind == "onshell":
            mom = space.ground.momenta[rot.det_upper] + space.photon.momenta[rot.photon]
            mom_err = np.abs(mom - space.excited.momenta[rot.det_lower])
            scale = 1.0 + np.abs(mom)
            keep = (mom_err <= _ONSHELL_TOL * scale) & (np.abs(rot.detuning) <= _ONSHELL_TOL * scale)
            rot = _Couplings(
                "E", "G", rot.det_lower[keep], rot.det_upper[keep], rot.photon[keep],
                rot.element[keep], rot.detuning[keep],
            )
        self.families = [rot]
        if kind == "rec":
            self.families.append(_counter(space, en))

    @property
    def rotating(self) -> _Couplings:
        return self.families[0]

    def elements(self, t: float, family: int = 0) -> np.ndarray:
        f = self.families[family]
        return self.lam * f.element * np.exp(1j * f.detuning * t)

    def apply(self, state: SectorState, t: float) -> SectorState:
        if not self.space.compatible(state.space):
            raise ValueError("state is bound to different grids")
        out = state.space.zeros()
        for i, f in enumerate(self.families):
            if f.lower not in state.amps or f.upper not in state.amps:
                continue
            h = self.elements(t, i)
            h = h.reshape(h.shape + (1,) * (state.amps[f.lower].ndim - 1))
            np.add.at(out.amps[f.upper], (f.det_upper, f.photon), h * state.amps[f.lower][f.det_lower])
            np.add.at(out.amps[f.lower], f.det_lower, h.conj() * state.amps[f.upper][f.det_upper, f.photon])
        return SectorState(out.space, out.amps, t)

    def pattern(self, space: FockSpace | None = None):
        """``(rows, cols, element, detuning)`` of the upper triangle over the flattened space.

        ``H(t)[rows, cols] = lam * element * exp(i detuning t)``; the rest is its conjugate.
        """
        space = space or self.space
        sl = space.sector_slices()
        nf = space.frame.n if space.frame is not None else 1
        parts = []
        for f in self.families:
            if f.lower not in sl or f.upper not in sl:
                continue
            lo_shape, up_shape = space.shape(f.lower), space.shape(f.upper)
            for fi in range(nf):
                lo_idx = (f.det_lower,) + ((np.full_like(f.det_lower, fi),) if space.frame is not None else ())
                up_idx = (f.det_upper, f.photon) + ((np.full_like(f.photon, fi),) if space.frame is not None else ())
                rows = sl[f.upper].start + np.ravel_multi_index(up_idx, up_shape)
                cols = sl[f.lower].start + np.ravel_multi_index(lo_idx, lo_shape)
                parts.append((rows, cols, f.element, f.detuning))
        if not parts:
            e = np.zeros(0)
            return e.astype(int), e.astype(int), e, e
        return tuple(np.concatenate(x) for x in zip(*parts))

    def dense(self, t: float, space: FockSpace | None = None) -> np.ndarray:
        """Dense matrix on the flattened sector space (frame particle as identity)."""
        space = space or self.space
        rows, cols, elem, det = self.pattern(space)
        h = self.lam * elem * np.exp(1j * det * t)
        mat = np.zeros((space.dim, space.dim), dtype=complex)
        np.add.at(mat, (rows, cols), h)
        np.add.at(mat, (cols, rows), h.conj())
        return mat

    def emission(self, initial: SectorState, duration) -> SectorState:
        """Coefficient of ``lam`` in the first-order state, ``-i/lam int_0^T H dt |initial>``.

        ``duration`` may be an array over the frame axis; each frame mode then
        uses its own integration window.
        """
        if self.lam == 0:
            raise ValueError("coupling must be non-zero to extract the first-order coefficient")
        f = self.rotating
        amp_e = initial.amps["E"]
        extra = amp_e.ndim - 1
        dur = np.asarray(duration, dtype=float)
        if dur.ndim == 0:
            window = time_window(f.detuning, dur).reshape(f.detuning.shape + (1,) * extra)
        else:
            window = time_window(f.detuning[:, None], dur[None, :])
        coeff = -1j * f.element.reshape(f.element.shape + (1,) * extra) * window
        out = initial.space.zeros()
        np.add.at(out.amps["G"], (f.det_upper, f.photon), coeff * amp_e[f.det_lower])
        t_stamp = float(dur) if dur.ndim == 0 else float(np.max(dur))
        return SectorState(out.space, out.amps, t_stamp)

    def emission_dropped_weight(self, initial: SectorState, t: float) -> float:
        """Fraction of first-order emission weight lost at the grid edges.

        The reference weight of each (excited mode, photon mode) pair uses the
        exact recoil momentum; a pair counts as dropped when that recoil has
        no ground-grid node within half a spacing.
        """
        sp = self.space
        ex, g, ph = sp.excited, sp.ground, sp.photon
        pop = np.abs(initial.amps["E"]) ** 2
        pop = pop.reshape(ex.n, -1).sum(axis=1)
        n1, j = _pair_grid(ex, ph)
        p_rec = ex.momenta[n1] - ph.momenta[j]
        w0 = np.hypot(p_rec, g.mass)
        w1, k = ex.energies[n1], ph.momenta[j]
        ref = pop[n1] * ph.weights[j] / (2 * np.pi * 8 * w0 * np.abs(k) * w1)
        ref = ref * np.abs(time_window(w0 + np.abs(k) - w1, t)) ** 2
        total = ref.sum()
        if total == 0:
            return 0.0
        lost = g.snap(p_rec) < 0
        return float(ref[lost].sum() / total)


_CACHE: "weakref.WeakKeyDictionary[FockSpace, dict]" = weakref.WeakKeyDictionary()


def hamiltonian_for(space: FockSpace, kind: str = "resonant", lam: float = 1.0) -> InteractionHamiltonian:
    per_space = _CACHE.setdefault(space, {})
    key = (kind, float(lam))
    if key not in per_space:
        per_space[key] = InteractionHamiltonian(space, lam, kind)
    return per_space[key]


def apply_hint_res(state: SectorState, t_eval: float, lam: float = 1.0) -> SectorState:
    return hamiltonian_for(state.space, "resonant", lam).apply(state, t_eval)


def apply_hint_rec(state: SectorState, t_eval: float, lam: float = 1.0) -> SectorState:
    return hamiltonian_for(state.space, "rec", lam).apply(state, t_eval)


def first_order_emission(
    initial: SectorState, cfg: CouplingConfig, hamiltonian: InteractionHamiltonian | None = None
) -> SectorState:
    """The lam-coefficient ``|psi(t)>`` of the first-order evolved state."""
    for s, a in initial.amps.items():
        if s != "E" and np.any(a != 0):
            raise ValueError("first-order emission starts from the excited, photon-vacuum sector")
    h = hamiltonian or hamiltonian_for(initial.space, "resonant", cfg.lam or 1.0)
    return h.emission(initial, cfg.t)


def s_norm(psi: SectorState) -> float:
    return psi.norm() ** 2
