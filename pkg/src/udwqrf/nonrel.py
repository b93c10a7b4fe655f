"""Pseudo-position states and the approach to the first-quantized detector model.

On a uniform momentum grid the one-particle states

    |x, a> = sum_p (2 pi)^-1/2 sqrt(dp) e^{i t w_pa} e^{-i p x} / sqrt(2 w_pa) |p, a>

are Fourier transforms up to the ``1/sqrt(2 w)`` factor.  With ``w``
replaced by the rest energy ``m + E_a`` they become band-limited position
eigenstates, and the counter-rotating coupling restricted to one detector
quantum turns into ``lam sum_x dx |x,a><x,a'| (x) Phi(x)``.  Positions live on
the conjugate lattice ``x_j = 2 pi j / (N dp)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fockspace import UNIFORM, FockSpace, ModeGrid, SectorState, inner, make_grid
from .kinematics import Species
from .perturbation import InteractionHamiltonian

LEVELS = {"ground": ("V", "ground", 0), "excited": ("E", "excited", 1)}
MASS_SWEEP = (3.0, 10.0, 30.0, 100.0)


def nonrel_space(mass: float, gap: float, p_max: float, n_modes: int = 16, n_photon: int | None = None) -> FockSpace:
    """Uniform grids: detector momenta at half-integer multiples of ``dp = 2 p_max / n_modes``
    inside ``[-p_max, p_max]``; photons at the non-zero integer multiples up to ``n_photon / 2``.
    Momentum conservation then lands on nodes exactly.
    """
    if n_modes % 2:
        raise ValueError("n_modes must be even")
    n_photon = n_modes if n_photon is None else n_photon
    if n_photon % 2 or n_photon < 2:
        raise ValueError("n_photon must be a positive even number")
    sp = Species(mass, gap)
    dp = 2.0 * p_max / n_modes
    excited = make_grid(UNIFORM, sp.level_mass(1), n_modes, dp, start=-(n_modes // 2), offset=0.5)
    ground = make_grid(UNIFORM, sp.level_mass(0), n_modes, dp, start=-(n_modes // 2), offset=0.5)
    j = n_photon // 2
    photon = make_grid(UNIFORM, 0.0, 2 * j + 1, dp, start=-j, exclude_zero=True)
    return FockSpace(sp, excited, ground, photon, sectors=("E", "G", "V", "X"))


def rest_energies(space: FockSpace) -> dict:
    """The constant-energy surrogate ``w = m + E_a`` for each level."""
    sp = space.species
    return {"excited": sp.level_mass(1), "ground": sp.level_mass(0)}


def position_lattice(grid: ModeGrid, n_points: int | None = None) -> tuple[np.ndarray, float]:
    """Conjugate lattice ``x_j = 2 pi j / (N dp)`` spanning one period; returns ``(x, dx)``."""
    n = grid.n if n_points is None else n_points
    dx = 2 * np.pi / (n * grid.spacing)
    return np.arange(n) * dx, dx


def position_kernel(grid: ModeGrid, xs, t: float = 0.0, omega=None) -> np.ndarray:
    """``A[j, n] = <p_n | x_j>`` for the pseudo-position states; ``omega`` overrides the dispersion."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    w = grid.energies if omega is None else np.broadcast_to(np.asarray(omega, dtype=float), grid.momenta.shape)
    amp = np.sqrt(grid.weights / (2 * np.pi)) * np.exp(1j * t * w) / np.sqrt(2 * w)
    return amp[None, :] * np.exp(-1j * np.outer(xs, grid.momenta))


@dataclass(frozen=True, eq=False)
class PseudoPositionState:
    x: float
    level: str
    t: float
    state: SectorState
    omega: float | None = None

    def shifted(self, delta: float) -> "PseudoPositionState":
        """Translate by ``delta``: each mode picks up ``exp(-i p delta)``."""
        sector, axis, _ = LEVELS[self.level]
        p = self.state.space.grid(axis).momenta
        phase = np.exp(-1j * p * delta)
        amps = {s: (a * phase if s == sector else a.copy()) for s, a in self.state.amps.items()}
        return PseudoPositionState(self.x + delta, self.level, self.t, SectorState(self.state.space, amps, self.t),
                                   self.omega)

    def overlap(self, other: "PseudoPositionState") -> complex:
        return inner(self.state, other.state)


def pseudo_position_state(x: float, level: str, t: float, space: FockSpace, omega: float | None = None
                          ) -> PseudoPositionState:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {tuple(LEVELS)}")
    sector, axis, _ = LEVELS[level]
    if sector not in space.sectors:
        raise ValueError(f"the space has no {sector} sector")
    st = space.zeros()
    st.amps[sector][...] = position_kernel(space.grid(axis), [x], t, omega)[0]
    return PseudoPositionState(float(x), level, float(t), SectorState(space, st.amps, float(t)), omega)


def overlap_matrix(grid: ModeGrid, xs, t: float = 0.0, omega=None) -> np.ndarray:
    """``G[j, k] = <x_j | x_k>``."""
    a = position_kernel(grid, xs, t, omega)
    return a.conj() @ a.T


def _normalized(g: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.abs(np.diag(g)))
    return g / np.outer(d, d)


def locality_defect(space: FockSpace, level: str = "ground", t: float = 0.0, omega=None) -> float:
    """Frobenius distance, per lattice point, between the normalized overlap matrix on the
    conjugate lattice and the band-limited kernel obtained at constant energy."""
    grid = space.grid(LEVELS[level][1])
    xs, _ = position_lattice(grid)
    ideal = _normalized(overlap_matrix(grid, xs, t, rest_energies(space)[level]))
    g = _normalized(overlap_matrix(grid, xs, t, omega))
    return float(np.linalg.norm(g - ideal) / np.sqrt(len(xs)))


def position_locality_defect(mass_ratios=MASS_SWEEP, p_max: float = 1.0, n_modes: int = 16, gap_ratio: float = 0.5,
                             level: str = "ground") -> np.ndarray:
    """Locality defect along a mass sweep ``m = ratio * p_max`` with ``Omega = gap_ratio * p_max``."""
    return np.array([
        locality_defect(nonrel_space(r * p_max, gap_ratio * p_max, p_max, n_modes), level) for r in mass_ratios
    ])


def position_resolution(grid: ModeGrid, omega=None, n_points: int | None = None, t: float = 0.0) -> np.ndarray:
    """``sum_j dx |x_j><x_j|`` in the mode basis."""
    xs, dx = position_lattice(grid, n_points or 8 * grid.n)
    a = position_kernel(grid, xs, t, omega)
    return dx * (a.T @ a.conj())


def field_kernel(photon: ModeGrid, xs, t: float) -> np.ndarray:
    """``phi[j, k] = <k| Phi(x_j, t) |0>``."""
    k = photon.momenta
    amp = np.sqrt(photon.weights / (2 * np.pi)) * np.exp(1j * t * np.abs(k)) / np.sqrt(2 * np.abs(k))
    return amp[None, :] * np.exp(-1j * np.outer(xs, k))


def first_quantized_hint(space: FockSpace, lam: float, t: float, n_points: int | None = None) -> np.ndarray:
    """Dense ``lam sum_x dx sum_{a != a'} |x,a><x,a'| (x) Phi(x)`` at constant level energies."""
    g, e, ph = space.ground, space.excited, space.photon
    xs, dx = position_lattice(g, n_points or 8 * g.n)
    en = rest_energies(space)
    a0 = position_kernel(g, xs, t, en["ground"])
    a1 = position_kernel(e, xs, t, en["excited"])
    phi = field_kernel(ph, xs, t)
    sl = space.sector_slices()
    h = np.zeros((space.dim, space.dim), dtype=complex)
    # ground + photon <- excited, and excited + photon <- ground
    ge = lam * dx * np.einsum("xa,xb,xk->akb", a0, a1.conj(), phi).reshape(-1, e.n)
    xv = lam * dx * np.einsum("xb,xa,xk->bka", a1, a0.conj(), phi).reshape(-1, g.n)
    h[sl["G"], sl["E"]] = ge
    h[sl["X"], sl["V"]] = xv
    return h + h.conj().T - np.diag(np.diag(h).conj())


def recovered_hint(space: FockSpace, lam: float, t: float, constant_energy: bool = False) -> np.ndarray:
    """Counter-rotating coupling restricted to one detector quantum, as a dense matrix."""
    h = InteractionHamiltonian(space, lam, "rec", rest_energies(space) if constant_energy else None)
    return h.dense(t)


def compare_hint_forms(mass: float, lam: float = 1.0, p_max: float = 1.0, n_modes: int = 16, gap: float | None = None,
                       t: float = 1.0, constant_energy: bool = False) -> float:
    """Relative spectral-norm distance between the grid coupling and the first-quantized one."""
    gap = 0.5 * p_max if gap is None else gap
    space = nonrel_space(mass, gap, p_max, n_modes)
    ref = first_quantized_hint(space, lam, t)
    h = recovered_hint(space, lam, t, constant_energy)
    return float(np.linalg.norm(h - ref, 2) / np.linalg.norm(ref, 2))


def nonrel_sweep(mass_ratios=MASS_SWEEP, p_max: float = 1.0, n_modes: int = 16, gap_ratio: float = 0.5,
                 lam: float = 1.0, t: float = 1.0) -> list[tuple[float, float, float]]:
    """Rows ``(mass_ratio, locality_defect, hint_deviation)``."""
    rows = []
    for r in mass_ratios:
        space = nonrel_space(r * p_max, gap_ratio * p_max, p_max, n_modes)
        dev = compare_hint_forms(r * p_max, lam, p_max, n_modes, gap_ratio * p_max, t)
        rows.append((float(r), locality_defect(space), dev))
    return rows
