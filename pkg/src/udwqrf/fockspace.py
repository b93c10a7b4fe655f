"""Truncated Fock sectors over discretized 1D momentum grids.

Continuum momentum eigenstates are replaced by unit-normalized single-mode
states.  A continuum wavefunction ``f(p)`` with the covariant measure
``dp / sqrt(2 omega)`` becomes the discrete amplitude
``f(p_n) sqrt(w_n) / sqrt(2 omega_n)`` where ``w_n`` is the momentum width of
mode ``n``; all norms are then plain l2 norms.

Sectors (one detector quantum, at most one photon):

===  ==================================  ===================
key  content                             amplitude axes
===  ==================================  ===================
E    excited detector, photon vacuum     (excited,)
G    ground detector, one photon         (ground, photon)
V    ground detector, photon vacuum      (ground,)
X    excited detector, one photon        (excited, photon)
===  ==================================  ===================

An optional frame particle (laboratory or ancilla) adds a trailing axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .kinematics import Species

MASSIVE = "massive-rapidity"
MASSLESS = "massless-log"
UNIFORM = "uniform"
GRID_KINDS = (MASSIVE, MASSLESS, UNIFORM)

SECTOR_AXES = {"E": ("excited",), "G": ("ground", "photon"), "V": ("ground",), "X": ("excited", "photon")}
FRAME_ROLES = ("lab", "ancilla")


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """A finite list of momentum modes with measure weights.

    ``lattice`` holds the integer lattice coordinate of each mode along its
    natural parameter (rapidity for massive grids, log|k| per branch for
    massless ones) and ``param`` the parameter value itself.
    """

    kind: str
    mass: float
    spacing: float
    momenta: np.ndarray
    weights: np.ndarray
    param: np.ndarray
    lattice: np.ndarray
    branch: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.momenta)

    @property
    def energies(self) -> np.ndarray:
        return np.hypot(self.momenta, self.mass)

    def same_as(self, other: "ModeGrid") -> bool:
        return self is other or (
            self.kind == other.kind
            and self.mass == other.mass
            and self.n == other.n
            and np.array_equal(self.momenta, other.momenta)
        )

    def index_of(self, branch: int, lattice: int) -> int:
        """Mode index for a lattice coordinate, -1 if absent."""
        hit = np.nonzero((self.branch == branch) & (self.lattice == lattice))[0]
        return int(hit[0]) if hit.size else -1

    def snap(self, p) -> np.ndarray:
        """Index of the node nearest to each momentum ``p`` (within half a spacing), else -1.

        Distances are measured in the grid's own parameter (rapidity for
        massive grids, log|k| per branch for photons, momentum for uniform).
        """
        p = np.asarray(p, dtype=float)
        start, offset = self.params.get("start", 0), self.params.get("offset", 0.0)
        if self.kind == MASSIVE:
            x = np.arcsinh(p / self.mass) / self.spacing - offset - start
            lo, hi = 0, self.n - 1
            idx = np.rint(x).astype(int)
            ok = (idx >= lo) & (idx <= hi) & (np.abs(x - idx) <= 0.5 + 1e-12)
            return np.where(ok, idx, -1)
        if self.kind == UNIFORM:
            x = p / self.spacing - offset
            lat = np.rint(x).astype(int)
            lookup = {int(l): i for i, l in enumerate(self.lattice)}
            flat = np.array([lookup.get(int(l), -1) for l in lat.ravel()], dtype=int).reshape(lat.shape)
            return np.where(np.abs(x - lat) <= 0.5 + 1e-12, flat, -1)
        out = np.full(p.shape, -1, dtype=int)
        nz = p != 0
        u = np.log(np.abs(np.where(nz, p, 1.0)) / self.params["k_min"]) / self.spacing
        lat = np.rint(u).astype(int)
        for b in (-1, 1):
            sel = nz & (np.sign(p) == b)
            lookup = {int(l): i for i, (bb, l) in enumerate(zip(self.branch, self.lattice)) if bb == b}
            for pos in zip(*np.nonzero(sel)):
                if abs(u[pos] - lat[pos]) <= 0.5 + 1e-12:
                    out[pos] = lookup.get(int(lat[pos]), -1)
        return out

    def shift_map(self, steps: int) -> np.ndarray:
        """Target index of every mode after a boost by ``steps`` lattice spacings.

        Massive modes move by ``steps`` in rapidity; photons on the k>0 branch
        move up in log|k| and on the k<0 branch down.  Modes pushed past the
        grid edge map to -1.
        """
        if self.kind == UNIFORM:
            raise ValueError("uniform grids do not support boosts")
        moved = self.lattice + self.branch * steps if self.kind == MASSLESS else self.lattice + steps
        lookup = {(int(b), int(l)): i for i, (b, l) in enumerate(zip(self.branch, self.lattice))}
        return np.array([lookup.get((int(b), int(l)), -1) for b, l in zip(self.branch, moved)], dtype=int)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "spacing": self.spacing, "params": dict(self.params)}


def make_grid(
    kind: str,
    mass: float | Species = 0.0,
    n_modes: int = 16,
    spacing: float = 0.1,
    *,
    k_min: float | None = None,
    start: int | None = None,
    offset: float = 0.0,
    branches: str = "both",
    exclude_zero: bool = False,
) -> ModeGrid:
    """Build a momentum grid.

    massive-rapidity: ``eta_n = (start + n + offset) * spacing``, ``p = m sinh eta``,
    weight ``omega * spacing``.  ``start`` defaults to centring the grid on
    ``eta = 0``.

    massless-log: ``n_modes`` per branch, ``|k| = k_min * exp(n * spacing)``,
    weight ``|k| * spacing``; ``branches`` is one of ``positive``,
    ``negative``, ``both``.

    uniform: ``p = (start + n + offset) * spacing`` with constant weight; used
    for the nonrelativistic-limit studies.
    """
    if isinstance(mass, Species):
        mass = mass.rest_mass
    if kind not in GRID_KINDS:
        raise ValueError(f"unknown grid kind {kind!r}")
    if n_modes < 2:
        raise ValueError("a grid needs at least two modes")
    if not spacing > 0:
        raise ValueError("grid spacing must be positive")
    if start is None:
        start = -((n_modes - 1) // 2)
    params = {"mass": float(mass), "start": int(start), "offset": float(offset), "n_modes": int(n_modes)}

    if kind == MASSIVE:
        if not mass > 0:
            raise ValueError("massive-rapidity grids need a positive mass")
        lattice = start + np.arange(n_modes)
        eta = (lattice + offset) * spacing
        momenta = mass * np.sinh(eta)
        weights = mass * np.cosh(eta) * spacing
        branch = np.ones(n_modes, dtype=int)
        param = eta
    elif kind == MASSLESS:
        if k_min is None or not k_min > 0:
            raise ValueError("massless-log grids need k_min > 0")
        if branches not in ("positive", "negative", "both"):
            raise ValueError(f"unknown branch selection {branches!r}")
        params = {"k_min": float(k_min), "branches": branches, "n_modes": int(n_modes)}
        n_idx = np.arange(n_modes)
        parts = []
        if branches in ("negative", "both"):
            parts.append((-np.ones(n_modes, dtype=int), n_idx[::-1]))
        if branches in ("positive", "both"):
            parts.append((np.ones(n_modes, dtype=int), n_idx))
        branch = np.concatenate([b for b, _ in parts])
        lattice = np.concatenate([l for _, l in parts])
        param = np.log(k_min) + lattice * spacing
        momenta = branch * np.exp(param)
        weights = np.abs(momenta) * spacing
        mass = 0.0
    else:
        lattice = start + np.arange(n_modes)
        momenta = (lattice + offset) * spacing
        if exclude_zero:
            keep = np.abs(momenta) > 0.5 * spacing * 1e-9
            lattice, momenta = lattice[keep], momenta[keep]
        weights = np.full(len(momenta), float(spacing))
        branch = np.sign(momenta).astype(int)
        param = momenta.copy()
        params["exclude_zero"] = bool(exclude_zero)

    return ModeGrid(kind, float(mass), float(spacing), momenta, weights, param, lattice.astype(int), branch, params)


def aligned_decay_grids(
    species: Species,
    resolution: int = 4,
    n_excited: int = 9,
    n_ground: int = 17,
    n_photon: int = 8,
    photon_anchor: int | None = None,
) -> tuple[ModeGrid, ModeGrid, ModeGrid]:
    """Excited, ground and photon grids on which rest-frame decay is on-lattice.

    The rapidity spacing is ``a / resolution`` where ``a`` is the recoil
    rapidity of the ground detector when an excited detector at rest emits a
    photon, and the photon log-spacing equals the rapidity spacing.  Both the
    decay kinematics and every boost by a whole number of spacings then land
    exactly on grid nodes.
    """
    if species.internal_gap <= 0:
        raise ValueError("aligned decay grids need a positive gap")
    m0, m1 = species.level_mass(0), species.level_mass(1)
    k_star = (m1**2 - m0**2) / (2 * m1)
    recoil = float(np.arcsinh(k_star / m0))
    d_eta = recoil / resolution
    if photon_anchor is None:
        photon_anchor = n_photon // 2
    k_min = k_star * np.exp(-photon_anchor * d_eta)
    excited = make_grid(MASSIVE, m1, n_excited, d_eta)
    ground = make_grid(MASSIVE, m0, n_ground, d_eta)
    photon = make_grid(MASSLESS, 0.0, n_photon, d_eta, k_min=k_min)
    return excited, ground, photon


@dataclass(frozen=True, eq=False)
class FockSpace:
    """Bindings of a truncated sector space: detector, photon and frame grids."""

    species: Species
    excited: ModeGrid
    ground: ModeGrid
    photon: ModeGrid
    frame: ModeGrid | None = None
    frame_role: str | None = None
    sectors: tuple[str, ...] = ("E", "G")

    def __post_init__(self):
        for s in self.sectors:
            if s not in SECTOR_AXES:
                raise ValueError(f"unknown sector {s!r}")
        if (self.frame is None) != (self.frame_role is None):
            raise ValueError("frame grid and frame role must be given together")
        if self.frame_role is not None and self.frame_role not in FRAME_ROLES:
            raise ValueError(f"frame role must be one of {FRAME_ROLES}")

    def grid(self, axis: str) -> ModeGrid:
        return {"excited": self.excited, "ground": self.ground, "photon": self.photon, "frame": self.frame}[axis]

    def shape(self, sector: str) -> tuple[int, ...]:
        dims = tuple(self.grid(a).n for a in SECTOR_AXES[sector])
        return dims + ((self.frame.n,) if self.frame is not None else ())

    @property
    def dim(self) -> int:
        return sum(int(np.prod(self.shape(s))) for s in self.sectors)

    def compatible(self, other: "FockSpace") -> bool:
        if self is other:
            return True
        if self.sectors != other.sectors or self.frame_role != other.frame_role:
            return False
        for a in ("excited", "ground", "photon"):
            if not self.grid(a).same_as(other.grid(a)):
                return False
        if self.frame is None:
            return other.frame is None
        return other.frame is not None and self.frame.same_as(other.frame)

    def with_frame(self, frame: ModeGrid | None, role: str | None) -> "FockSpace":
        return FockSpace(self.species, self.excited, self.ground, self.photon, frame, role, self.sectors)

    def with_sectors(self, sectors: tuple[str, ...]) -> "FockSpace":
        return FockSpace(self.species, self.excited, self.ground, self.photon, self.frame, self.frame_role, tuple(sectors))

    def zeros(self) -> "SectorState":
        return SectorState(self, {s: np.zeros(self.shape(s), dtype=complex) for s in self.sectors})

    def basis_state(self, sector: str, *index: int) -> "SectorState":
        st = self.zeros()
        st.amps[sector][tuple(index)] = 1.0
        return st

    def from_vector(self, vec: np.ndarray, t: float = 0.0) -> "SectorState":
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (self.dim,):
            raise ValueError(f"vector of length {vec.shape} does not match dimension {self.dim}")
        amps, pos = {}, 0
        for s in self.sectors:
            size = int(np.prod(self.shape(s)))
            amps[s] = vec[pos : pos + size].reshape(self.shape(s)).copy()
            pos += size
        return SectorState(self, amps, t)

    def sector_slices(self) -> dict[str, slice]:
        out, pos = {}, 0
        for s in self.sectors:
            size = int(np.prod(self.shape(s)))
            out[s] = slice(pos, pos + size)
            pos += size
        return out

    def energies(self, sector: str, frame_energy: np.ndarray | None = None) -> np.ndarray:
        """Free energy of every configuration of ``sector`` (broadcast to its shape)."""
        axes = SECTOR_AXES[sector]
        total = np.zeros(self.shape(sector))
        ndim = total.ndim
        for i, a in enumerate(axes):
            e = self.grid(a).energies
            shape = [1] * ndim
            shape[i] = e.size
            total = total + e.reshape(shape)
        if self.frame is not None and frame_energy is not None:
            total = total + np.asarray(frame_energy).reshape([1] * (ndim - 1) + [-1])
        return total


@dataclass(frozen=True, eq=False)
class SectorState:
    """Amplitudes per sector; treat as immutable, operations return new states."""

    space: FockSpace
    amps: Mapping[str, np.ndarray]
    t: float = 0.0

    def vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.amps[s]).ravel() for s in self.space.sectors])

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(a, a).real for a in self.amps.values())))

    def map(self, fn: Callable[[str, np.ndarray], np.ndarray], t: float | None = None) -> "SectorState":
        return SectorState(self.space, {s: fn(s, a) for s, a in self.amps.items()}, self.t if t is None else t)

    def _check(self, other: "SectorState"):
        if not self.space.compatible(other.space):
            raise ValueError("states are bound to different grids")

    def __add__(self, other: "SectorState") -> "SectorState":
        self._check(other)
        return self.map(lambda s, a: a + other.amps[s])

    def __sub__(self, other: "SectorState") -> "SectorState":
        self._check(other)
        return self.map(lambda s, a: a - other.amps[s])

    def __mul__(self, c: complex) -> "SectorState":
        return self.map(lambda s, a: c * a)

    __rmul__ = __mul__

    def __neg__(self) -> "SectorState":
        return self * -1

    def sector_norm2(self, sector: str) -> float:
        a = self.amps.get(sector)
        return 0.0 if a is None else float(np.vdot(a, a).real)

    def normalized(self) -> "SectorState":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero state")
        return self * (1.0 / n)


def inner(a: SectorState, b: SectorState) -> complex:
    """<a|b>, antilinear in ``a``."""
    a._check(b)
    return complex(sum(np.vdot(a.amps[s], b.amps[s]) for s in a.space.sectors))


def mode_amplitudes(grid: ModeGrid, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Unit-mode amplitudes of the continuum wavefunction ``f`` (covariant measure)."""
    vals = np.asarray(f(grid.momenta), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise ValueError("wavefunction is not finite on the grid")
    energies = grid.energies if grid.mass > 0 else np.abs(grid.momenta)
    return vals * np.sqrt(grid.weights) / np.sqrt(2 * energies)


def wavepacket_state(space: FockSpace, f: Callable[[np.ndarray], np.ndarray], sector: str = "E") -> SectorState:
    """One detector quantum with momentum wavefunction ``f`` and the photon vacuum."""
    if sector not in ("E", "V"):
        raise ValueError("wavepackets live in the photon-vacuum sectors E or V")
    if space.frame is not None:
        raise ValueError("build the packet without a frame, then use tensor_with_frame")
    grid = space.excited if sector == "E" else space.ground
    st = space.zeros()
    st.amps[sector][...] = mode_amplitudes(grid, f)
    return st


def tensor_with_frame(state: SectorState, frame_amps: np.ndarray, frame_grid: ModeGrid, which: str) -> SectorState:
    """Product of ``state`` with a one-particle state of the frame particle."""
    if state.space.frame is not None:
        raise ValueError("state already carries a frame factor")
    frame_amps = np.asarray(frame_amps, dtype=complex)
    if frame_amps.shape != (frame_grid.n,):
        raise ValueError("frame amplitudes do not match the frame grid")
    space = state.space.with_frame(frame_grid, which)
    return SectorState(space, {s: np.multiply.outer(a, frame_amps) for s, a in state.amps.items()}, state.t)


def frame_density(state: SectorState) -> np.ndarray:
    """Reduced density matrix of the frame particle (trace over detector and photon)."""
    if state.space.frame is None:
        raise ValueError("state has no frame factor")
    nf = state.space.frame.n
    rho = np.zeros((nf, nf), dtype=complex)
    for a in state.amps.values():
        m = a.reshape(-1, nf)
        rho += m.T @ m.conj()
    return rho


def system_density(state: SectorState) -> np.ndarray:
    """Reduced density matrix of detector and photon, flattened over sectors."""
    if state.space.frame is None:
        v = state.vector()
        return np.outer(v, v.conj())
    nf = state.space.frame.n
    m = np.concatenate([a.reshape(-1, nf) for a in (state.amps[s] for s in state.space.sectors)])
    return m @ m.conj().T
