"""Measurement probabilities, rate operators and their change of quantum reference frame.

The rate operator of a (possibly time-dependent) measurement ``Pi`` is
``R = dPi/dt + i [H_int, Pi]``; its expectation is the time derivative of
``P = Tr[rho Pi]``.  Between the ancilla frame (A) and the laboratory (L)
the rates obey

    Tr[R_L rho_L] = Tr[(g R_A + i [g, Pi_A] H_A - [g dS^dag/dtau S, Pi_A]) rho_A]

with ``g`` the inverse Lorentz factor of the laboratory particle, acting on
the frame factor of the A-frame space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from .fockspace import FockSpace, SectorState, tensor_with_frame
from .operators import DensityOperator, KetBraOperator
from .perturbation import InteractionHamiltonian
from .qrf import (
    QrfTransform, apply_S, apply_S_dagger, apply_S_schrodinger, apply_S_schrodinger_dagger, free_energies_A,
    free_energies_L, free_evolve, gamma_operator,
)

DEFAULT_DT = 1e-4
REAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProjectorOperator:
    """Measurement operator in ensemble form with an explicit time rule.

    ``rule(t)`` returns the ket-bra ensemble at time ``t``; ``static``
    operators skip the finite difference in ``derivative``.
    """

    space: FockSpace
    rule: Callable[[float], KetBraOperator]
    t: float = 0.0
    dt: float = DEFAULT_DT
    static: bool = False
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def constant(cls, op: KetBraOperator, name: str = "") -> "ProjectorOperator":
        return cls(op.space, lambda t: op, static=True, name=name)

    @classmethod
    def sector_projector(cls, space: FockSpace, sector: str = "G") -> "ProjectorOperator":
        """Projector onto every configuration of ``sector`` (frame included)."""
        sl = space.sector_slices()[sector]
        eye = np.eye(space.dim, dtype=complex)[sl]
        op = KetBraOperator(space, np.ones(len(eye), complex), eye, eye.copy(), np.zeros(len(eye), int))
        return cls.constant(op, f"sector-{sector}")

    def at(self, t: float | None = None) -> KetBraOperator:
        return self.rule(self.t if t is None else t)

    def dense(self, t: float | None = None) -> np.ndarray:
        if self.static:
            if "dense" not in self._cache:
                self._cache["dense"] = self.at(self.t).dense()
            return self._cache["dense"]
        return self.at(t).dense()

    def derivative(self, t: float | None = None, dt: float | None = None) -> np.ndarray:
        """Central difference ``(Pi(t + dt) - Pi(t - dt)) / 2 dt``."""
        t = self.t if t is None else t
        dt = self.dt if dt is None else dt
        if not dt > 0:
            raise ValueError("finite-difference step must be positive")
        if self.static:
            return np.zeros((self.space.dim, self.space.dim), dtype=complex)
        return (self.dense(t + dt) - self.dense(t - dt)) / (2 * dt)

    def hermiticity_residual(self, t: float | None = None) -> float:
        d = self.dense(t)
        return float(np.max(np.abs(d - d.conj().T), initial=0.0))

    def povm_violation(self, states, t: float | None = None) -> float:
        """Largest violation of ``0 <= <x|Pi|x> <= <x|x>`` over ``states`` (0 when satisfied)."""
        op = self.at(t)
        worst = 0.0
        for x in states:
            v = op.sandwich(x, x).real
            worst = max(worst, -v, v - x.norm() ** 2)
        return max(worst, 0.0)

    def mapped(self, fn, space: FockSpace, name: str | None = None) -> "ProjectorOperator":
        """``U Pi U^dag`` for a linear map ``fn`` on states into ``space``."""
        rule = self.rule
        if self.static:
            op = rule(self.t).map_vectors(fn, space)
            return ProjectorOperator(space, lambda t: op, self.t, self.dt, True, name or self.name)
        return ProjectorOperator(space, lambda t: rule(t).map_vectors(fn, space), self.t, self.dt, False,
                                 name or self.name)


def _ketbra(rho) -> KetBraOperator:
    return rho.op if isinstance(rho, DensityOperator) else rho


def probability(rho, pi, t: float | None = None) -> float:
    """``Tr[rho Pi]`` evaluated term by term on the ensembles."""
    r = _ketbra(rho)
    p = pi.at(t) if isinstance(pi, ProjectorOperator) else pi
    if not r.space.compatible(p.space):
        raise ValueError("state and measurement are bound to different grids")
    a = r.bras.conj() @ p.kets.T  # <b_rho_i | k_pi_j>
    b = p.bras.conj() @ r.kets.T  # <b_pi_j | k_rho_i>
    val = complex(np.einsum("i,j,ij,ji->", r.coefs, p.coefs, a, b))
    if abs(val.imag) > REAL_TOL * max(1.0, abs(val)):
        raise ValueError(f"probability is not real (imaginary part {val.imag:.3g})")
    return float(val.real)


def rate_operator(pi: ProjectorOperator, hamiltonian: InteractionHamiltonian, t: float | None = None,
                  dt: float | None = None) -> np.ndarray:
    """Dense ``dPi/dt + i [H_int(t), Pi(t)]``."""
    t = pi.t if t is None else t
    h = hamiltonian.dense(t, pi.space)
    p = pi.dense(t)
    return pi.derivative(t, dt) + 1j * (h @ p - p @ h)


def trace_with_dense(op: np.ndarray, rho) -> complex:
    """``Tr[op rho]`` for a dense ``op`` and a ket-bra ``rho``."""
    r = _ketbra(rho)
    return complex(np.einsum("i,ij,ij->", r.coefs, r.bras.conj(), (op @ r.kets.T).T))


class Evolution:
    """Exact interaction-picture propagation of vectors under ``H_int``.

    ``onshell`` Hamiltonians are time independent and use a Krylov matrix
    exponential; the others integrate the Schroedinger equation.
    """

    def __init__(self, hamiltonian: InteractionHamiltonian, space: FockSpace | None = None,
                 rtol: float = 1e-12, atol: float = 1e-14):
        self.h = hamiltonian
        self.space = space or hamiltonian.space
        self.rtol, self.atol = rtol, atol
        rows, cols, elem, det = hamiltonian.pattern(self.space)
        self._rc = (np.concatenate([rows, cols]), np.concatenate([cols, rows]))
        self._elem = hamiltonian.lam * elem
        self._det = det
        self.constant = hamiltonian.kind == "onshell" or not np.any(det)

    def matrix(self, t: float) -> sparse.csr_matrix:
        h = self._elem * np.exp(1j * self._det * t)
        vals = np.concatenate([h, h.conj()])
        return sparse.csr_matrix((vals, self._rc), shape=(self.space.dim,) * 2)

    def vectors(self, vecs: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Propagate the rows of ``vecs`` from ``t0`` to ``t1``."""
        vecs = np.atleast_2d(np.asarray(vecs, dtype=complex))
        if t1 == t0 or len(self._elem) == 0:
            return vecs.copy()
        if self.constant:
            return expm_multiply(-1j * (t1 - t0) * self.matrix(0.0), vecs.T).T
        shape = vecs.T.shape

        def rhs(t, y):
            return (-1j * (self.matrix(t) @ y.reshape(shape))).ravel()

        sol = solve_ivp(rhs, (t0, t1), vecs.T.ravel(), method="DOP853", rtol=self.rtol, atol=self.atol)
        if not sol.success:
            raise RuntimeError(f"time integration failed: {sol.message}")
        return sol.y[:, -1].reshape(shape).T

    def density(self, rho, t0: float, t1: float) -> KetBraOperator:
        r = _ketbra(rho)
        both = self.vectors(np.concatenate([r.kets, r.bras]), t0, t1)
        n = len(r.coefs)
        return KetBraOperator(r.space, r.coefs, both[:n], both[n:], r.order)


# the two laboratory measurements built from a detector-photon POVM M


def default_M(space: FockSpace) -> KetBraOperator:
    """One-photon-sector projector on the frame-less detector-photon space."""
    return ProjectorOperator.sector_projector(space.with_frame(None, None), "G").at()


def _check_sigma(sigma, q: QrfTransform) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape != (q.lab.n,):
        raise ValueError("sigma must give one amplitude per laboratory mode")
    if abs(np.vdot(sigma, sigma).real - 1.0) > 1e-12:
        raise ValueError("sigma must be normalized on the grid")
    return sigma


def _M_terms(q: QrfTransform, M: KetBraOperator | None):
    base = q.space_A.with_frame(None, None)
    M = default_M(q.space_A) if M is None else M
    if not M.space.compatible(base):
        raise ValueError("M must act on the detector-photon space without the frame")
    return base, M


def build_pi1(q: QrfTransform, sigma1, M: KetBraOperator | None = None) -> ProjectorOperator:
    """Laboratory ``Pi_1``: boosted ``M`` weighted by ``|sigma_1|^2``, diagonal in ancilla momentum."""
    sigma = _check_sigma(sigma1, q)
    base, M = _M_terms(q, M)
    eye = np.eye(q.lab.n)
    terms = []
    for m in np.nonzero(np.abs(sigma) > 0)[0]:
        w = abs(sigma[m]) ** 2
        for c, k, b, o in zip(M.coefs, M.kets, M.bras, M.order):
            ket = apply_S(tensor_with_frame(base.from_vector(k), eye[m], q.lab, "lab"), q)
            bra = apply_S(tensor_with_frame(base.from_vector(b), eye[m], q.lab, "lab"), q)
            terms.append((c * w, ket, bra, o))
    return ProjectorOperator.constant(KetBraOperator.from_terms(q.space_L, terms), "pi1")


def build_pi2(q: QrfTransform, sigma2, M: KetBraOperator | None = None) -> ProjectorOperator:
    """Laboratory ``Pi_2``: ``M`` sandwiched between boosted copies of the coherent frame state ``sigma_2``."""
    sigma = _check_sigma(sigma2, q)
    base, M = _M_terms(q, M)
    terms = []
    for c, k, b, o in zip(M.coefs, M.kets, M.bras, M.order):
        ket = apply_S(tensor_with_frame(base.from_vector(k), sigma, q.lab, "lab"), q)
        bra = apply_S(tensor_with_frame(base.from_vector(b), sigma, q.lab, "lab"), q)
        terms.append((c, ket, bra, o))
    return ProjectorOperator.constant(KetBraOperator.from_terms(q.space_L, terms), "pi2")


def to_ancilla_frame(pi_L: ProjectorOperator, q: QrfTransform) -> ProjectorOperator:
    return pi_L.mapped(lambda x: apply_S_dagger(x, q), q.space_A)


def to_lab_frame(pi_A: ProjectorOperator, q: QrfTransform) -> ProjectorOperator:
    return pi_A.mapped(lambda x: apply_S(x, q), q.space_L)


def commutator_gamma(pi_A: ProjectorOperator, q: QrfTransform, power: float = -1.0, t: float | None = None):
    """Dense ``[gamma_L^power, Pi_A]`` with ``gamma_L`` diagonal on the laboratory factor."""
    g = gamma_operator(q.space_A, q.gamma_lab, power)
    p = pi_A.dense(t)
    return g[:, None] * p - p * g[None, :]


# transformation law


@dataclass(frozen=True)
class RateTransformReport:
    observable: str
    lhs: float
    rhs: float
    residual: float
    main_term: complex  # the trace terms are complex one by one; their sum is real
    extra_commutator_term: complex
    dS_term: complex
    literal_gamma_residual: float

    @property
    def extra_terms(self) -> tuple[float, float]:
        """Magnitudes of the commutator term and of the transform-derivative term."""
        return abs(self.extra_commutator_term), abs(self.dS_term)


def _interaction_S_dagger(x: SectorState, q: QrfTransform, tau: float) -> SectorState:
    # interaction-picture S^dag rebuilt from the Schroedinger-picture transform
    y = free_evolve(x, lambda s: free_energies_L(q, s), q.gamma_ancilla * tau)
    y = apply_S_schrodinger_dagger(y, q, tau)
    return free_evolve(y, lambda s: free_energies_A(q, s), -tau)


def _interaction_S(x: SectorState, q: QrfTransform, tau: float) -> SectorState:
    y = free_evolve(x, lambda s: free_energies_A(q, s), tau)
    y = apply_S_schrodinger(y, q, tau)
    return free_evolve(y, lambda s: free_energies_L(q, s), -q.gamma_ancilla * tau)


def _dS_dagger_S(q: QrfTransform, x: SectorState, tau: float, h: float) -> SectorState:
    """``dS^dag/dtau S x`` by central difference of the interaction-picture transform."""
    y = _interaction_S(x, q, tau)
    return (_interaction_S_dagger(y, q, tau + h) - _interaction_S_dagger(y, q, tau - h)) * (1 / (2 * h))


def rate_transform_residual(rho_L0, pi_L: ProjectorOperator, q: QrfTransform, t: float, lam: float,
                            dt: float = DEFAULT_DT, hamiltonian_kind: str = "onshell") -> RateTransformReport:
    """Both sides of the rate transformation law at laboratory time ``t``.

    ``rho_L0`` is the laboratory state at ``t = 0``; it evolves under the
    laboratory Hamiltonian and the left side is the central difference of
    ``Tr[rho_L(t) Pi_L]``.  The right side is evaluated in the ancilla
    frame on ``rho_A = S^dag rho_L(t) S`` with ``gamma_L^-1``; the residual
    obtained with ``gamma_L`` itself is reported alongside.
    """
    if not pi_L.static:
        raise ValueError("the transformation law is evaluated for time-independent measurements")
    h_l = InteractionHamiltonian(q.space_L, lam, hamiltonian_kind)
    h_a = InteractionHamiltonian(q.space_A, lam, hamiltonian_kind)
    evo = Evolution(h_l)
    rho0 = _ketbra(rho_L0)

    pi_A = to_ancilla_frame(pi_L, q)
    p_a = pi_A.dense()

    def prob(tt):
        r = evo.density(rho0, 0.0, tt)
        return trace_with_dense(p_a, r.map_vectors(lambda x: apply_S_dagger(x, q), q.space_A)).real

    lhs = (prob(t + dt) - prob(t - dt)) / (2 * dt)

    rho_L = evo.density(rho0, 0.0, t)
    rho_A = rho_L.map_vectors(lambda x: apply_S_dagger(x, q), q.space_A)
    H = h_a.dense(t)
    R_A = pi_A.derivative(t, dt) + 1j * (H @ p_a - p_a @ H)

    def terms(power):
        g = gamma_operator(q.space_A, q.gamma_lab, power)
        main = trace_with_dense(g[:, None] * R_A, rho_A)
        comm = g[:, None] * p_a - p_a * g[None, :]
        extra = trace_with_dense(1j * comm @ H, rho_A)
        # -Tr[[g X, Pi] rho] with X = dS^dag/dtau S, applied to the ensemble vectors only
        ds = 0j
        for c, k, b in zip(rho_A.coefs, rho_A.kets, rho_A.bras):
            kx = q.space_A.from_vector(k)
            gxk = g * _dS_dagger_S(q, kx, t, dt).vector()
            xpk = g * _dS_dagger_S(q, q.space_A.from_vector(p_a @ k), t, dt).vector()
            ds -= c * (np.vdot(b, xpk) - np.vdot(b, p_a @ gxk))
        return main, extra, ds

    main, extra, ds = terms(-1.0)
    rhs = (main + extra + ds).real
    lit = sum(terms(1.0)).real
    return RateTransformReport(
        pi_L.name, float(lhs), float(rhs), float(abs(lhs - rhs)), complex(main), complex(extra), complex(ds),
        float(abs(lhs - lit)),
    )
