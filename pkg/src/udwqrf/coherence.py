"""Coherent versus incoherent two-velocity preparations and binary observables.

``Psi_i(0)`` are excited single-mode states at two momenta and ``psi_i(t)``
their first-order emission coefficients, so ``Psi_i(t) = Psi_i(0) + lam psi_i(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fockspace import FockSpace, SectorState, inner
from .operators import DensityOperator, KetBraOperator
from .perturbation import CouplingConfig, InteractionHamiltonian, first_order_emission, s_norm

ORTHO_TOL = 1e-10
NORM_TOL = 1e-10


def decay_pair(space: FockSpace, modes: tuple[int, int], cfg: CouplingConfig, hamiltonian=None):
    """``(Psi_1(0), Psi_2(0), psi_1(t), psi_2(t))`` for excited modes ``modes``."""
    if modes[0] == modes[1]:
        raise ValueError("the two velocities must be distinct modes")
    h = hamiltonian or InteractionHamiltonian(space, cfg.lam or 1.0)
    init = [space.basis_state("E", n) for n in modes]
    return init[0], init[1], first_order_emission(init[0], cfg, h), first_order_emission(init[1], cfg, h)


def _check_orthogonal(a: SectorState, b: SectorState):
    ov = abs(inner(a, b))
    if ov > ORTHO_TOL:
        raise ValueError(f"initial states are not orthogonal (|<1|2>| = {ov:.3g})")


def _members(psi1_0, psi2_0, psi1_t, psi2_t):
    _check_orthogonal(psi1_0, psi2_0)
    return [(psi1_0, psi1_t), (psi2_0, psi2_t)]


def _pair_terms(weight, lam, a, b):
    (a0, at), (b0, bt) = a, b
    return [
        (weight, a0, b0, 0),
        (weight * lam, at, b0, 1),
        (weight * lam, a0, bt, 1),
        (weight * lam**2, at, bt, 2),
    ]


def build_rho_coherent(psi1_0, psi2_0, psi1_t, psi2_t, lam: float, truncate: bool = True) -> DensityOperator:
    """``1/2 (sum_i Psi_i(t)) (sum_j Psi_j(t))^dag``, optionally without the lam^2 block."""
    m = _members(psi1_0, psi2_0, psi1_t, psi2_t)
    terms = [t for a in m for b in m for t in _pair_terms(0.5, lam, a, b)]
    op = KetBraOperator.from_terms(psi1_0.space, terms)
    return DensityOperator(op.truncate(1) if truncate else op, truncate)


def build_rho_incoherent(psi1_0, psi2_0, psi1_t, psi2_t, lam: float, truncate: bool = True) -> DensityOperator:
    """``1/2 sum_i Psi_i(t) Psi_i(t)^dag``, optionally without the lam^2 block."""
    m = _members(psi1_0, psi2_0, psi1_t, psi2_t)
    terms = [t for a in m for t in _pair_terms(0.5, lam, a, a)]
    op = KetBraOperator.from_terms(psi1_0.space, terms)
    return DensityOperator(op.truncate(1) if truncate else op, truncate)


def delta_rho(rho_c: DensityOperator, rho_ic: DensityOperator) -> KetBraOperator:
    if not rho_c.space.compatible(rho_ic.space):
        raise ValueError("density operators are bound to different grids")
    if rho_c.order_lambda_truncated != rho_ic.order_lambda_truncated:
        raise ValueError("cannot subtract a truncated from an untruncated density operator")
    return (rho_c - rho_ic).simplify(atol=1e-15)


@dataclass(frozen=True, eq=False)
class BinaryObservable:
    """``Q = |q><q|`` with ``q = sum_i alpha_i Psi_i(0) + beta_i psi_i(t)``."""

    alpha: tuple[complex, complex]
    beta: tuple[complex, complex]
    initial: tuple[SectorState, SectorState]
    emitted: tuple[SectorState, SectorState]

    def vector(self) -> SectorState:
        out = self.initial[0].space.zeros()
        for a, b, x0, xt in zip(self.alpha, self.beta, self.initial, self.emitted):
            out = out + x0 * complex(a) + xt * complex(b)
        return out

    @property
    def norm2(self) -> float:
        """Norm squared of ``q`` before any rescaling (diagnostic)."""
        return self.vector().norm() ** 2

    def normalized(self) -> "BinaryObservable":
        n = np.sqrt(self.norm2)
        if n == 0:
            raise ValueError("q vanishes; nothing to normalize")
        return BinaryObservable(
            tuple(complex(a) / n for a in self.alpha), tuple(complex(b) / n for b in self.beta),
            self.initial, self.emitted,
        )

    def projector(self) -> KetBraOperator:
        q = self.vector()
        return KetBraOperator.projector(q)


def trace_with(Q: BinaryObservable, op) -> complex:
    """``Tr(Q op) = <q|op|q>`` without any normalization requirement."""
    op = op.op if isinstance(op, DensityOperator) else op
    q = Q.vector()
    return op.sandwich(q, q)


def expectation(Q: BinaryObservable, rho, tol: float = NORM_TOL) -> float:
    """``Tr(Q rho)`` for a normalized ``q``; rescale with ``Q.normalized()`` first."""
    if abs(Q.norm2 - 1.0) > tol:
        raise ValueError(f"q is not normalized (|q|^2 = {Q.norm2:.12g}); use Q.normalized()")
    val = trace_with(Q, rho)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val)):
        raise ValueError("expectation value is not real; operator is not Hermitian")
    return float(val.real)


def expectation_report(Q: BinaryObservable, rho) -> dict:
    """Both readings of ``Q-bar``: raw coefficients and after rescaling ``q``."""
    raw = trace_with(Q, rho)
    n2 = Q.norm2
    return {"norm2": n2, "raw": raw.real, "normalized": raw.real / n2, "difference": raw.real * (1 / n2 - 1)}


def delta_q_closed_form(alpha, beta, s1: float, s2: float, lam: float) -> complex:
    """``1/2 sum_{i != j} (a_i* a_j + lam s_i b_i* a_j + lam s_j a_i* b_j)``."""
    a = np.asarray(alpha, dtype=complex)
    b = np.asarray(beta, dtype=complex)
    s = np.array([s1, s2], dtype=float)
    total = 0j
    for i, j in ((0, 1), (1, 0)):
        total += np.conj(a[i]) * a[j] + lam * s[i] * np.conj(b[i]) * a[j] + lam * s[j] * np.conj(a[i]) * b[j]
    return complex(0.5 * total)


def coherence_sensitive(alpha, beta, s1: float, s2: float) -> bool:
    """Whether the order-lam part of dQ can be non-zero: some i != j with a_j, b_i and s_i non-zero."""
    s = (s1, s2)
    return any(alpha[j] != 0 and beta[i] != 0 and s[i] > 0 for i, j in ((0, 1), (1, 0)))


def coherence_scan(space: FockSpace, modes, lam: float, times, alpha, beta, hamiltonian=None):
    """Rows ``(t, s1, s2, dQ)`` for a fixed observable shape over a time grid.

    ``alpha`` and ``beta`` are rescaled at every time so that ``q(t)`` is normalized.
    """
    h = hamiltonian or InteractionHamiltonian(space, lam)
    rows = []
    for t in times:
        x1, x2, y1, y2 = decay_pair(space, modes, CouplingConfig(lam, float(t)), h)
        Q = BinaryObservable(tuple(alpha), tuple(beta), (x1, x2), (y1, y2)).normalized()
        s1, s2 = s_norm(y1), s_norm(y2)
        rows.append((float(t), s1, s2, delta_q_closed_form(Q.alpha, Q.beta, s1, s2, lam), Q))
    return rows
