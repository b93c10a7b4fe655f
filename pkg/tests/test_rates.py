import numpy as np
import pytest

from udwqrf import (
    CouplingConfig, FockSpace, InteractionHamiltonian, Species, aligned_decay_grids, first_order_emission,
    make_grid, tensor_with_frame,
)
from udwqrf.fockspace import MASSIVE
from udwqrf.operators import DensityOperator, KetBraOperator
from udwqrf.qrf import QrfTransform, apply_S, sharply_peaked_state, support_mask
from udwqrf.rates import (
    Evolution, ProjectorOperator, build_pi1, build_pi2, commutator_gamma, default_M, probability, rate_operator,
    rate_transform_residual, to_ancilla_frame, trace_with_dense,
)

from conftest import random_state

SP = Species(1.0, 0.5)


@pytest.fixture(scope="module")
def small():
    ex, g, ph = aligned_decay_grids(SP, resolution=2, n_excited=9, n_ground=9, n_photon=6)
    return FockSpace(SP, ex, g, ph)


@pytest.fixture(scope="module")
def frame(small):
    lab = make_grid(MASSIVE, 2.0, 4, small.excited.spacing, start=-2)
    return QrfTransform.build(small.with_frame(lab, "lab"), 3.0)


def _lab_state(q, chi):
    chi = np.asarray(chi, dtype=complex)
    x = tensor_with_frame(sharply_peaked_state(q.space_A.with_frame(None, None), 0.0), chi / np.linalg.norm(chi),
                          q.lab, "lab")
    return DensityOperator.ensemble([(1.0, apply_S(x, q))])


def _rotating_projector(space, a, b, w=0.7):
    def rule(t):
        phi = a * np.cos(w * t) + b * np.sin(w * t)
        return KetBraOperator.projector(phi)
    return ProjectorOperator(space, rule, t=0.4, name="rotating")


def test_probability_photon_sector(small):
    lam, t = 0.05, 1.3
    pi = ProjectorOperator.sector_projector(small, "G")
    init = small.basis_state("E", 4)
    assert probability(DensityOperator.ensemble([(1.0, init)]), pi) == 0.0
    psi = first_order_emission(init, CouplingConfig(lam, t))
    rho = DensityOperator.ensemble([(1.0, init + psi * lam)])
    assert probability(rho, pi) == pytest.approx(lam**2 * psi.norm() ** 2, abs=1e-12)


def test_probability_dense_oracle(small, rng):
    rho = DensityOperator.ensemble([(w, random_state(small, rng).normalized()) for w in (0.5, 0.3, 0.2)])
    pi = ProjectorOperator.constant(KetBraOperator.from_terms(
        small, [(w, x, x) for w, x in ((0.4, random_state(small, rng)), (1.1, random_state(small, rng)))]))
    oracle = np.trace(rho.dense() @ pi.dense())
    assert probability(rho, pi) == pytest.approx(oracle.real, abs=1e-12)
    other = small.with_sectors(("E",))
    with pytest.raises(ValueError):
        probability(DensityOperator.ensemble([(1.0, other.basis_state("E", 0))]), pi)


def test_rate_zero_for_commuting_static(small):
    h = InteractionHamiltonian(small, 0.3)
    eye = ProjectorOperator.sector_projector(small, "E").at() + ProjectorOperator.sector_projector(small, "G").at()
    r = rate_operator(ProjectorOperator.constant(eye), h, t=0.9)
    assert np.max(np.abs(r)) < 1e-15


def test_rate_operator_hermitian(small, rng):
    h = InteractionHamiltonian(small, 0.3)
    pi = _rotating_projector(small, random_state(small, rng).normalized(), random_state(small, rng).normalized())
    r = rate_operator(pi, h)
    assert np.max(np.abs(r - r.conj().T)) < 1e-10


def test_rate_matches_probability_derivative(small):
    lam, t, dt = 0.5, 1.1, 1e-4
    h = InteractionHamiltonian(small, lam)
    evo = Evolution(h)
    rho0 = DensityOperator.ensemble([(1.0, small.basis_state("E", 4))])
    pi = ProjectorOperator.sector_projector(small, "G")
    p = lambda tt: probability(evo.density(rho0, 0.0, tt), pi)
    fd = (p(t + dt) - p(t - dt)) / (2 * dt)
    rate = trace_with_dense(rate_operator(pi, h, t), evo.density(rho0, 0.0, t))
    assert abs(rate.imag) < 1e-12
    assert abs(rate.real - fd) < 1e-6
    assert fd > 0


def test_rate_consistency_is_second_order(small, rng):
    lam, t = 0.8, 1.1
    h = InteractionHamiltonian(small, lam)
    evo = Evolution(h)
    x = small.basis_state("E", 4)
    rho0 = DensityOperator.ensemble([(1.0, x)])
    a = small.basis_state("E", 4) * 0.6 + small.basis_state("G", 3, 2) * 0.8
    pi = ProjectorOperator(small, _rotating_projector(small, a, small.basis_state("G", 5, 9)).rule, t=t, dt=1e-5)
    exact = trace_with_dense(rate_operator(pi, h, t), evo.density(rho0, 0.0, t)).real
    errs = []
    for d in (0.2, 0.1, 0.05):
        fd = (probability(evo.density(rho0, 0.0, t + d), pi, t + d)
              - probability(evo.density(rho0, 0.0, t - d), pi, t - d)) / (2 * d)
        errs.append(abs(fd - exact))
    ratios = [e0 / e1 for e0, e1 in zip(errs, errs[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios), ratios


def test_evolution_paths_agree(small, rng):
    h = InteractionHamiltonian(small, 0.7, "onshell")
    x = random_state(small, rng).normalized().vector()
    a = Evolution(h)
    b = Evolution(h)
    b.constant = False
    va, vb = a.vectors(x, 0.0, 2.0), b.vectors(x, 0.0, 2.0)
    assert np.linalg.norm(va - vb) < 1e-10
    assert np.linalg.norm(va) == pytest.approx(1.0, abs=1e-12)


def _support(q):
    return np.concatenate([m.ravel() for m in support_mask(q).values()]).astype(float)


def test_pi1_single_mode_and_ancilla_form(frame):
    q = frame
    m_dense = default_M(q.space_A).dense()
    sigma = np.zeros(4, complex)
    sigma[2] = 1j
    pi_a = to_ancilla_frame(build_pi1(q, sigma), q).dense()
    mask = _support(q)
    expected = np.kron(m_dense, np.diag([0, 0, 1.0, 0])) * np.outer(mask, mask)
    assert np.max(np.abs(pi_a - expected)) < 1e-15

    sigma = np.array([0.0, 0.6, 0.8, 0.0])
    pi_l = build_pi1(q, sigma)
    d = pi_l.dense()
    nf = q.ancilla.n
    rows, cols = np.nonzero(d)
    assert np.all(rows % nf == cols % nf)  # no ancilla-momentum coherences
    pi_a = to_ancilla_frame(pi_l, q).dense()
    assert np.max(np.abs(pi_a - np.kron(m_dense, np.diag(np.abs(sigma) ** 2)) * np.outer(mask, mask))) < 1e-15


def test_pi2_ancilla_form_and_coherences(frame):
    q = frame
    sigma = np.array([0.6, 0.0, 0.0, 0.8j])
    pi_l = build_pi2(q, sigma)
    d = pi_l.dense()
    nf = q.ancilla.n
    rows, cols = np.nonzero(np.abs(d) > 0)
    assert np.any(rows % nf != cols % nf)
    pi_a = to_ancilla_frame(pi_l, q).dense()
    # M lies in the support for every frame branch used here
    expected = np.kron(default_M(q.space_A).dense(), np.outer(sigma, sigma.conj()))
    keep = _support(q) > 0
    assert np.max(np.abs((pi_a - expected)[np.ix_(keep, keep)])) < 1e-15
    with pytest.raises(ValueError):
        build_pi2(q, np.array([1.0, 1.0, 0, 0]))


def test_commutator_gamma(frame):
    q = frame
    c1 = commutator_gamma(to_ancilla_frame(build_pi1(q, np.array([0.5, 0.5, 0.5, 0.5])), q), q)
    assert np.all(c1 == 0)
    sigma = np.array([0.6, 0.0, 0.0, 0.8])
    assert q.gamma_lab[0] != q.gamma_lab[3]
    pi_a = to_ancilla_frame(build_pi2(q, sigma), q)
    c2 = commutator_gamma(pi_a, q, power=1.0)
    g = np.diag(np.tile(q.gamma_lab, q.space_A.dim // 4))
    oracle = g @ pi_a.dense() - pi_a.dense() @ g
    assert np.linalg.norm(c2, 2) == pytest.approx(np.linalg.norm(oracle, 2), rel=1e-12)
    assert np.linalg.norm(c2, 2) > 0.01


def test_pis_are_povm_elements(frame, rng):
    q = frame
    states = [random_state(q.space_L, rng) for _ in range(5)]
    for pi in (build_pi1(q, np.array([0.0, 0.6, 0.8, 0.0])), build_pi2(q, np.array([0.6, 0, 0, 0.8]))):
        assert pi.hermiticity_residual() < 1e-15
        assert pi.povm_violation(states) == 0.0


def test_rate_transform_pi1_reduces_to_dilation(frame):
    q = frame
    rho = _lab_state(q, [0.3, 0.5, 0.4, 0.7])
    rep = rate_transform_residual(rho, build_pi1(q, np.array([0.0, 0.6, 0.8, 0.0])), q, t=1.5, lam=1.0)
    assert rep.extra_commutator_term == 0
    assert rep.residual < 1e-6
    assert rep.extra_terms[1] < 1e-10
    assert rep.lhs > 0


def test_rate_transform_pi2_needs_extra_term(frame):
    q = frame
    rho = _lab_state(q, [0.3, 0.5, 0.4j, 0.7])
    rep = rate_transform_residual(rho, build_pi2(q, np.array([0.6, 0, 0, 0.8j])), q, t=1.5, lam=1.0)
    assert rep.residual < 1e-6
    assert rep.extra_terms[0] >= 10 * rep.residual
    assert rep.extra_terms[1] < 1e-10
    # rate without the correction misses it
    assert abs(rep.main_term.real + rep.extra_commutator_term.real - rep.rhs) < 1e-12
    assert abs(rep.main_term.imag) > 10 * rep.residual


def test_rate_transform_second_order_in_dt(frame):
    q = frame
    rho = _lab_state(q, [0.3, 0.5, 0.4, 0.7])
    pi = build_pi2(q, np.array([0.6, 0, 0, 0.8]))
    res = [rate_transform_residual(rho, pi, q, t=1.5, lam=1.0, dt=d).residual for d in (0.4, 0.2, 0.1)]
    assert all(3.5 <= a / b <= 4.5 for a, b in zip(res, res[1:]))


def test_rate_transform_identity_frame(small):
    lab = make_grid(MASSIVE, 3.0, 4, small.excited.spacing, start=-2)
    q = QrfTransform.build(small.with_frame(lab, "lab"), 3.0)
    rest = lab.index_of(1, 0)
    rho = _lab_state(q, np.eye(4)[rest])
    sigma = np.zeros(4)
    sigma[rest] = 1.0
    for pi in (build_pi1(q, sigma), build_pi2(q, sigma)):
        rep = rate_transform_residual(rho, pi, q, t=0.8, lam=1.0)
        assert rep.residual < 1e-10 and rep.literal_gamma_residual < 1e-10


def test_literal_gamma_fails_for_moving_frame(frame):
    q = frame
    rho = _lab_state(q, [0.0, 0.0, 0.0, 1.0])
    rep = rate_transform_residual(rho, build_pi1(q, np.array([0, 0, 0, 1.0])), q, t=1.5, lam=1.0)
    assert rep.residual < 1e-6 < rep.literal_gamma_residual


def test_time_dependent_measurement_rejected(frame, rng):
    q = frame
    pi = _rotating_projector(q.space_L, random_state(q.space_L, rng).normalized(),
                             random_state(q.space_L, rng).normalized())
    with pytest.raises(ValueError):
        rate_transform_residual(_lab_state(q, [1, 0, 0, 0]), pi, q, t=1.0, lam=1.0)
