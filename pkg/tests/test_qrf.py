import numpy as np
import pytest

from udwqrf import (
    CouplingConfig, FockSpace, InteractionHamiltonian, Species, aligned_decay_grids, first_order_emission,
    inner, make_grid, tensor_with_frame,
)
from udwqrf.fockspace import MASSIVE, frame_density
from udwqrf.operators import KetBraOperator
from udwqrf.qrf import (
    QrfTransform, S_matrix, apply_S, apply_S_dagger, controlled_boost, extended_symmetry_residual, parity_swap,
    parity_swap_inverse, picture_change_residual, sharply_peaked_state, superposed_time_evolve, support_mask,
    transform_hint_check,
)

SP = Species(1.0, 0.5)


def _setup(n_lab=4, start=-2, m_L=2.0, m_A=3.0, sectors=("E", "G"), offset=0.0, mode="exact", res=4, n_ph=16):
    ex, g, ph = aligned_decay_grids(SP, resolution=res, n_excited=17, n_ground=33, n_photon=n_ph)
    base = FockSpace(SP, ex, g, ph, sectors=sectors)
    lab = make_grid(MASSIVE, m_L, n_lab, ex.spacing, start=start, offset=offset)
    return base, QrfTransform.build(base.with_frame(lab, "lab"), m_A, mode=mode)


def _interior_state(q, rng):
    mask = support_mask(q)
    st = q.space_A.zeros()
    for s, m in mask.items():
        st.amps[s][m] = rng.normal(size=m.sum()) + 1j * rng.normal(size=m.sum())
    return st


def test_parity_swap_pure_parity_for_equal_masses():
    base, q = _setup(m_A=2.0)
    for m in range(q.lab.n):
        x = q.space_A.basis_state("E", 8, m)
        y = parity_swap(x, q)
        i = int(np.argmax(np.abs(y.amps["E"][8])))
        assert q.ancilla.momenta[i] == pytest.approx(-q.lab.momenta[m], abs=1e-14)


def test_parity_swap_rescales_momenta():
    base, q = _setup(m_L=2.0, m_A=3.0)
    i = q.mirror(np.arange(q.lab.n))
    assert np.allclose(q.ancilla.momenta[i], -(3.0 / 2.0) * q.lab.momenta, atol=1e-14)


def test_parity_swap_involution_and_norm(rng):
    base, q = _setup()
    x = q.space_A.zeros().map(lambda s, a: rng.normal(size=a.shape) + 1j * rng.normal(size=a.shape))
    y = parity_swap(x, q)
    assert abs(y.norm() - x.norm()) < 1e-12 * x.norm()
    assert (parity_swap_inverse(y, q) - x).norm() == 0
    with pytest.raises(ValueError):
        parity_swap(y, q)


def test_controlled_boost_identity_at_rest():
    base, q = _setup()
    rest = q.lab.index_of(1, 0)
    x = q.space_A.basis_state("G", 10, 20, rest) + q.space_A.basis_state("E", 5, rest)
    for target in ("detector", "photon"):
        assert (controlled_boost(x, q, target) - x).norm() == 0


def test_controlled_boost_shifts_by_two():
    base, q = _setup()
    m = q.lab.index_of(1, -2)  # xi = +2 spacings
    assert q.det_shift[m] == pytest.approx(2.0, abs=1e-12)
    x = q.space_A.basis_state("E", 5, m)
    y = controlled_boost(x, q, "detector")
    assert y.amps["E"][7, m] == 1 and y.norm() == 1
    p = q.space_A.basis_state("G", 10, 20, m)
    z = controlled_boost(p, q, "photon")
    moved = np.argwhere(np.abs(z.amps["G"]) > 0)
    assert moved.tolist() == [[10, 22, m]]  # positive branch: up two lattice steps


def test_controlled_boost_entangles_frame():
    base, q = _setup()
    chi = np.zeros(q.lab.n, complex)
    chi[[1, 3]] = [0.6, 0.8]
    x = tensor_with_frame(base.basis_state("E", 8), chi, q.lab, "lab")
    y = controlled_boost(x, q, "detector")
    rho = frame_density(y)
    # dense oracle: amplitudes as a (detector, frame) matrix, partial trace over the detector
    mat = y.amps["E"]
    oracle = mat.T @ mat.conj()
    assert np.allclose(rho, oracle, atol=1e-15)
    purity = np.trace(rho @ rho).real
    assert purity == pytest.approx(0.6**4 + 0.8**4, abs=1e-14)
    assert purity < 1


def test_exact_mode_rejects_misaligned():
    with pytest.raises(ValueError):
        _setup(offset=1 / 3)
    base, q = _setup(offset=1 / 3, mode="nearest")
    assert not q.aligned and np.allclose(q.residuals, 1 / 3)
    with pytest.raises(ValueError):
        QrfTransform.build(q.space_A, 0.0)


def test_S_on_rest_ancilla_is_relabel():
    base, q = _setup()
    rest = q.lab.index_of(1, 0)
    x = tensor_with_frame(sharply_peaked_state(base, 0.0), np.eye(q.lab.n)[rest], q.lab, "lab")
    assert (apply_S(x, q) - parity_swap(x, q)).norm() == 0


@pytest.mark.parametrize("sectors", [("E", "G"), ("E", "G", "V", "X")])
def test_unitarity_round_trip_and_vacuum(sectors, rng):
    base, q = _setup(sectors=sectors)
    x = _interior_state(q, rng)
    y, dropped = apply_S(x, q, return_dropped=True)
    assert dropped < 1e-15
    assert abs(y.norm() / x.norm() - 1) < 1e-12
    assert (apply_S_dagger(y, q) - x).norm() < 1e-12
    for s in ("E", "V"):
        if s in sectors:
            assert y.sector_norm2(s) == pytest.approx(x.sector_norm2(s), rel=1e-13)


def test_edge_leakage_is_reported():
    base, q = _setup()
    m = q.lab.index_of(1, -2)
    _, dropped = apply_S(q.space_A.basis_state("E", 16, m), q, return_dropped=True)
    assert dropped == 1.0


def test_probability_invariance(rng):
    base, q = _setup()
    a, b = _interior_state(q, rng).normalized(), _interior_state(q, rng).normalized()
    rho = KetBraOperator.projector(a)
    pi = KetBraOperator.from_terms(q.space_A, [(0.7, b, b), (0.3, a, a)])
    p_a = np.trace(rho.dense() @ pi.dense())
    rho_l = rho.map_vectors(lambda v: apply_S(v, q), q.space_L)
    pi_l = pi.map_vectors(lambda v: apply_S(v, q), q.space_L)
    p_l = np.trace(rho_l.dense() @ pi_l.dense())
    assert abs(p_a - p_l) < 1e-12


def test_transformed_state_matches_mode_formula():
    base, q = _setup()
    width = 0.2
    delta = sharply_peaked_state(base, width)
    assert np.count_nonzero(delta.amps["E"]) > 3
    chi = np.array([0.1, 0.5j, 0.7, -0.5])
    chi = chi / np.linalg.norm(chi)
    y = apply_S(tensor_with_frame(delta, chi, q.lab, "lab"), q)
    d = delta.amps["E"]
    for i in range(q.ancilla.n):
        m = q.mirror(i)
        s = int(round(q.det_shift[m]))
        expected = np.zeros_like(d)
        lo, hi = max(0, s), min(len(d), len(d) + s)
        expected[lo:hi] = d[lo - s:hi - s]
        assert np.allclose(y.amps["E"][:, i], expected * chi[m], atol=1e-15)
        # detector momentum in L is the rest packet boosted by the ancilla velocity
        peak = int(np.argmax(np.abs(y.amps["E"][:, i])))
        pi = q.ancilla.momenta[i]
        assert base.excited.momenta[peak] == pytest.approx(1.5 * pi / q.m_A, abs=1e-12)


def test_hint_covariance_identity_frame():
    base, q = _setup(m_A=2.0)
    assert transform_hint_check(q, 0.0, lab_modes=[q.lab.index_of(1, 0)]) < 1e-12


def test_hint_covariance_aligned_16_modes():
    ex, g, ph = aligned_decay_grids(SP, resolution=4, n_excited=17, n_ground=41, n_photon=17, photon_anchor=8)
    base = FockSpace(SP, ex, g, ph)
    lab = make_grid(MASSIVE, 2.0, 16, ex.spacing)
    q = QrfTransform.build(base.with_frame(lab, "lab"), 3.0)
    assert transform_hint_check(q, 0.0) < 1e-8
    assert transform_hint_check(q, 2.5) < 1e-8


@pytest.mark.parametrize("mode", ["nearest", "linear"])
def test_hint_covariance_refinement(mode):
    coarse = aligned_decay_grids(SP, resolution=4)[0].spacing
    res = []
    for r in (4, 8, 16):
        ex, g, ph = aligned_decay_grids(SP, resolution=r, n_excited=4 * r + 1, n_ground=8 * r + 1, n_photon=4 * r)
        base = FockSpace(SP, ex, g, ph)
        lab = make_grid(MASSIVE, 2.0, 4, coarse, start=-2, offset=1 / 3)
        q = QrfTransform.build(base.with_frame(lab, "lab"), 3.0, mode=mode)
        res.append(transform_hint_check(q))
    assert all(a / b >= 1.5 for a, b in zip(res, res[1:]))


def test_superposed_time_rest_and_single_mode():
    base, q = _setup()
    lam, dtau = 0.05, 1.7
    init = sharply_peaked_state(base, 0.0)
    h_l = InteractionHamiltonian(q.space_L, lam)
    h0 = InteractionHamiltonian(base, lam)
    for i in range(q.ancilla.n):
        chi = np.eye(q.ancilla.n)[i]
        x = tensor_with_frame(init, chi, q.ancilla, "ancilla")
        out = superposed_time_evolve(x, q, 0.3, 0.3 + dtau, lam, h_l)
        t = q.gamma_ancilla[i] * dtau
        ref = first_order_emission(init, CouplingConfig(lam, t), h0)
        ref = tensor_with_frame(init + ref * lam, chi, q.ancilla, "ancilla")
        assert (out - ref).norm() < 1e-14
    rest = q.ancilla.index_of(1, 0)
    assert q.gamma_ancilla[rest] == 1.0


def test_superposed_time_two_mode_coherent_sum():
    base, q = _setup()
    lam, dtau = 0.05, 2.0
    init = sharply_peaked_state(base, 0.0)
    idx = [0, 3]
    assert q.gamma_ancilla[0] != q.gamma_ancilla[3]
    chi = np.zeros(q.ancilla.n, complex)
    chi[idx] = [0.6, 0.8j]
    x = tensor_with_frame(init, chi, q.ancilla, "ancilla")
    out = superposed_time_evolve(x, q, 0.0, dtau, lam)
    h0 = InteractionHamiltonian(base, lam)
    total = q.space_L.zeros()
    for i in idx:
        branch = init + first_order_emission(init, CouplingConfig(lam, q.gamma_ancilla[i] * dtau), h0) * lam
        total = total + tensor_with_frame(branch, chi[i] * np.eye(q.ancilla.n)[i], q.ancilla, "ancilla")
    assert (out - total).norm() < 1e-10
    with pytest.raises(ValueError):
        superposed_time_evolve(x, q, 1.0, 0.5, lam)


def test_superposed_time_equals_transformed_rest_frame_evolution():
    base, q = _setup()
    lam, dtau = 0.05, 2.0
    chi = np.array([0.2, 0.6, 0.0, 0.77j])
    chi /= np.linalg.norm(chi)
    x_a = tensor_with_frame(sharply_peaked_state(base, 0.0), chi, q.lab, "lab")
    h_a = InteractionHamiltonian(q.space_A, lam, "onshell")
    evolved_a = x_a + h_a.emission(x_a, dtau) * lam
    via_s = apply_S(evolved_a, q)
    direct = superposed_time_evolve(apply_S(x_a, q), q, 0.0, dtau, lam, InteractionHamiltonian(q.space_L, lam, "onshell"))
    assert (via_s - direct).norm() < 1e-12


def test_picture_change_identity(rng):
    base, q = _setup()
    xs = [_interior_state(q, rng) for _ in range(3)]
    assert picture_change_residual(q, 0.8, xs) < 1e-10
    ys = [apply_S(x, q) for x in xs]
    assert extended_symmetry_residual(q, 0.8, ys) < 1e-6


def test_S_matrix_is_partial_isometry():
    base, q = _setup(n_lab=2, start=0)
    s = S_matrix(q)
    keep = np.concatenate([m.ravel() for m in support_mask(q).values()])
    sub = s[:, keep]
    assert np.allclose(sub.conj().T @ sub, np.eye(keep.sum()), atol=1e-15)
