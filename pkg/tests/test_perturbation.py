import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from udwqrf import (
    CouplingConfig, FockSpace, InteractionHamiltonian, Species, apply_hint_rec, apply_hint_res,
    first_order_emission, inner, make_grid, s_norm, time_window, wavepacket_state,
)
from udwqrf.fockspace import MASSIVE, MASSLESS

from conftest import random_state


def _toy(n_det=4, n_ph=3, sectors=("E", "G")):
    sp = Species(1.0, 0.5)
    ex = make_grid(MASSIVE, 1.5, n_det, 0.25)
    g = make_grid(MASSIVE, 1.0, n_det, 0.25)
    ph = make_grid(MASSLESS, 0.0, n_ph, 0.25, k_min=0.3)
    return FockSpace(sp, ex, g, ph, sectors=sectors)


def test_time_window_examples():
    assert time_window(0.0, 2.0) == 2.0
    t = 1.7
    assert abs(time_window(np.pi / t, t)) == pytest.approx(2 * t / np.pi, rel=1e-14)
    n = 10_000
    tm = (np.arange(n) + 0.5) * 5.0 / n
    oracle = np.sum(np.exp(1j * 0.3 * tm)) * 5.0 / n
    assert abs(time_window(0.3, 5.0) - oracle) < 1e-8
    with pytest.raises(ValueError):
        time_window(0.1, -1.0)


@given(st.floats(-50, 50), st.floats(0, 20))
def test_time_window_conjugation(dw, t):
    assert abs(time_window(-dw, t) - np.conj(time_window(dw, t))) <= 1e-13 * max(1.0, t)


def test_time_window_series_branch_continuity():
    for dw in (1e-9, 1e-8 * 0.99, 1e-8 * 1.01):
        exact = np.expm1(1j * dw * 1.0) / (1j * dw)
        assert abs(time_window(dw, 1.0) - exact) < 1e-15


def test_resonant_maps_excited_into_one_photon_sector():
    space = _toy()
    out = apply_hint_res(space.basis_state("E", 2), 0.4)
    assert out.sector_norm2("E") == 0
    assert out.sector_norm2("G") > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 10))
def test_resonant_hermiticity(seed, t):
    rng = np.random.default_rng(seed)
    space = _toy()
    a, b = random_state(space, rng), random_state(space, rng)
    lhs = inner(a, apply_hint_res(b, t))
    rhs = np.conj(inner(b, apply_hint_res(a, t)))
    assert abs(lhs - rhs) < 1e-12


def test_resonant_element_formula():
    space = _toy(n_det=3, n_ph=3)
    ex, g, ph = space.excited, space.ground, space.photon
    t = 0.8
    h = InteractionHamiltonian(space, 0.1)
    mat = h.dense(t)
    sl = space.sector_slices()
    found = 0
    for n0 in range(g.n):
        for j in range(ph.n):
            n1 = ex.snap(g.momenta[n0] + ph.momenta[j])
            if n1 < 0:
                continue
            w0, w1, k = g.energies[n0], ex.energies[n1], abs(ph.momenta[j])
            expected = (0.1 / np.sqrt(2 * np.pi) * np.exp(1j * (w0 + k - w1) * t)
                        / np.sqrt(2 * k * 2 * w0 * 2 * w1)
                        * np.sqrt(g.weights[n0] * ph.weights[j] / ex.weights[n1]))
            row = sl["G"].start + n0 * ph.n + j
            col = sl["E"].start + n1
            assert abs(mat[row, col] - expected) < 1e-15
            found += 1
    assert found > 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_counter_rotating_hermiticity(seed):
    rng = np.random.default_rng(seed)
    space = _toy(sectors=("E", "G", "V", "X"))
    a, b = random_state(space, rng), random_state(space, rng)
    assert abs(inner(a, apply_hint_rec(b, 1.3)) - np.conj(inner(b, apply_hint_rec(a, 1.3)))) < 1e-12


def test_rec_contains_resonant_elements():
    space = _toy(sectors=("E", "G", "V", "X"))
    res = InteractionHamiltonian(space, 1.0, "resonant").dense(0.5)
    rec = InteractionHamiltonian(space, 1.0, "rec").dense(0.5)
    nz = res != 0
    assert np.array_equal(rec[nz], res[nz])
    assert np.count_nonzero(rec) > np.count_nonzero(res)


def test_counter_rotating_element_formula():
    space = _toy(n_det=3, n_ph=3, sectors=("E", "G", "V", "X"))
    ex, g, ph = space.excited, space.ground, space.photon
    t = 0.3
    mat = InteractionHamiltonian(space, 1.0, "rec").dense(t)
    sl = space.sector_slices()
    found = 0
    for n1 in range(ex.n):
        for j in range(ph.n):
            n0 = g.snap(ex.momenta[n1] + ph.momenta[j])
            if n0 < 0:
                continue
            w0, w1, k = g.energies[n0], ex.energies[n1], abs(ph.momenta[j])
            expected = (np.exp(1j * (w1 + k - w0) * t) / np.sqrt(2 * np.pi) / np.sqrt(8 * w0 * k * w1)
                        * np.sqrt(ex.weights[n1] * ph.weights[j] / g.weights[n0]))
            assert abs(mat[sl["X"].start + n1 * ph.n + j, sl["V"].start + n0] - expected) < 1e-15
            found += 1
    assert found > 0


def test_first_order_emission_trivia():
    space = _toy()
    init = space.basis_state("E", 1)
    assert s_norm(first_order_emission(init, CouplingConfig(0.05, 0.0))) == 0
    a = first_order_emission(init, CouplingConfig(0.05, 1.2)).vector()
    b = first_order_emission(init, CouplingConfig(0.7, 1.2)).vector()
    assert np.allclose(a, b, atol=1e-15)
    with pytest.raises(ValueError):
        first_order_emission(space.basis_state("G", 0, 0), CouplingConfig(0.1, 1.0))
    with pytest.raises(ValueError):
        CouplingConfig(0.1, -1.0)


def test_first_order_emission_vs_time_quadrature(rng):
    space = _toy(n_det=4, n_ph=3)  # 4 detector x 6 photon modes
    assert space.photon.n == 6
    lam, t = 0.05, 3.0
    init = random_state(space, rng, ["E"]).normalized()
    h = InteractionHamiltonian(space, lam)
    n = 1000
    acc = space.zeros()
    for tj in (np.arange(n) + 0.5) * t / n:
        acc = acc + h.apply(init, tj)
    oracle = acc * (-1j / lam * t / n)
    psi = first_order_emission(init, CouplingConfig(lam, t), h)
    assert (psi - oracle).norm() < 1e-6


@pytest.mark.parametrize("t", [0.5, 2.0, 7.0])
def test_first_order_norm_bookkeeping(t, rng):
    space = _toy()
    lam = 0.03
    init = random_state(space, rng, ["E"]).normalized()
    psi = first_order_emission(init, CouplingConfig(lam, t))
    total = init + psi * lam
    assert abs(total.norm() ** 2 - (1 + lam**2 * s_norm(psi))) < 1e-12


def test_resonance_dominance(aligned_space):
    space = aligned_space
    h = InteractionHamiltonian(space, 1.0)
    r = space.excited.index_of(1, 0)
    t = 2.0
    psi = h.emission(space.basis_state("E", r), t)
    f = h.rotating
    sel = f.det_lower == r
    amps = np.abs(psi.amps["G"][f.det_upper[sel], f.photon[sel]])
    assert np.argmax(amps) == np.argmin(np.abs(f.detuning[sel]))


def test_s_monotone_on_resonant_single_mode(aligned_space):
    h = InteractionHamiltonian(aligned_space, 1.0, "onshell")
    init = aligned_space.basis_state("E", aligned_space.excited.index_of(1, 0))
    vals = [s_norm(h.emission(init, t)) for t in np.linspace(0, 5, 11)]
    assert vals[0] == 0
    assert np.all(np.diff(vals) > 0)
    assert np.allclose(vals, vals[-1] * np.linspace(0, 1, 11) ** 2, rtol=1e-12)


def _packet_s(refine, t=1.0):
    sp = Species(1.0, 0.5)
    d_eta, du, k_lo = 0.02 / refine, 0.1 / refine, 0.2
    ex = make_grid(MASSIVE, 1.5, int(2.4 / d_eta) | 1, d_eta)
    g = make_grid(MASSIVE, 1.0, int(4.0 / d_eta) | 1, d_eta)
    # photon cells cover the same log-window at every refinement
    ph = make_grid(MASSLESS, 0.0, 16 * refine, du, k_min=k_lo * np.exp(du / 2))
    space = FockSpace(sp, ex, g, ph)
    init = wavepacket_state(space, lambda p: np.exp(-(p**2) / 0.36)).normalized()
    h = InteractionHamiltonian(space, 0.01)
    return s_norm(h.emission(init, t)), h.emission_dropped_weight(init, t)


def test_s_norm_refinement_oracle():
    coarse, dropped = _packet_s(1)
    fine, _ = _packet_s(4)
    assert dropped < 1e-6
    assert abs(coarse / fine - 1) < 1e-3


def test_dropped_weight_reports_edge_leakage():
    sp = Species(1.0, 0.5)
    ex = make_grid(MASSIVE, 1.5, 5, 0.1)
    g = make_grid(MASSIVE, 1.0, 3, 0.1)
    ph = make_grid(MASSLESS, 0.0, 6, 0.4, k_min=0.1)
    space = FockSpace(sp, ex, g, ph)
    h = InteractionHamiltonian(space, 0.1)
    assert len(h.dropped_pairs) > 0
    assert 0 < h.emission_dropped_weight(space.basis_state("E", 2), 1.0) <= 1
