"""Named experiments driven by an INI config, with CSV output and a JSON manifest."""

from __future__ import annotations

import configparser
import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .coherence import (
    BinaryObservable, build_rho_coherent, build_rho_incoherent, coherence_scan, decay_pair, delta_rho, trace_with,
)
from .fockspace import MASSIVE, FockSpace, aligned_decay_grids, make_grid, tensor_with_frame
from .kinematics import Species
from .nonrel import compare_hint_forms, locality_defect, nonrel_space
from .operators import DensityOperator, KetBraOperator
from .perturbation import CouplingConfig, InteractionHamiltonian, first_order_emission, s_norm
from .qrf import (
    QrfTransform, apply_S, apply_S_dagger, picture_change_residual, sharply_peaked_state, superposed_time_evolve,
    support_mask, transform_hint_check,
)
from .rates import DensityOperator as _Density, build_pi1, build_pi2, probability, rate_transform_residual
from .serialization import transform_to_dict

SCENARIOS = ("decay-scan", "coherence-compare", "qrf-roundtrip", "superposed-time", "rate-transform", "nonrel-limit")
EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_NUMERICAL = 0, 2, 3, 4
PERTURBATIVE_LIMIT = 0.1
DROPPED_LIMIT = 1e-3
DENSE_LIMIT = 3000


class ScenarioError(Exception):
    exit_code = EXIT_NUMERICAL


class ConfigError(ScenarioError):
    exit_code = EXIT_CONFIG


class PhysicsError(ScenarioError):
    exit_code = EXIT_PHYSICS


class NumericalError(ScenarioError):
    exit_code = EXIT_NUMERICAL


def _complex_list(text: str) -> tuple:
    return tuple(complex(s.strip().replace(" ", "")) for s in text.split(",") if s.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(s) for s in text.split(",") if s.strip())


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


@dataclass
class ScenarioConfig:
    scenario: str = "decay-scan"
    seed: int = 0
    output: str = ""
    # detector and coupling
    m_D: float = 1.0
    gap: float = 0.5
    lam: float = 0.05
    # aligned grids
    resolution: int = 4
    n_excited: int = 17
    n_ground: int = 33
    n_photon: int = 16
    photon_anchor: int | None = None
    # decay and coherence
    t_min: float = 0.0
    t_max: float = 10.0
    n_t: int = 50
    p1: float = 0.0
    p2: float = 0.5
    alpha: tuple = (1.0, 1.0)
    beta: tuple = (1.0, 1.0)
    # quantum reference frame
    m_A: float = 3.0
    m_L: float = 2.0
    lab_modes: int = 4
    lab_start: int = -2
    lab_offset: float = 0.0
    transform_mode: str = "exact"
    chi: tuple = (0.3, 0.5, 0.4, 0.7)
    width: float = 0.0
    tau_i: float = 0.0
    tau_f: float = 2.0
    n_tau: int = 11
    # rates (dense, so on its own small grids)
    rate_t: float = 1.5
    rate_dt: float = 1e-4
    rate_lam: float = 1.0
    rate_resolution: int = 2
    rate_n_excited: int = 9
    rate_n_ground: int = 9
    rate_n_photon: int = 6
    sigma1: tuple = (0.0, 0.6, 0.8, 0.0)
    sigma2: tuple = (0.6, 0.0, 0.0, 0.8)
    # nonrelativistic limit
    p_max: float = 1.0
    nonrel_modes: int = 16
    mass_ratios: tuple = (3.0, 10.0, 30.0, 100.0)
    gap_ratio: float = 0.5
    nonrel_t: float = 1.0

    @property
    def csv_name(self) -> str:
        return self.output or f"{self.scenario}.csv"

    def echo(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, tuple):
                v = [[c.real, c.imag] if isinstance(c, complex) else c for c in v]
            out[k] = v
        return out


# (section, key, attribute, parser)
SCHEMA = [
    ("scenario", "name", "scenario", str), ("scenario", "seed", "seed", int), ("scenario", "output", "output", str),
    ("detector", "m_D", "m_D", float), ("detector", "gap", "gap", float), ("detector", "lambda", "lam", float),
    ("grid", "resolution", "resolution", int), ("grid", "n_excited", "n_excited", int),
    ("grid", "n_ground", "n_ground", int), ("grid", "n_photon", "n_photon", int),
    ("grid", "photon_anchor", "photon_anchor", _opt_int),
    ("decay", "t_min", "t_min", float), ("decay", "t_max", "t_max", float), ("decay", "n_t", "n_t", int),
    ("decay", "p1", "p1", float), ("decay", "p2", "p2", float),
    ("coherence", "alpha", "alpha", _complex_list), ("coherence", "beta", "beta", _complex_list),
    ("qrf", "m_A", "m_A", float), ("qrf", "m_L", "m_L", float), ("qrf", "lab_modes", "lab_modes", int),
    ("qrf", "lab_start", "lab_start", int), ("qrf", "lab_offset", "lab_offset", float),
    ("qrf", "mode", "transform_mode", str), ("qrf", "chi", "chi", _complex_list), ("qrf", "width", "width", float),
    ("qrf", "tau_i", "tau_i", float), ("qrf", "tau_f", "tau_f", float), ("qrf", "n_tau", "n_tau", int),
    ("rates", "t", "rate_t", float), ("rates", "dt", "rate_dt", float), ("rates", "lambda", "rate_lam", float),
    ("rates", "resolution", "rate_resolution", int), ("rates", "n_excited", "rate_n_excited", int),
    ("rates", "n_ground", "rate_n_ground", int), ("rates", "n_photon", "rate_n_photon", int),
    ("rates", "sigma1", "sigma1", _complex_list), ("rates", "sigma2", "sigma2", _complex_list),
    ("nonrel", "p_max", "p_max", float), ("nonrel", "n_modes", "nonrel_modes", int),
    ("nonrel", "mass_ratios", "mass_ratios", _float_list), ("nonrel", "gap_ratio", "gap_ratio", float),
    ("nonrel", "t", "nonrel_t", float),
]
_LOOKUP = {(s, k.lower()): (attr, parse) for s, k, attr, parse in SCHEMA}


def parse_config(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if (section, key) not in _LOOKUP:
                raise ConfigError(f"unknown key [{section}] {key}")
            attr, parse = _LOOKUP[(section, key)]
            try:
                values[attr] = parse(raw)
            except ValueError:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from None
    cfg = ScenarioConfig(**values)
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}; choose from {', '.join(SCENARIOS)}")
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


# building blocks


def decay_space(cfg: ScenarioConfig) -> FockSpace:
    sp = Species(cfg.m_D, cfg.gap)
    try:
        ex, g, ph = aligned_decay_grids(sp, cfg.resolution, cfg.n_excited, cfg.n_ground, cfg.n_photon,
                                        cfg.photon_anchor)
    except ValueError as exc:
        raise NumericalError(f"grid construction failed: {exc}") from None
    return FockSpace(sp, ex, g, ph)


def decay_modes(space: FockSpace, cfg: ScenarioConfig) -> tuple[int, int]:
    idx = space.excited.snap([cfg.p1, cfg.p2])
    if np.any(idx < 0):
        raise NumericalError("p1 or p2 lies outside the excited-detector grid")
    if idx[0] == idx[1]:
        raise ConfigError("p1 and p2 snap to the same grid mode")
    return int(idx[0]), int(idx[1])


def frame_transform(cfg: ScenarioConfig, base: FockSpace) -> QrfTransform:
    try:
        lab = make_grid(MASSIVE, cfg.m_L, cfg.lab_modes, base.excited.spacing, start=cfg.lab_start,
                        offset=cfg.lab_offset)
        return QrfTransform.build(base.with_frame(lab, "lab"), cfg.m_A, cfg.transform_mode)
    except ValueError as exc:
        raise NumericalError(f"transform construction failed: {exc}") from None


def rates_space(cfg: ScenarioConfig) -> FockSpace:
    sp = Species(cfg.m_D, cfg.gap)
    try:
        ex, g, ph = aligned_decay_grids(sp, cfg.rate_resolution, cfg.rate_n_excited, cfg.rate_n_ground,
                                        cfg.rate_n_photon)
    except ValueError as exc:
        raise NumericalError(f"grid construction failed: {exc}") from None
    return FockSpace(sp, ex, g, ph)


def _times(cfg: ScenarioConfig) -> np.ndarray:
    return np.linspace(cfg.t_min, cfg.t_max, cfg.n_t)


def _unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        raise ConfigError(f"{what} vanishes")
    return v / n


# validation


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)  # (exit code, message)
    warnings: list = field(default_factory=list)
    alignment: list | None = None

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def exit_code(self) -> int:
        return max((c for c, _ in self.errors), default=EXIT_OK)

    def lines(self) -> list[str]:
        out = [f"error: {m}" for _, m in self.errors] + [f"warning: {m}" for m in self.warnings]
        if self.alignment:
            out.append("lab_mode  q  xi  detector_shift  photon_shift  residual")
            out += [f"{r['lab_mode']}  {r['q']:.6g}  {r['xi']:.6g}  {r['detector_shift']:.6g}  "
                    f"{r['photon_shift']:.6g}  {r['residual']:.3g}" for r in self.alignment]
        return out or ["ok"]


def s_max_estimate(cfg: ScenarioConfig) -> float:
    space = decay_space(cfg)
    modes = decay_modes(space, cfg)
    h = InteractionHamiltonian(space, 1.0)
    ts = [cfg.t_max, 0.5 * (cfg.t_min + cfg.t_max)]
    return max(s_norm(first_order_emission(space.basis_state("E", n), CouplingConfig(1.0, t), h))
               for n in modes for t in ts)


def validate(cfg: ScenarioConfig) -> ValidationReport:
    rep = ValidationReport()
    for name in ("m_D", "m_A", "m_L"):
        if not getattr(cfg, name) > 0:
            rep.errors.append((EXIT_PHYSICS, f"{name} must be positive (got {getattr(cfg, name)})"))
    if cfg.gap <= 0:
        rep.errors.append((EXIT_PHYSICS, "the detector gap must be positive"))
    if cfg.n_t < 1 or cfg.t_max < cfg.t_min or cfg.t_min < 0:
        rep.errors.append((EXIT_CONFIG, "time grid needs n_t >= 1 and 0 <= t_min <= t_max"))
    if cfg.tau_f < cfg.tau_i or cfg.n_tau < 1:
        rep.errors.append((EXIT_CONFIG, "tau range needs tau_f >= tau_i and n_tau >= 1"))
    if cfg.transform_mode not in ("exact", "nearest", "linear"):
        rep.errors.append((EXIT_CONFIG, f"unknown transform mode {cfg.transform_mode!r}"))
    for name in ("chi", "sigma1", "sigma2"):
        if len(getattr(cfg, name)) != cfg.lab_modes:
            rep.errors.append((EXIT_CONFIG, f"{name} needs {cfg.lab_modes} entries"))
    if len(cfg.alpha) != 2 or len(cfg.beta) != 2:
        rep.errors.append((EXIT_CONFIG, "alpha and beta need two entries each"))
    if rep.errors:
        return rep

    if cfg.scenario in ("decay-scan", "coherence-compare"):
        try:
            s_max = s_max_estimate(cfg)
        except ScenarioError as exc:
            rep.errors.append((exc.exit_code, str(exc)))
            return rep
        if cfg.lam**2 * s_max >= PERTURBATIVE_LIMIT:
            rep.warnings.append(f"lambda^2 s_max = {cfg.lam**2 * s_max:.3g} >= {PERTURBATIVE_LIMIT}: "
                                "first-order perturbation theory is not reliable")
    if cfg.scenario in ("qrf-roundtrip", "superposed-time", "rate-transform"):
        base = rates_space(cfg) if cfg.scenario == "rate-transform" else decay_space(cfg)
        lab = make_grid(MASSIVE, cfg.m_L, cfg.lab_modes, base.excited.spacing, start=cfg.lab_start,
                        offset=cfg.lab_offset)
        q = QrfTransform.build(base.with_frame(lab, "lab"), cfg.m_A, "nearest")
        if not q.aligned:
            rep.alignment = q.alignment_table()
            msg = f"laboratory momenta are misaligned with the grids (max residual {q.residuals.max():.3g})"
            if cfg.transform_mode == "exact" or cfg.scenario == "rate-transform":
                rep.warnings.append(msg + "; the exact transform will refuse to run")
            else:
                rep.warnings.append(msg + f"; using {cfg.transform_mode} boosts")
    return rep


# scenarios: each returns (header, rows, diagnostics)


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_decay_scan(cfg: ScenarioConfig, rng, threads: int):
    space = decay_space(cfg)
    modes = decay_modes(space, cfg)
    h = InteractionHamiltonian(space, cfg.lam)
    init = [space.basis_state("E", n) for n in modes]

    def one(t):
        psi = [first_order_emission(x, CouplingConfig(cfg.lam, t), h) for x in init]
        s = [s_norm(p) for p in psi]
        defect = max(abs((x + p * cfg.lam).norm() ** 2 - (1 + cfg.lam**2 * si)) for x, p, si in zip(init, psi, s))
        dropped = max(h.emission_dropped_weight(x, t) for x in init)
        return (float(t), s[0], s[1]), defect, dropped

    out = _pmap(one, _times(cfg), threads)
    rows = [r for r, _, _ in out]
    diag = {
        "dropped_weight": max(d for _, _, d in out),
        "max_unitarity_defect": max(u for _, u, _ in out),
        "modes": {"p1": float(space.excited.momenta[modes[0]]), "p2": float(space.excited.momenta[modes[1]])},
        "lambda2_s_max": cfg.lam**2 * max(max(r[1], r[2]) for r in rows),
    }
    if diag["max_unitarity_defect"] > 1e-12:
        raise PhysicsError(f"first-order norm bookkeeping violated ({diag['max_unitarity_defect']:.3g})")
    return ["t", "s1", "s2"], rows, diag


def run_coherence_compare(cfg: ScenarioConfig, rng, threads: int):
    space = decay_space(cfg)
    modes = decay_modes(space, cfg)
    h = InteractionHamiltonian(space, cfg.lam)
    scan = coherence_scan(space, modes, cfg.lam, _times(cfg), cfg.alpha, cfg.beta, h)
    header = ["t", "s1", "s2", "re_dQ", "im_dQ"]
    for name in ("alpha1", "alpha2", "beta1", "beta2"):
        header += [f"{name}_re", f"{name}_im"]
    header.append("lambda")

    def check(row):
        t, s1, s2, dq, Q = row
        x1, x2, y1, y2 = decay_pair(space, modes, CouplingConfig(cfg.lam, t), h)
        d = delta_rho(build_rho_coherent(x1, x2, y1, y2, cfg.lam), build_rho_incoherent(x1, x2, y1, y2, cfg.lam))
        return abs(trace_with(Q, d) - dq)

    residual = max(_pmap(check, scan, threads))
    rows = []
    for t, s1, s2, dq, Q in scan:
        coeffs = [complex(c) for c in (*Q.alpha, *Q.beta)]
        rows.append([t, s1, s2, dq.real, dq.imag] + [v for c in coeffs for v in (c.real, c.imag)] + [cfg.lam])
    init = [space.basis_state("E", n) for n in modes]
    diag = {
        "dropped_weight": max(h.emission_dropped_weight(x, cfg.t_max) for x in init),
        "max_unitarity_defect": 0.0,
        "max_closed_form_residual": float(residual),
    }
    if residual > 1e-10:
        raise PhysicsError(f"closed-form dQ disagrees with the trace ({residual:.3g})")
    return header, rows, diag


def _interior_states(q: QrfTransform, rng, count: int = 3):
    mask = support_mask(q)
    out = []
    for _ in range(count):
        st = q.space_A.zeros()
        for s, m in mask.items():
            st.amps[s][m] = rng.normal(size=m.sum()) + 1j * rng.normal(size=m.sum())
        out.append(st.normalized())
    return out


def run_qrf_roundtrip(cfg: ScenarioConfig, rng, threads: int):
    base = decay_space(cfg)
    q = frame_transform(cfg, base)
    states = _interior_states(q, rng)
    images = [apply_S(x, q) for x in states]
    unit = max(abs(y.norm() / x.norm() - 1) for x, y in zip(states, images))
    back = max((apply_S_dagger(y, q) - x).norm() for x, y in zip(states, images))
    rho = DensityOperator.ensemble([(0.5, states[0]), (0.5, states[1])])
    pi = KetBraOperator.projector(states[2])
    p_a = probability(rho, pi)
    p_l = probability(rho.op.map_vectors(lambda v: apply_S(v, q), q.space_L), pi.map_vectors(lambda v: apply_S(v, q),
                                                                                          q.space_L))
    vac = max(abs(y.sector_norm2("G") - x.sector_norm2("G")) for x, y in zip(states, images))
    checks = [
        ("unitarity", unit),
        ("round_trip", back),
        ("probability_invariance", abs(p_a - p_l)),
        ("vacuum_invariance", vac),
        ("hint_covariance", transform_hint_check(q, 0.0)),
        ("hint_covariance_t", transform_hint_check(q, cfg.tau_f)),
        ("picture_change", picture_change_residual(q, cfg.tau_f, states)),
    ]
    n, dx = base.excited.n, base.excited.spacing
    rows = [(name, float(r), n, dx) for name, r in checks]
    diag = {"dropped_weight": 0.0, "max_unitarity_defect": float(max(unit, back)), "transform": transform_to_dict(q)}
    if q.mode == "exact" and (max(unit, back, abs(p_a - p_l)) > 1e-12 or checks[-1][1] > 1e-10):
        raise PhysicsError("aligned transform failed its unitarity or picture-change checks")
    return ["name", "residual", "grid_n", "spacing"], rows, diag


def run_superposed_time(cfg: ScenarioConfig, rng, threads: int):
    base = decay_space(cfg)
    q = frame_transform(cfg, base)
    chi = _unit(cfg.chi, "chi")
    init = sharply_peaked_state(base, cfg.width)
    x_l = apply_S(tensor_with_frame(init, chi, q.lab, "lab"), q)
    h_l = InteractionHamiltonian(q.space_L, cfg.lam)
    h0 = InteractionHamiltonian(base, cfg.lam)
    eye = np.eye(q.ancilla.n)
    rows, worst = [], 0.0
    for tau in np.linspace(cfg.tau_i, cfg.tau_f, cfg.n_tau):
        out = superposed_time_evolve(x_l, q, cfg.tau_i, tau, cfg.lam, h_l)
        for i in range(q.ancilla.n):
            amp = x_l.amps["E"][..., i]
            w = float(np.sum(np.abs(amp) ** 2))
            if w == 0:
                continue
            lab_t = q.gamma_ancilla[i] * (tau - cfg.tau_i)
            branch_init = base.zeros()
            branch_init.amps["E"][...] = amp
            psi = first_order_emission(branch_init, CouplingConfig(cfg.lam, lab_t), h0)
            ref = tensor_with_frame(branch_init + psi * cfg.lam, eye[i], q.ancilla, "ancilla")
            got = out.map(lambda s, a: a * eye[i])
            res = (got - ref).norm()
            worst = max(worst, res)
            rows.append((float(tau), i, float(q.ancilla.momenta[i]), float(q.gamma_ancilla[i]), float(lab_t),
                         s_norm(psi) / w, float(res)))
    diag = {"dropped_weight": float(h0.emission_dropped_weight(init, q.gamma_ancilla.max() * (cfg.tau_f - cfg.tau_i))),
            "max_unitarity_defect": 0.0, "max_branch_residual": float(worst), "transform": transform_to_dict(q)}
    if worst > 1e-10:
        raise PhysicsError(f"superposed evolution disagrees with dilated branch evolution ({worst:.3g})")
    header = ["tau", "ancilla_mode", "ancilla_momentum", "gamma", "lab_duration", "s", "branch_residual"]
    return header, rows, diag


def run_rate_transform(cfg: ScenarioConfig, rng, threads: int):
    base = rates_space(cfg)
    q = frame_transform(cfg, base)
    if q.space_A.dim > DENSE_LIMIT:
        raise ConfigError(f"rate evaluation is dense; dimension {q.space_A.dim} exceeds {DENSE_LIMIT}")
    chi = _unit(cfg.chi, "chi")
    x_l = apply_S(tensor_with_frame(sharply_peaked_state(base, cfg.width), chi, q.lab, "lab"), q)
    rho = _Density.ensemble([(1.0, x_l)])
    try:
        pis = [build_pi1(q, _unit(cfg.sigma1, "sigma1")), build_pi2(q, _unit(cfg.sigma2, "sigma2"))]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    reps = _pmap(lambda pi: rate_transform_residual(rho, pi, q, cfg.rate_t, cfg.rate_lam, cfg.rate_dt), pis, threads)
    rows = [(r.observable, r.lhs, r.rhs, r.residual, r.extra_terms[0], r.extra_terms[1]) for r in reps]
    diag = {"dropped_weight": 0.0, "max_unitarity_defect": 0.0,
            "literal_gamma_residual": {r.observable: r.literal_gamma_residual for r in reps},
            "transform": transform_to_dict(q)}
    if any(r.residual > 1e-6 or r.extra_terms[1] > 1e-10 for r in reps):
        raise PhysicsError("rate transformation law violated")
    return ["observable_name", "lhs", "rhs", "residual", "extra_commutator_term", "dS_term"], rows, diag


def run_nonrel_limit(cfg: ScenarioConfig, rng, threads: int):
    def one(r):
        m = r * cfg.p_max
        space = nonrel_space(m, cfg.gap_ratio * cfg.p_max, cfg.p_max, cfg.nonrel_modes)
        dev = compare_hint_forms(m, 1.0, cfg.p_max, cfg.nonrel_modes, cfg.gap_ratio * cfg.p_max, cfg.nonrel_t)
        return (float(r), locality_defect(space), dev)

    try:
        rows = _pmap(one, cfg.mass_ratios, threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    diag = {"dropped_weight": 0.0, "max_unitarity_defect": 0.0}
    order = np.argsort([r[0] for r in rows])
    loc = np.array([rows[i][1] for i in order])
    dev = np.array([rows[i][2] for i in order])
    diag["monotone_decrease"] = bool(np.all(np.diff(loc) < 0) and np.all(np.diff(dev) < 0))
    if len(rows) >= 2:
        x = np.log([rows[i][0] for i in order])
        diag["locality_power_law"] = float(np.polyfit(x, np.log(loc), 1)[0])
        diag["deviation_power_law"] = float(np.polyfit(x, np.log(dev), 1)[0])
    return ["mass_ratio", "locality_defect", "hint_deviation"], rows, diag


RUNNERS = {
    "decay-scan": run_decay_scan,
    "coherence-compare": run_coherence_compare,
    "qrf-roundtrip": run_qrf_roundtrip,
    "superposed-time": run_superposed_time,
    "rate-transform": run_rate_transform,
    "nonrel-limit": run_nonrel_limit,
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


@dataclass
class RunResult:
    exit_code: int
    csv_path: Path | None
    manifest_path: Path | None
    message: str = ""
    manifest: dict | None = None


def run(cfg: ScenarioConfig, output_dir=".", threads: int = 1, seed: int | None = None) -> RunResult:
    if seed is not None:
        cfg.seed = int(seed)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = validate(cfg)
    if not report.ok:
        return RunResult(report.exit_code, None, None, "; ".join(m for _, m in report.errors))
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    code, message, header, rows, diag = EXIT_OK, "ok", None, [], {}
    try:
        with np.errstate(all="raise"):
            header, rows, diag = RUNNERS[cfg.scenario](cfg, rng, max(1, int(threads)))
    except ScenarioError as exc:
        code, message = exc.exit_code, str(exc)
    except (FloatingPointError, RuntimeError, np.linalg.LinAlgError) as exc:
        code, message = EXIT_NUMERICAL, f"numerical failure: {exc}"
    wall = time.perf_counter() - t0

    csv_path = out / cfg.csv_name
    if header is not None:
        write_csv(csv_path, header, rows)
    flags = list(report.warnings)
    if diag.get("dropped_weight", 0.0) >= DROPPED_LIMIT:
        flags.append(f"dropped_weight {diag['dropped_weight']:.3g} >= {DROPPED_LIMIT}")
    if diag.get("monotone_decrease") is False:
        flags.append("nonrelativistic sweep is not monotone")
    manifest = {
        "scenario": cfg.scenario,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "csv": csv_path.name if header is not None else None,
        "rows": len(rows),
        "status": code,
        "message": message,
        "flagged": bool(flags),
        "flags": flags,
        "alignment": report.alignment,
        "diagnostics": {**diag, "wall_time": wall},
    }
    man_path = out / (Path(cfg.csv_name).stem + ".manifest.json")
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return RunResult(code, csv_path if header is not None else None, man_path, message, manifest)
