"""Campaign orchestration: measurement runs, extraction, CSV/figure emission.

A campaign builds one virtual rig from truth parameters plus a theory force
curve, executes measurement runs (each a sweep of piezo set points with the
compensation and drive-amplitude loops active), runs the calibration and
gradient extraction per run, and writes delimited outputs, a summary table and
figures to the output directory.

Two fidelity modes share the same rig physics:

* ``fast``   - settled lock-in outputs from the exact two-phase projection,
               with post-filter channel noise drawn per record;
* ``signal`` - full time-domain synthesis demodulated by the software lock-in
               chain, filter state and feedback loops carried across set points.

Set-point positions inherit the previous run's fitted d0 (the first run uses
the nominal truth), which is what scatters assigned separations run to run.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    CalibrationFit,
    DemodRecord,
    GradientCurve,
    SpringFit,
    alpha_of,
    casimir_gradient,
    electrostatic_gradient,
    fit_calibration,
    gradient_difference_check,
    hydro_force_over_R,
    residual_stats,
    smooth_trend,
    spring_fit,
    total_gradient,
)
from .configfile import get_bool, get_float, get_int, get_str, parse_kv_file
from .constants import EPS0
from .errors import ConfigError, ContactError, DomainError, FitError
from .forces import GasProperties
from .lifshitz import gradient_over_R, pressure_curve
from .lockin import (
    FeedbackState,
    LockinConfig,
    dc_output,
    demod_noise_rms,
    demodulate,
    v0_feedback_step,
    v0_loop_gain_bound,
    vac_setpoint_step,
)
from .materials import DielectricModel, VacuumModel, bundled_materials, load_materials
from .rig import (
    CantileverDynamics,
    DriveState,
    ForceCurve,
    TruthParams,
    settled_outputs,
    synthesize,
)

__all__ = [
    "CampaignConfig",
    "RunResult",
    "CampaignResult",
    "run_campaign",
    "emit_theory_tables",
    "resolve_material_pair",
    "setpoint_plan",
]

PROFILES = ("normal", "spring_constant", "high_vac_comparison")


@dataclass
class CampaignConfig:
    profile: str = "normal"
    mode: str = "fast"                  # fast | signal
    n_runs: int = 10
    n_setpoints: int = 50
    material_pair: str = "au_au"        # au_au | au_ito | vacuum | custom
    material_a: str = ""                # for custom pairs
    material_b: str = ""
    materials_file: str = ""
    seed: int = 12345
    out_dir: str = "campaign_out"
    # lock-in / timing
    rc_time: float = 1.0
    poles: int = 4
    settle_time: float = 8.0            # s per set point in signal mode
    sample_rate: float = 20000.0
    # set-point plan
    d_min: float = 55e-9
    d_max: float = 1095e-9
    pin_95nm: bool = True
    # drive
    s2_setpoint: float = 0.004          # V, normal profile
    s2_setpoint_high: float = 0.08      # V, strong-drive run of the comparison profile
    s2_setpoint_spring: float = 0.194   # V, spring-constant profile (~2 nN rms)
    delta_d: float = 3.85e-9
    delta_d_bias: float = 0.0           # fractional true-vs-assumed modulation error
    # noise
    channel_noise: float | None = None  # V rms per AC channel; None -> from truth density
    v_dc_loop_noise: float = 30e-6      # V rms residual of the compensation loop
    # physics switches
    temperature: float = 300.0
    slip_length: float = 0.0
    freeze_deflection: bool = False
    cantilever_mode: str = "quasi_static"
    # execution
    plots: bool = True
    workers: int | None = None
    start_time: float = 1.6e9
    run_period: float = 420.0
    truth: TruthParams = field(default_factory=TruthParams)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.mode not in ("fast", "signal"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.n_runs < 1 or self.n_setpoints < 5:
            raise ConfigError("need n_runs >= 1 and n_setpoints >= 5")
        # the drive classes must stay separated: ~50 pN calibration forces
        # against nN-class strong-drive runs
        if self.s2_setpoint_spring < 5.0 * self.s2_setpoint:
            raise ConfigError("spring-profile setpoint must be well above the "
                              "calibration setpoint (nN vs 50 pN class)")
        if self.s2_setpoint_high < 2.0 * self.s2_setpoint:
            raise ConfigError("comparison-profile high drive must exceed the "
                              "low drive distinctly")

    @property
    def effective_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get("CASIMIR_RIG_THREADS", "")
        return max(1, int(env)) if env.isdigit() and env else 1

    def channel_noise_rms(self) -> float:
        if self.channel_noise is not None:
            return self.channel_noise
        return demod_noise_rms(self.truth.detector_noise, self.rc_time, self.poles)

    def dc_noise_rms(self) -> float:
        base = self.channel_noise if self.channel_noise is not None else None
        if base is not None:
            return base / math.sqrt(2.0)
        return demod_noise_rms(self.truth.detector_noise, self.rc_time, self.poles, dc=True)


# ---------------------------------------------------------------------------
# configuration files


_TRUTH_KEYS = {
    "d0_nm": ("d0", 1e-9),
    "v0_v": ("V0", 1.0),
    "k_over_r": ("k_over_R", 1.0),
    "gamma_v_per_m": ("gamma", 1.0),
    "radius_um": ("R", 1e-6),
    "detector_noise_v_rthz": ("detector_noise", 1.0),
    "d0_drift_nm_per_run": ("d0_drift", 1e-9),
    "v0_drift_v_per_run": ("v0_drift", 1.0),
    "v0_jitter_v": ("v0_jitter", 1.0),
    "pfa_gap_bias_nm": ("pfa_gap_bias", 1e-9),
    "background_gradient": ("background_gradient", 1.0),
}


def config_from_file(path, profile_preset: str | None = None,
                     seed_override: int | None = None, out_dir: str | None = None) -> CampaignConfig:
    """Build a CampaignConfig from a key-value file with optional CLI overrides.

    ``profile_preset`` "fast" shrinks the plan for quick runs; "paper" applies
    the full acquisition timing.  File keys always win over the preset.
    """
    sections = parse_kv_file(path)
    camp = sections.get("campaign", {})
    cfg = CampaignConfig()
    if profile_preset == "fast":
        cfg.n_runs, cfg.n_setpoints, cfg.rc_time, cfg.settle_time = 10, 8, 0.2, 2.0
    elif profile_preset == "paper":
        cfg.n_runs, cfg.n_setpoints, cfg.rc_time, cfg.settle_time = 50, 50, 1.0, 8.0
    elif profile_preset is not None:
        raise ConfigError(f"unknown CLI profile preset {profile_preset!r}")

    cfg.profile = get_str(camp, "profile", cfg.profile)
    cfg.mode = get_str(camp, "mode", cfg.mode)
    cfg.n_runs = get_int(camp, "n_runs", cfg.n_runs)
    cfg.n_setpoints = get_int(camp, "n_setpoints", cfg.n_setpoints)
    cfg.material_pair = get_str(camp, "material_pair", cfg.material_pair)
    cfg.material_a = get_str(camp, "material_a", cfg.material_a or "-")
    cfg.material_b = get_str(camp, "material_b", cfg.material_b or "-")
    cfg.materials_file = get_str(camp, "materials_file", cfg.materials_file or "-")
    cfg.material_a = "" if cfg.material_a == "-" else cfg.material_a
    cfg.material_b = "" if cfg.material_b == "-" else cfg.material_b
    cfg.materials_file = "" if cfg.materials_file == "-" else cfg.materials_file
    cfg.seed = get_int(camp, "seed", cfg.seed)
    cfg.rc_time = get_float(camp, "rc_time", cfg.rc_time)
    cfg.poles = get_int(camp, "poles", cfg.poles)
    cfg.settle_time = get_float(camp, "settle_time", cfg.settle_time)
    cfg.sample_rate = get_float(camp, "sample_rate", cfg.sample_rate)
    cfg.d_min = get_float(camp, "d_min_nm", cfg.d_min * 1e9) * 1e-9
    cfg.d_max = get_float(camp, "d_max_nm", cfg.d_max * 1e9) * 1e-9
    cfg.pin_95nm = get_bool(camp, "pin_95nm", cfg.pin_95nm)
    cfg.s2_setpoint = get_float(camp, "s2_setpoint_v", cfg.s2_setpoint)
    cfg.s2_setpoint_high = get_float(camp, "s2_setpoint_high_v", cfg.s2_setpoint_high)
    cfg.s2_setpoint_spring = get_float(camp, "s2_setpoint_spring_v", cfg.s2_setpoint_spring)
    cfg.delta_d = get_float(camp, "delta_d_nm", cfg.delta_d * 1e9) * 1e-9
    cfg.delta_d_bias = get_float(camp, "delta_d_bias", cfg.delta_d_bias)
    noise = get_float(camp, "channel_noise_v", -1.0)
    cfg.channel_noise = noise if noise > 0 else None
    cfg.v_dc_loop_noise = get_float(camp, "v_dc_loop_noise_v", cfg.v_dc_loop_noise)
    cfg.temperature = get_float(camp, "temperature_k", cfg.temperature)
    cfg.slip_length = get_float(camp, "slip_length_nm", cfg.slip_length * 1e9) * 1e-9
    cfg.freeze_deflection = get_bool(camp, "freeze_deflection", cfg.freeze_deflection)
    cfg.cantilever_mode = get_str(camp, "cantilever_mode", cfg.cantilever_mode)
    cfg.plots = get_bool(camp, "plots", cfg.plots)
    workers = get_int(camp, "workers", -1)
    cfg.workers = workers if workers > 0 else None
    cfg.start_time = get_float(camp, "start_time", cfg.start_time)
    cfg.run_period = get_float(camp, "run_period_s", cfg.run_period)

    truth_kwargs = {}
    for key, (attr, scale) in _TRUTH_KEYS.items():
        if key in sections.get("truth", {}):
            truth_kwargs[attr] = get_float(sections["truth"], key) * scale
    if truth_kwargs:
        cfg.truth = replace(TruthParams(), **truth_kwargs)

    if seed_override is not None:
        cfg.seed = seed_override
    if out_dir is not None:
        cfg.out_dir = out_dir
    cfg.__post_init__()  # re-validate after field overrides
    return cfg


def resolve_material_pair(cfg: CampaignConfig) -> tuple[DielectricModel, DielectricModel]:
    pair = cfg.material_pair.lower()
    if pair == "vacuum":
        return VacuumModel(), VacuumModel()
    mats = dict(bundled_materials())
    if cfg.materials_file:
        mats.update(load_materials(cfg.materials_file))
    if pair == "au_au":
        return mats["gold"], mats["gold"]
    if pair == "au_ito":
        return mats["gold"], mats["ito"]
    if pair == "custom":
        if not cfg.material_a or not cfg.material_b:
            raise ConfigError("custom pair needs material_a and material_b")
        return mats[cfg.material_a.lower()], mats[cfg.material_b.lower()]
    raise ConfigError(f"unknown material pair {cfg.material_pair!r}")


# ---------------------------------------------------------------------------
# set-point planning


def setpoint_plan(d_min: float, d_max: float, n: int, pin_95nm: bool = True) -> np.ndarray:
    """Descending log-spaced target separations; optionally pins one point at 95 nm."""
    targets = np.geomspace(d_max, d_min, n)
    if pin_95nm and d_min <= 95e-9 <= d_max:
        targets[int(np.argmin(np.abs(targets - 95e-9)))] = 95e-9
    return targets


# ---------------------------------------------------------------------------
# one run


@dataclass
class RunResult:
    run_id: int
    records: list[DemodRecord]
    fit: CalibrationFit | None
    total: GradientCurve | None
    casimir: GradientCurve | None
    elec: GradientCurve | None
    hydro_over_R: np.ndarray | None      # columns: d, F/R rms, sigma
    spring: SpringFit | None
    d0_used_for_plan: float
    setpoint: float
    error: str = ""


def _measure_fast(truth, drive, dyn, curve, gas, cfg, rng, freeze):
    out = settled_outputs(truth, drive, dyn, casimir_curve=curve, gas=gas,
                          freeze_deflection=freeze)
    sig = cfg.channel_noise_rms()
    sig_dc = cfg.dc_noise_rms()
    return {
        "S0": out.S0 + rng.normal(0.0, sig_dc),
        "S_w1": out.S_w1 + rng.normal(0.0, sig),
        "S_2w1": out.S_2w1 + rng.normal(0.0, sig),
        "S_4w1": out.S_4w1 + rng.normal(0.0, sig),
        "S_w2_I": out.S_w2_I + rng.normal(0.0, sig),
        "S_w2_Q": out.S_w2_Q + rng.normal(0.0, sig),
    }


class _SignalChain:
    """Per-run lock-in bank with filter state carried across set points."""

    def __init__(self, cfg: CampaignConfig, drive_proto: DriveState):
        self.cfg = cfg
        mk = lambda omega: LockinConfig(reference_omega=omega, rc_time=cfg.rc_time,
                                        poles=cfg.poles)
        self.configs = {
            "S_w1": mk(drive_proto.omega1),
            "S_2w1": mk(2.0 * drive_proto.omega1),
            "S_4w1": mk(4.0 * drive_proto.omega1),
            "S_w2": mk(drive_proto.omega2),
        }
        self.states = {name: None for name in self.configs}
        self.dc_state = None
        self.t = 0.0

    def measure(self, samples: np.ndarray) -> dict:
        out = {}
        fs = self.cfg.sample_rate
        for name, lockin_cfg in self.configs.items():
            (i_val, q_val), st = demodulate(samples, lockin_cfg, fs,
                                            state=self.states[name],
                                            return_state=True, t_start=self.t)
            self.states[name] = st
            if name == "S_w2":
                out["S_w2_I"], out["S_w2_Q"] = i_val, q_val
            else:
                out[name] = i_val
        s0, self.dc_state = dc_output(samples, self.cfg.rc_time, self.cfg.poles, fs,
                                      state=self.dc_state, return_state=True)
        out["S0"] = s0
        self.t += samples.size / fs
        return out


def _measure_signal(truth, drive, dyn, curve, gas, cfg, chain: _SignalChain,
                    seed, freeze, duration=None):
    dur = cfg.settle_time if duration is None else duration
    samples = synthesize(truth, drive, dyn, dur, cfg.sample_rate, seed=seed,
                         casimir_curve=curve, gas=gas, freeze_deflection=freeze,
                         t_start=chain.t)
    return chain.measure(samples)


def _execute_run(run_id: int, cfg: CampaignConfig, curve: ForceCurve,
                 gas: GasProperties, d0_plan_estimate: float,
                 kappa_estimate: float, seed_seq: np.random.SeedSequence) -> RunResult:
    rng = np.random.default_rng(seed_seq)
    dyn = CantileverDynamics(mode=cfg.cantilever_mode)
    truth_run = replace(
        cfg.truth,
        d0=cfg.truth.d0 + run_id * cfg.truth.d0_drift,
        V0=cfg.truth.V0 + run_id * cfg.truth.v0_drift,
    )
    if cfg.profile == "spring_constant":
        setpoint = cfg.s2_setpoint_spring
        # strong-drive sweeps stay away from the pull-in region
        targets = setpoint_plan(max(cfg.d_min, 150e-9), cfg.d_max, cfg.n_setpoints, False)
    elif cfg.profile == "high_vac_comparison" and run_id % 2 == 1:
        setpoint = cfg.s2_setpoint_high
        targets = setpoint_plan(cfg.d_min, cfg.d_max, cfg.n_setpoints, cfg.pin_95nm)
    else:
        setpoint = cfg.s2_setpoint
        targets = setpoint_plan(cfg.d_min, cfg.d_max, cfg.n_setpoints, cfg.pin_95nm)

    sig_ch = cfg.channel_noise_rms()
    sig_dc = cfg.dc_noise_rms()
    true_delta_d = cfg.delta_d * (1.0 + cfg.delta_d_bias)
    freeze = cfg.freeze_deflection
    chain = None
    fb = FeedbackState(V_AC=0.1, S2w1_setpoint=setpoint)
    records: list[DemodRecord] = []
    error = ""

    if cfg.mode == "signal":
        drive_proto = DriveState(Delta_d=true_delta_d)
        chain = _SignalChain(cfg, drive_proto)
        # converge the compensation loop once per run at the far set point
        d_far_pz = d0_plan_estimate - targets[0]
        alpha_est = kappa_estimate / targets[0]
        fb = vac_setpoint_step(fb, alpha_est)
        loop_cfg = chain.configs["S_w1"]
        slope = 2.0 * alpha_est * fb.V_AC
        gain = 0.25 * v0_loop_gain_bound(loop_cfg, slope)
        fb = replace(fb, integrator_gain=gain)
        for it in range(60):
            block = 2.0 * cfg.poles * cfg.rc_time if it == 0 else 2.0 * cfg.rc_time
            drive = DriveState(d_pz=d_far_pz, Delta_d=true_delta_d,
                               V_DC=fb.V_DC, V_AC=fb.V_AC)
            meas = _measure_signal(truth_run, drive, dyn, curve, gas, cfg, chain,
                                   rng.integers(2**63), freeze, duration=block)
            fb = v0_feedback_step(meas["S_w1"], fb, block)
            if abs(meas["S_w1"]) < 4.0 * max(sig_ch, 1e-8) and it >= 8:
                break

    for j, d_target in enumerate(targets):
        alpha_est = kappa_estimate / d_target
        fb = vac_setpoint_step(fb, alpha_est)
        t_unix = cfg.start_time + run_id * cfg.run_period + j * cfg.settle_time
        try:
            if cfg.mode == "fast":
                v0_now = truth_run.V0 + rng.normal(0.0, truth_run.v0_jitter)
                v_dc = -v0_now + rng.normal(0.0, cfg.v_dc_loop_noise)
                drive = DriveState(d_pz=d0_plan_estimate - d_target, Delta_d=true_delta_d,
                                   V_DC=v_dc, V_AC=fb.V_AC)
                meas = _measure_fast(replace(truth_run, V0=v0_now), drive, dyn, curve,
                                     gas, cfg, rng, freeze)
            else:
                v0_now = truth_run.V0 + rng.normal(0.0, truth_run.v0_jitter)
                # keep the loop bandwidth fixed as the slope dS_w1/dV_DC grows
                slope_now = 2.0 * alpha_est * fb.V_AC
                fb = replace(fb, integrator_gain=0.25 * v0_loop_gain_bound(
                    chain.configs["S_w1"], slope_now))
                drive = DriveState(d_pz=d0_plan_estimate - d_target, Delta_d=true_delta_d,
                                   V_DC=fb.V_DC, V_AC=fb.V_AC)
                meas = _measure_signal(replace(truth_run, V0=v0_now), drive, dyn, curve,
                                       gas, cfg, chain, rng.integers(2**63), freeze)
                v_dc = fb.V_DC
                fb = v0_feedback_step(meas["S_w1"], fb, min(cfg.settle_time,
                                                            2.0 * cfg.poles * cfg.rc_time))
        except (ContactError, DomainError) as exc:
            error = f"set point {j} (target {d_target*1e9:.1f} nm): {exc}"
            break
        records.append(DemodRecord(
            d_pz=drive.d_pz, V_AC=drive.V_AC, V_DC=v_dc,
            S0=meas["S0"], S_w1=meas["S_w1"], S_2w1=meas["S_2w1"],
            S_4w1=meas["S_4w1"], S_w2_I=meas["S_w2_I"], S_w2_Q=meas["S_w2_Q"],
            noise_ac=sig_ch, noise_dc=sig_dc, t_unix=t_unix,
        ))

    result = RunResult(run_id=run_id, records=records, fit=None, total=None,
                       casimir=None, elec=None, hydro_over_R=None, spring=None,
                       d0_used_for_plan=d0_plan_estimate, setpoint=setpoint, error=error)
    if len(records) < 5:
        result.error = result.error or "too few records"
        return result

    try:
        alphas = np.array([alpha_of(r) for r in records])
        # noiseless runs still need finite fit weights
        sigma = np.maximum(alphas[:, 1], 1e-9 * alphas[:, 0])
        result.fit = fit_calibration(np.array([r.d_pz for r in records]),
                                     alphas[:, 0], sigma)
    except FitError as exc:
        result.error = f"calibration fit failed: {exc}"
        return result

    fit = result.fit
    d = np.array([fit.d0 - r.d_pz for r in records])
    tot = np.array([total_gradient(r, fit, cfg.delta_d) for r in records])
    cas = np.array([casimir_gradient(r, fit, cfg.delta_d) for r in records])
    ele = np.array([electrostatic_gradient(r, fit) for r in records])
    hyd = np.array([hydro_force_over_R(r, fit) for r in records])
    t0 = records[0].t_unix
    result.total = GradientCurve(d, tot[:, 0], tot[:, 1], run_id=run_id, t_unix=t0)
    result.casimir = GradientCurve(d, cas[:, 0], cas[:, 1], run_id=run_id, t_unix=t0)
    result.elec = GradientCurve(d, ele[:, 0], ele[:, 1], run_id=run_id, t_unix=t0)
    result.hydro_over_R = np.column_stack([d, hyd[:, 0], hyd[:, 1]])
    if cfg.profile == "spring_constant":
        try:
            result.spring = spring_fit(records, fit)
        except FitError as exc:
            result.error = f"spring fit failed: {exc}"
    return result


# ---------------------------------------------------------------------------
# campaign driver


@dataclass
class CampaignResult:
    config: CampaignConfig
    runs: list[RunResult]
    theory_d: np.ndarray
    theory_pressure: np.ndarray
    out_dir: Path
    summary: str = ""

    @property
    def good_runs(self) -> list[RunResult]:
        return [r for r in self.runs if r.fit is not None]


def _run_chunk(args):
    cfg, curve, gas, run_ids, seeds = args
    results = []
    d0_est = cfg.truth.d0
    kappa_est = cfg.truth.kappa
    for run_id, seed in zip(run_ids, seeds):
        res = _execute_run(run_id, cfg, curve, gas, d0_est, kappa_est,
                           np.random.SeedSequence(seed))
        results.append(res)
        if res.fit is not None:
            d0_est = res.fit.d0
            kappa_est = res.fit.kappa
    return results


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    """Execute the configured campaign and write all artifacts to cfg.out_dir."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eps_a, eps_b = resolve_material_pair(cfg)
    theory_d = np.geomspace(20e-9, 2000e-9, 70)
    if cfg.material_pair.lower() == "vacuum":
        theory_p = np.zeros_like(theory_d)
        curve = ForceCurve.zero()
    else:
        theory_p = pressure_curve(theory_d, cfg.temperature, eps_a, eps_b)
        curve = ForceCurve.from_pressure(theory_d, theory_p)
    gas = GasProperties(slip_length_b=cfg.slip_length)

    root = np.random.SeedSequence(cfg.seed)
    run_seeds = [int(s.generate_state(1)[0]) for s in root.spawn(cfg.n_runs)]
    workers = cfg.effective_workers
    chunks = []
    n_chunks = min(workers, cfg.n_runs)
    bounds = np.array_split(np.arange(cfg.n_runs), n_chunks)
    for ids in bounds:
        chunks.append((cfg, curve, gas, [int(i) for i in ids],
                       [run_seeds[i] for i in ids]))
    if workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk_results = list(pool.map(_run_chunk, chunks))
    else:
        chunk_results = [_run_chunk(c) for c in chunks]
    runs = sorted([r for chunk in chunk_results for r in chunk], key=lambda r: r.run_id)

    result = CampaignResult(config=cfg, runs=runs, theory_d=theory_d,
                            theory_pressure=theory_p, out_dir=out_dir)
    _write_outputs(result)
    if cfg.plots:
        from . import plots
        plots.render_campaign_figures(result)
    return result


# ---------------------------------------------------------------------------
# outputs


def _fmt(x):
    return f"{x:.10g}"


def _write_outputs(result: CampaignResult) -> None:
    cfg = result.config
    out = result.out_dir

    with open(out / "records.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "t_unix", "d_pz_nm", "V_AC_V", "V_DC_V", "S0_V",
                    "S_w1_V", "S_2w1_V", "S_4w1_V", "S_w2I_V", "S_w2Q_V"])
        for run in result.runs:
            for r in run.records:
                w.writerow([run.run_id, _fmt(r.t_unix), _fmt(r.d_pz * 1e9), _fmt(r.V_AC),
                            _fmt(r.V_DC), _fmt(r.S0), _fmt(r.S_w1), _fmt(r.S_2w1),
                            _fmt(r.S_4w1), _fmt(r.S_w2_I), _fmt(r.S_w2_Q)])

    with open(out / "calibration_fits.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "d0_nm", "d0_err_nm", "kappa_nm_per_V", "kappa_err_rel", "chi2"])
        for run in result.good_runs:
            f = run.fit
            w.writerow([run.run_id, _fmt(f.d0 * 1e9), _fmt(f.d0_err * 1e9),
                        _fmt(f.kappa * 1e9), _fmt(f.kappa_err_rel), _fmt(f.chi2_reduced)])

    with open(out / "gradients.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "d_nm", "total_grad", "total_sigma",
                    "casimir_grad", "casimir_sigma", "elec_grad"])
        for run in result.good_runs:
            for i in range(run.total.d.size):
                w.writerow([run.run_id, _fmt(run.total.d[i] * 1e9),
                            _fmt(run.total.grad_over_R[i]), _fmt(run.total.sigma[i]),
                            _fmt(run.casimir.grad_over_R[i]), _fmt(run.casimir.sigma[i]),
                            _fmt(run.elec.grad_over_R[i])])

    with open(out / "hydro.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "d_nm", "F_over_R_rms_N_per_m", "sigma", "F_rms_N"])
        for run in result.good_runs:
            for d, f_r, sig in run.hydro_over_R:
                w.writerow([run.run_id, _fmt(d * 1e9), _fmt(f_r), _fmt(sig),
                            _fmt(f_r * cfg.truth.R)])

    with open(out / "theory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d_nm", "pressure_Pa", "gradient_over_R"])
        for d, p in zip(result.theory_d, result.theory_pressure):
            w.writerow([_fmt(d * 1e9), _fmt(p), _fmt(gradient_over_R(p))])

    if cfg.profile == "spring_constant":
        with open(out / "spring.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run_id", "k_over_R", "k_over_R_err", "gamma", "gamma_err",
                        "chi2_reduced", "n_used", "bending_term_rel"])
            for run in result.good_runs:
                if run.spring is None:
                    continue
                s = run.spring
                w.writerow([run.run_id, _fmt(s.k_over_R), _fmt(s.k_over_R_err),
                            _fmt(s.gamma), _fmt(s.gamma_err), _fmt(s.chi2_reduced),
                            s.n_used, _fmt(s.bending_term_rel)])

    if cfg.profile == "high_vac_comparison":
        rows = comparison_profile(result)
        if rows is not None:
            d, measured, predicted, ratio = rows
            with open(out / "difference.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["d_nm", "measured_diff", "predicted_diff", "ratio"])
                for i in range(d.size):
                    w.writerow([_fmt(d[i] * 1e9), _fmt(measured[i]),
                                _fmt(predicted[i]), _fmt(ratio[i])])

    result.summary = build_summary(result)
    (out / "summary.txt").write_text(result.summary)


# ---------------------------------------------------------------------------
# aggregate statistics


def calibration_series(result: CampaignResult):
    runs = result.good_runs
    d0 = np.array([r.fit.d0 for r in runs])
    kappa = np.array([r.fit.kappa for r in runs])
    return d0, kappa


def stability_statistics(result: CampaignResult):
    """Detrended d0 and kappa residual statistics across runs."""
    d0, kappa = calibration_series(result)
    n = d0.size
    if n < 5:
        return None
    win_d0 = min(101, n if n % 2 == 1 else n - 1)
    win_k = min(201, n if n % 2 == 1 else n - 1)
    d0_trend = smooth_trend(d0, win_d0) if n >= 7 else np.full(n, d0.mean())
    k_trend = smooth_trend(kappa, win_k) if n >= 7 else np.full(n, kappa.mean())
    if n >= 30:
        d0_stats = residual_stats(d0, d0_trend)
        k_stats = residual_stats(kappa / k_trend - 1.0)
    else:
        resid = d0 - d0_trend
        from types import SimpleNamespace

        d0_stats = SimpleNamespace(mean=float(resid.mean()), std=float(resid.std(ddof=1)),
                                   gauss_sigma=float(resid.std(ddof=1)), gauss_mean=0.0)
        rel = kappa / k_trend - 1.0
        k_stats = SimpleNamespace(mean=float(rel.mean()), std=float(rel.std(ddof=1)),
                                  gauss_sigma=float(rel.std(ddof=1)), gauss_mean=0.0)
    return d0_stats, k_stats


def gradient_at(result: CampaignResult, d_ref: float = 95e-9):
    """Per-run total gradient at the set point nearest d_ref (nominal positions)."""
    vals = []
    for run in result.good_runs:
        i = int(np.argmin(np.abs(run.total.d - d_ref)))
        if abs(run.total.d[i] - d_ref) < 0.15 * d_ref:
            vals.append(run.total.grad_over_R[i])
    return np.asarray(vals)


def local_slope(result: CampaignResult, d_ref: float = 95e-9) -> float:
    """|d(gradient)/dd| of the mean extracted curve near d_ref, N/m^2 per m."""
    runs = result.good_runs
    if not runs:
        return 0.0
    run = runs[0]
    i = int(np.argmin(np.abs(run.total.d - d_ref)))
    lo, hi = max(i - 1, 0), min(i + 1, run.total.d.size - 1)
    if lo == hi:
        return 0.0
    mean_lo = np.mean([r.total.grad_over_R[lo] for r in runs])
    mean_hi = np.mean([r.total.grad_over_R[hi] for r in runs])
    return abs((mean_hi - mean_lo) / (run.total.d[hi] - run.total.d[lo]))


def noise_budget(result: CampaignResult, d_ref: float = 95e-9):
    """Observed vs decomposed gradient scatter at d_ref.

    Returns (observed_std, signal_part, position_part, combined) in N/m^2.
    The signal part is the channel-noise propagation; the position part is the
    local slope times the run-to-run d0 scatter.
    """
    vals = gradient_at(result, d_ref)
    if vals.size < 5:
        return None
    cfg = result.config
    observed = float(vals.std(ddof=1))
    fit = result.good_runs[0].fit
    signal_part = EPS0 * math.pi / fit.kappa * cfg.channel_noise_rms() / cfg.delta_d
    stats = stability_statistics(result)
    d0_sigma = stats[0].std if stats else 0.0
    position_part = local_slope(result, d_ref) * d0_sigma
    combined = math.hypot(signal_part, position_part)
    return observed, signal_part, position_part, combined


def comparison_profile(result: CampaignResult):
    """Difference-check profile for the high/low drive comparison campaign."""
    runs = result.good_runs
    lows = [r for r in runs if r.setpoint == result.config.s2_setpoint]
    highs = [r for r in runs if r.setpoint == result.config.s2_setpoint_high]
    if not lows or not highs:
        return None
    low, high = lows[0], highs[0]
    return gradient_difference_check(high.total, low.total, high.elec, low.elec)


def build_summary(result: CampaignResult) -> str:
    cfg = result.config
    truth = cfg.truth
    lines = []
    lines.append(f"campaign profile={cfg.profile} mode={cfg.mode} pair={cfg.material_pair} "
                 f"runs={cfg.n_runs} setpoints={cfg.n_setpoints} seed={cfg.seed}")
    ok = result.good_runs
    lines.append(f"completed runs: {len(ok)}/{len(result.runs)}")
    for run in result.runs:
        if run.error:
            lines.append(f"  run {run.run_id}: {run.error}")
    if not ok:
        return "\n".join(lines) + "\n"

    d0_fit0 = ok[0].fit
    kappas = np.array([r.fit.kappa for r in ok])
    kappa_mean = float(kappas.mean())
    lines.append("")
    lines.append(f"{'quantity':<14}{'truth':>14}{'estimate':>14}{'stat_err':>12}{'pull':>8}")

    def row(name, truth_v, est, err):
        pull = (est - truth_v) / err if err > 0 else 0.0
        lines.append(f"{name:<14}{truth_v:>14.6g}{est:>14.6g}{err:>12.3g}{pull:>8.2f}")

    row("d0_nm", truth.d0 * 1e9, d0_fit0.d0 * 1e9, d0_fit0.d0_err * 1e9)
    row("kappa_nm_V", truth.kappa * 1e9, kappa_mean * 1e9,
        float(kappas.std(ddof=1) * 1e9 / math.sqrt(len(ok))) if len(ok) > 1
        else d0_fit0.kappa_err * 1e9)

    springs = [r.spring for r in ok if r.spring is not None]
    if springs:
        s = springs[0]
        row("k_over_R", truth.k_over_R, s.k_over_R, s.k_over_R_err)
        row("gamma_V_m", truth.gamma, s.gamma, s.gamma_err)
        lines.append(f"spring fit: chi2_red={s.chi2_reduced:.3f} n={s.n_used} "
                     f"neglected bending term <= {100 * s.bending_term_rel:.2f}%")

    stats = stability_statistics(result)
    if stats:
        d0_stats, k_stats = stats
        lines.append("")
        lines.append(f"d0 residual sigma: {d0_stats.std * 1e9:.3f} nm "
                     f"(gauss fit {d0_stats.gauss_sigma * 1e9:.3f} nm)")
        lines.append(f"kappa residual sigma: {100 * k_stats.std:.3f}% "
                     f"(gauss fit {100 * k_stats.gauss_sigma:.3f}%)")

    budget = noise_budget(result)
    if budget:
        observed, sig_part, pos_part, combined = budget
        lines.append(f"gradient scatter at 95 nm: observed {observed:.3g} N/m^2; "
                     f"decomposed {sig_part:.3g} (signal) + {pos_part:.3g} (position) "
                     f"= {combined:.3g} combined")
        vals = gradient_at(result)
        if vals.size:
            lines.append(f"mean total gradient at 95 nm: {vals.mean():.4g} N/m^2 "
                         f"(theory |2 pi P| = "
                         f"{abs(gradient_over_R(np.interp(95e-9, result.theory_d, result.theory_pressure))):.4g})")

    rows = comparison_profile(result) if cfg.profile == "high_vac_comparison" else None
    if rows is not None:
        d, _, _, ratio = rows
        sel = np.isfinite(ratio) & (d < 400e-9)
        if np.any(sel):
            lines.append(f"difference-check ratio: {np.nanmean(ratio[sel]):.4f} "
                         f"+- {np.nanstd(ratio[sel]):.4f} (d < 400 nm)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# theory tables


def emit_theory_tables(pair_or_models, d_grid_m, temperature_K: float = 300.0,
                       out_path=None, zero_mode="auto"):
    """Pressure and gradient-over-R table for a material pair.

    ``pair_or_models`` is a pair name ("au_au", "au_ito", "vacuum") or a tuple
    of DielectricModel.  Returns (d, pressure, gradient_over_R) and optionally
    writes the CSV.
    """
    if isinstance(pair_or_models, str):
        cfg = CampaignConfig(material_pair=pair_or_models)
        eps_a, eps_b = resolve_material_pair(cfg)
        vacuum = pair_or_models.lower() == "vacuum"
    else:
        eps_a, eps_b = pair_or_models
        vacuum = isinstance(eps_a, VacuumModel) and isinstance(eps_b, VacuumModel)
    d = np.asarray(d_grid_m, dtype=float)
    if vacuum:
        p = np.zeros_like(d)
    else:
        p = pressure_curve(d, temperature_K, eps_a, eps_b,
                           zero_mode_a=zero_mode, zero_mode_b=zero_mode)
    grad = 2.0 * math.pi * p
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d_nm", "pressure_Pa", "gradient_over_R"])
            for i in range(d.size):
                w.writerow([_fmt(d[i] * 1e9), _fmt(p[i]), _fmt(grad[i])])
    return d, p, grad
