"""Virtual sphere-plate experiment: exact instantaneous forces to detector volts.

The rig computes the un-expanded signal: at every sample the gap carries the
full piezo modulation (and, unless frozen, the cantilever deflection), the
applied voltage carries the full AC drive, and the three forces are evaluated
at the instantaneous state.  The small-signal spectral components that the
analysis assumes are therefore predictions to be tested, not identities.

Two evaluation paths share the same force model:

* :func:`synthesize` renders a time-domain sample stream for the software
  lock-in chain (signal mode);
* :func:`settled_outputs` projects the exact quasi-periodic signal onto the
  measurement bins on a two-phase grid (fast-sample mode), equivalent to fully
  settled lock-ins without rendering samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.signal import cont2discrete, lfilter, lfilter_zi

from .constants import EPS0
from .errors import ContactError, DomainError
from .forces import GasProperties
from .lifshitz import pressure_curve

__all__ = [
    "TruthParams",
    "DriveState",
    "CantileverDynamics",
    "ForceCurve",
    "casimir_truth_curve",
    "SettledOutputs",
    "synthesize",
    "settled_outputs",
    "write_raw_dump",
    "read_raw_dump",
]


@dataclass(frozen=True)
class TruthParams:
    """Hidden ground truth of the virtual experiment.

    kappa is not free: it is gamma eps0 pi / (k/R) by construction and exposed
    as a property.  ``pfa_gap_bias`` strengthens the electrostatic force the
    way the exact sphere capacitance does, biasing the fitted d0 low by about
    the same amount.  ``background_gradient`` adds the plate-reflection
    artifact as a distance-independent offset in the extracted force gradient.
    """

    d0: float = 1.2e-6              # m, gap at d_pz = 0
    V0: float = -0.106              # V
    k_over_R: float = 11.12e3       # N/m^2
    gamma: float = 7.6482e7         # V/m
    R: float = 100e-6               # m
    detector_noise: float = 7.59e-5  # V/sqrt(Hz), white
    d0_drift: float = 0.0           # m per run
    v0_drift: float = 0.0           # V per run
    v0_jitter: float = 0.0          # V rms, set-point to set-point wander of V0
    pfa_gap_bias: float = 0.0       # m
    background_gradient: float = 0.0  # N/m^2, |.| < 2 realistic

    def __post_init__(self):
        if min(self.d0, self.k_over_R, self.gamma, self.R) <= 0:
            raise DomainError("d0, k/R, gamma and R must be > 0")
        if self.detector_noise < 0 or self.v0_jitter < 0:
            raise DomainError("noise levels must be >= 0")

    @property
    def k(self) -> float:
        return self.k_over_R * self.R

    @property
    def kappa(self) -> float:
        """Force sensitivity gamma eps0 pi R / k = gamma eps0 pi / (k/R), m/V."""
        return self.gamma * EPS0 * math.pi / self.k_over_R


@dataclass(frozen=True)
class DriveState:
    """Per-set-point drive: piezo extension, distance modulation, voltages."""

    d_pz: float = 0.0                     # m
    Delta_d: float = 3.85e-9              # m
    omega1: float = 2.0 * math.pi * 72.2  # rad/s
    omega2: float = 2.0 * math.pi * 119.0  # rad/s
    V_DC: float = 0.0
    V_AC: float = 0.0

    def __post_init__(self):
        if self.Delta_d < 0:
            raise DomainError("modulation amplitude must be >= 0")
        if self.omega1 == self.omega2 or 2.0 * self.omega1 == self.omega2:
            raise DomainError("omega1, 2*omega1 and omega2 must be spectrally distinct")


@dataclass(frozen=True)
class CantileverDynamics:
    mode: str = "quasi_static"      # or "harmonic_oscillator"
    f0: float = 1900.0              # Hz
    Q: float = 75.0

    def __post_init__(self):
        if self.mode not in ("quasi_static", "harmonic_oscillator"):
            raise DomainError(f"unknown cantilever mode {self.mode!r}")
        if self.f0 <= 0 or self.Q <= 0:
            raise DomainError("f0 and Q must be > 0")

    def quasi_static_valid(self, drive: DriveState) -> bool:
        """Resonance at least 10x above the drive frequencies."""
        f_drive = max(drive.omega1, drive.omega2) / (2.0 * math.pi)
        return self.f0 > 10.0 * f_drive

    def response(self, omega: float) -> complex:
        """Driven-oscillator transfer x k / F at angular frequency omega."""
        w0 = 2.0 * math.pi * self.f0
        return w0**2 / (w0**2 - omega**2 + 1j * omega * w0 / self.Q)


# ---------------------------------------------------------------------------
# Casimir truth curve


class ForceCurve:
    """Attractive sphere-plate force per radius, interpolable over a gap grid.

    force_over_R(d) = 2 pi * integral_d^inf P(s) ds  (N/m, <= 0)
    gradient_over_R(d) = 2 pi P(d)                   (N/m^2, <= 0)
    """

    def __init__(self, d_grid_m: np.ndarray, force_over_R: np.ndarray,
                 gradient_over_R: np.ndarray):
        d = np.asarray(d_grid_m, dtype=float)
        if d.size < 4 or np.any(np.diff(d) <= 0):
            raise DomainError("force curve needs an ascending gap grid (>= 4 points)")
        self.d_grid = d
        self._force = PchipInterpolator(d, np.asarray(force_over_R, dtype=float),
                                        extrapolate=False)
        self._gradient = PchipInterpolator(d, np.asarray(gradient_over_R, dtype=float),
                                           extrapolate=False)

    @classmethod
    def from_pressure(cls, d_grid_m, pressure_pa) -> "ForceCurve":
        """Integrate a parallel-plate pressure curve into a PFA force curve.

        Each grid segment is integrated as a local power law (exact for the
        near-power-law pressure curves this sees); the tail beyond the grid is
        closed with the final log-log slope.
        """
        d = np.asarray(d_grid_m, dtype=float)
        p = np.asarray(pressure_pa, dtype=float)
        if np.any(p > 0):
            raise DomainError("pressure curve must be attractive (<= 0)")
        mag = -p
        if np.any(mag == 0):
            raise DomainError("pressure curve must be nonzero for integration")
        ratio = d[1:] / d[:-1]
        m = np.log(mag[1:] / mag[:-1]) / np.log(ratio)
        mp1 = m + 1.0
        # segment integral of c*s^m over [d_i, d_{i+1}], log form at m = -1
        seg = np.where(
            np.abs(mp1) > 1e-9,
            mag[:-1] * d[:-1] * (ratio**mp1 - 1.0) / mp1,
            mag[:-1] * d[:-1] * np.log(ratio),
        )
        slope_end = min(m[-1], -1.5)
        tail = mag[-1] * d[-1] / (-slope_end - 1.0)
        energy_mag = np.empty_like(mag)
        energy_mag[-1] = tail
        energy_mag[:-1] = tail + seg.sum() - np.concatenate([[0.0], np.cumsum(seg[:-1])])
        return cls(d, -2.0 * math.pi * energy_mag, 2.0 * math.pi * p)

    @classmethod
    def zero(cls) -> "ForceCurve":
        curve = cls.__new__(cls)
        curve.d_grid = np.array([0.0, math.inf])
        curve._force = None
        curve._gradient = None
        return curve

    def force_over_R(self, d_m):
        if self._force is None:
            out = np.zeros_like(np.asarray(d_m, dtype=float))
            return float(out) if out.ndim == 0 else out
        out = self._force(d_m)
        if np.any(np.isnan(out)):
            raise DomainError("gap outside the tabulated force-curve range")
        return out

    def gradient_over_R(self, d_m):
        if self._gradient is None:
            out = np.zeros_like(np.asarray(d_m, dtype=float))
            return float(out) if out.ndim == 0 else out
        out = self._gradient(d_m)
        if np.any(np.isnan(out)):
            raise DomainError("gap outside the tabulated force-curve range")
        return out


def casimir_truth_curve(eps_a, eps_b, d_grid_m=None, temperature_K: float = 300.0,
                        **pressure_kwargs) -> ForceCurve:
    """Lifshitz pressure for the material pair, integrated into a rig force curve."""
    if d_grid_m is None:
        d_grid_m = np.geomspace(20e-9, 2000e-9, 60)
    p = pressure_curve(d_grid_m, temperature_K, eps_a, eps_b, **pressure_kwargs)
    return ForceCurve.from_pressure(d_grid_m, p)


# ---------------------------------------------------------------------------
# shared force evaluation


def _slip_factor(gap: np.ndarray, b: float) -> np.ndarray:
    if b == 0.0:
        return np.ones_like(gap)
    x = gap / (6.0 * b)
    return 2.0 * x * ((1.0 + x) * np.log1p(1.0 / x) - 1.0)


def _total_force(truth: TruthParams, gap, voltage, gap_velocity,
                 curve: ForceCurve, gas: GasProperties | None) -> np.ndarray:
    if np.min(gap) <= 0:
        raise ContactError("gap reached zero during synthesis")
    eff_gap = gap - truth.pfa_gap_bias
    if np.min(eff_gap) <= 0:
        raise ContactError("effective electrostatic gap reached zero")
    force = -EPS0 * math.pi * truth.R * voltage**2 / eff_gap
    force = force + truth.R * curve.force_over_R(gap)
    if gas is not None:
        force = force - (6.0 * math.pi * gas.viscosity_eta * truth.R**2
                         * _slip_factor(gap, gas.slip_length_b) * gap_velocity / gap)
    return force


# ---------------------------------------------------------------------------
# signal mode


def synthesize(truth: TruthParams, drive: DriveState, dyn: CantileverDynamics,
               duration: float, sample_rate: float = 20000.0, seed=None,
               casimir_curve: ForceCurve | None = None,
               gas: GasProperties | None = None,
               freeze_deflection: bool = False,
               t_start: float = 0.0) -> np.ndarray:
    """Photodetector samples S(t) in volts; bitwise deterministic for a given seed.

    ``t_start`` continues the drive phases across consecutive records so a
    multi-set-point acquisition behaves like one continuous run.
    """
    n = int(round(duration * sample_rate))
    if n < 2:
        raise DomainError("duration too short")
    curve = casimir_curve if casimir_curve is not None else ForceCurve.zero()
    t = t_start + np.arange(n) / sample_rate
    voltage = drive.V_DC + truth.V0 + drive.V_AC * np.cos(drive.omega1 * t)
    base_gap = truth.d0 - drive.d_pz - drive.Delta_d * np.cos(drive.omega2 * t)
    gap_velocity = drive.omega2 * drive.Delta_d * np.sin(drive.omega2 * t)

    k = truth.k
    if dyn.mode == "harmonic_oscillator":
        w0 = 2.0 * math.pi * dyn.f0
        num = [w0**2 / k]
        den = [1.0, w0 / dyn.Q, w0**2]
        (b_z, a_z, _) = cont2discrete((num, den), 1.0 / sample_rate, method="zoh")
        b_z = np.ravel(b_z)

        def respond(force):
            zi = lfilter_zi(b_z, a_z) * force[0]
            x, _ = lfilter(b_z, a_z, force, zi=zi)
            return x
    else:
        def respond(force):
            return force / k

    x = np.zeros(n)
    for _ in range(4):
        gap = base_gap if freeze_deflection else base_gap + x
        force = _total_force(truth, gap, voltage, gap_velocity, curve, gas)
        x = respond(force)

    signal = truth.gamma * x
    if truth.background_gradient != 0.0:
        amp = truth.background_gradient * drive.Delta_d * truth.kappa / (EPS0 * math.pi)
        signal = signal - amp * np.cos(drive.omega2 * t)
    if truth.detector_noise > 0.0:
        rng = np.random.default_rng(seed)
        signal = signal + rng.normal(0.0, truth.detector_noise * math.sqrt(sample_rate / 2.0), n)
    return signal


# ---------------------------------------------------------------------------
# fast-sample mode


@dataclass(frozen=True)
class SettledOutputs:
    """Fully settled lock-in readings (amplitude convention), noiseless."""

    S0: float
    S_w1: float
    S_2w1: float
    S_4w1: float
    S_w2_I: float
    S_w2_Q: float


def settled_outputs(truth: TruthParams, drive: DriveState, dyn: CantileverDynamics,
                    casimir_curve: ForceCurve | None = None,
                    gas: GasProperties | None = None,
                    freeze_deflection: bool = False,
                    n_phase1: int = 64, n_phase2: int = 32) -> SettledOutputs:
    """Exact measurement-bin amplitudes of the synthesized signal.

    Projects the instantaneous-force signal onto the drive harmonics over a
    (theta1, theta2) phase grid; because omega1 and omega2 share no low-order
    resonance this equals the settled lock-in outputs of signal mode.
    """
    curve = casimir_curve if casimir_curve is not None else ForceCurve.zero()
    th1 = 2.0 * math.pi * np.arange(n_phase1) / n_phase1
    th2 = 2.0 * math.pi * np.arange(n_phase2) / n_phase2
    voltage = (drive.V_DC + truth.V0 + drive.V_AC * np.cos(th1))[None, :]
    base_gap = (truth.d0 - drive.d_pz - drive.Delta_d * np.cos(th2))[:, None]
    gap_velocity = (drive.omega2 * drive.Delta_d * np.sin(th2))[:, None]

    k = truth.k
    x = np.zeros((n_phase2, n_phase1))
    for _ in range(4):
        gap = base_gap if freeze_deflection else base_gap + x
        force = _total_force(truth, gap, voltage, gap_velocity, curve, gas)
        x = force / k

    s = truth.gamma * x
    cos1, cos2t1, cos4t1 = np.cos(th1), np.cos(2 * th1), np.cos(4 * th1)
    s0 = float(s.mean())
    s_w1 = 2.0 * float((s * cos1[None, :]).mean())
    s_2w1 = 2.0 * float((s * cos2t1[None, :]).mean())
    s_4w1 = 2.0 * float((s * cos4t1[None, :]).mean())
    s_w2_i = 2.0 * float((s * np.cos(th2)[:, None]).mean())
    s_w2_q = 2.0 * float((s * np.sin(th2)[:, None]).mean())

    if truth.background_gradient != 0.0:
        s_w2_i -= truth.background_gradient * drive.Delta_d * truth.kappa / (EPS0 * math.pi)

    if dyn.mode == "harmonic_oscillator":
        s_w1 *= dyn.response(drive.omega1).real
        s_2w1 *= dyn.response(2.0 * drive.omega1).real
        s_4w1 *= dyn.response(4.0 * drive.omega1).real
        h2 = dyn.response(drive.omega2)
        s_w2_i, s_w2_q = (
            h2.real * s_w2_i + h2.imag * s_w2_q,
            -h2.imag * s_w2_i + h2.real * s_w2_q,
        )
    return SettledOutputs(S0=s0, S_w1=s_w1, S_2w1=s_2w1, S_4w1=s_4w1,
                          S_w2_I=s_w2_i, S_w2_Q=s_w2_q)


# ---------------------------------------------------------------------------
# raw sample dumps

_HEADER_LEN = 64


def write_raw_dump(path, samples: np.ndarray, sample_rate: float, seed, duration: float):
    """Binary dump: 64-byte text header, then little-endian float64 samples."""
    header = f"CRIG1 rate={sample_rate:g} seed={seed} dur={duration:g}"
    encoded = header.encode("ascii")
    if len(encoded) > _HEADER_LEN:
        raise DomainError("header too long")
    with open(path, "wb") as fh:
        fh.write(encoded.ljust(_HEADER_LEN, b" "))
        fh.write(np.asarray(samples, dtype="<f8").tobytes())


def read_raw_dump(path):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER_LEN).decode("ascii").strip()
        if not header.startswith("CRIG1"):
            raise DomainError("not a raw rig dump")
        meta = dict(item.split("=", 1) for item in header.split()[1:])
        samples = np.frombuffer(fh.read(), dtype="<f8")
    return samples, meta
