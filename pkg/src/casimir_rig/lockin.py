"""Software lock-in demodulation, RC low-pass filtering and the slow feedback loops.

Amplitude convention: an input ``A cos(w t + phase)`` demodulated at reference
``w`` with the same ``phase`` settles to ``I = A``, ``Q = 0``; a sine input of
the same phase lands in Q.  The low-pass is a cascade of identical single-pole
RC stages (poles = 4 and rc = 1 s reproduce a 24 dB/octave, 1 s hardware
setting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter, lfilter_zi

from .errors import DomainError, LoopSignError, SettlingError

__all__ = [
    "LockinConfig",
    "FeedbackState",
    "demodulate",
    "rc_cascade_filter",
    "rc_cascade_step_response",
    "rc_cascade_gain",
    "noise_bandwidth",
    "demod_noise_rms",
    "v0_feedback_step",
    "v0_loop_gain_bound",
    "vac_setpoint_step",
]


@dataclass(frozen=True)
class LockinConfig:
    reference_omega: float          # rad/s
    phase: float = 0.0              # rad
    rc_time: float = 1.0            # s
    poles: int = 4

    def __post_init__(self):
        if self.rc_time <= 0:
            raise DomainError("rc_time must be > 0")
        if self.poles < 1:
            raise DomainError("poles must be >= 1")


@dataclass(frozen=True)
class FeedbackState:
    """Slow-control state: V0-compensation integrator and V_AC setpoint."""

    V_DC: float = 0.0
    integrator_gain: float = 0.05   # 1/(V s): dV_DC/dt per volt of S_w1
    V_AC: float = 0.1
    S2w1_setpoint: float = 0.004    # V, lock-in amplitude units
    loop_sign: float = -1.0         # sign of dS_w1/dV_DC (from the signal model)
    v_ac_min: float = 1e-4
    v_ac_max: float = 10.0

    def __post_init__(self):
        if self.V_AC < 0:
            raise DomainError("V_AC must be >= 0")
        if self.integrator_gain <= 0:
            raise DomainError("integrator gain must be > 0")


def rc_cascade_filter(x: np.ndarray, rc_time: float, poles: int, sample_rate: float,
                      state: np.ndarray | None = None, steady_init: bool = False):
    """Run the n-pole RC cascade over samples; returns (output, final_state).

    ``state`` carries the per-pole IIR memory between calls.  With
    ``steady_init`` the cascade starts settled at the record mean, which
    suppresses the cold-start transient without touching the tracking
    behaviour (AC content averages out of the initialization).
    """
    a = math.exp(-1.0 / (rc_time * sample_rate))
    b_coef = np.array([1.0 - a])
    a_coef = np.array([1.0, -a])
    y = np.asarray(x, dtype=float)
    init_level = float(y.mean()) if steady_init and state is None else 0.0
    new_state = np.empty((poles, 1))
    for p in range(poles):
        if state is not None:
            zi = state[p]
        else:
            zi = lfilter_zi(b_coef, a_coef) * init_level
        y, zf = lfilter(b_coef, a_coef, y, zi=zi)
        new_state[p] = zf
    return y, new_state


def rc_cascade_gain(omega: float, rc_time: float, poles: int) -> float:
    """Amplitude response |H| of the cascade at angular frequency omega."""
    return (1.0 + (omega * rc_time) ** 2) ** (-poles / 2.0)


def rc_cascade_step_response(t: float | np.ndarray, rc_time: float, poles: int):
    """Analytic unit-step response: 1 - e^(-t/rc) sum_{k<poles} (t/rc)^k / k!."""
    u = np.asarray(t, dtype=float) / rc_time
    acc = np.zeros_like(u)
    term = np.ones_like(u)
    for k in range(poles):
        if k > 0:
            term = term * u / k
        acc = acc + term
    out = 1.0 - np.exp(-u) * acc
    return float(out) if out.ndim == 0 else out


def noise_bandwidth(rc_time: float, poles: int) -> float:
    """Equivalent noise bandwidth (Hz) of the cascade: int |H|^2 df."""
    # int_0^inf (1+x^2)^-n dx = pi/2 * (2n-3)!! / (2n-2)!!
    num, den = 1.0, 1.0
    for k in range(3, 2 * poles - 2, 2):
        num *= k
    for k in range(2, 2 * poles - 1, 2):
        den *= k
    return (math.pi / 2.0) * (num / den) / (2.0 * math.pi * rc_time)


def demod_noise_rms(noise_density: float, rc_time: float, poles: int, dc: bool = False) -> float:
    """Settled output noise for white input of the given density (V/sqrt(Hz)).

    The mixer doubles the noise power folded into the I (or Q) output; the DC
    channel (no mixer) sees the plain filtered density.
    """
    enbw = noise_bandwidth(rc_time, poles)
    factor = 1.0 if dc else 2.0
    return noise_density * math.sqrt(factor * enbw)


def demodulate(samples: np.ndarray, cfg: LockinConfig, sample_rate: float,
               state=None, return_state: bool = False, t_start: float = 0.0):
    """Settled (I, Q) outputs of one lock-in channel over a sample record.

    The record must be long enough for the cascade to settle (>= 2 poles RC);
    pass the previous record's ``state`` to emulate continuous acquisition.
    """
    samples = np.asarray(samples, dtype=float)
    duration = samples.size / sample_rate
    if state is None and duration < 2.0 * cfg.poles * cfg.rc_time:
        raise SettlingError(
            f"cold-start record of {duration:.2f}s cannot settle a {cfg.poles}-pole "
            f"{cfg.rc_time}s filter (need {2.0 * cfg.poles * cfg.rc_time:.2f}s)"
        )
    t = t_start + np.arange(samples.size) / sample_rate
    wt = cfg.reference_omega * t + cfg.phase
    mixed_i = 2.0 * samples * np.cos(wt)
    mixed_q = 2.0 * samples * np.sin(wt)
    if state is None:
        state_i = state_q = None
    else:
        state_i, state_q = state
    yi, zi = rc_cascade_filter(mixed_i, cfg.rc_time, cfg.poles, sample_rate,
                               state=state_i, steady_init=state is None)
    yq, zq = rc_cascade_filter(mixed_q, cfg.rc_time, cfg.poles, sample_rate,
                               state=state_q, steady_init=state is None)
    out = (float(yi[-1]), float(yq[-1]))
    if return_state:
        return out, (zi, zq)
    return out


def dc_output(samples: np.ndarray, cfg_rc: float, poles: int, sample_rate: float,
              state=None, return_state: bool = False):
    """Settled DC channel: the raw signal through the same cascade, no mixer."""
    y, z = rc_cascade_filter(np.asarray(samples, dtype=float), cfg_rc, poles,
                             sample_rate, state=state, steady_init=state is None)
    if return_state:
        return float(y[-1]), z
    return float(y[-1])


def v0_feedback_step(s_w1_i: float, state: FeedbackState, dt: float) -> FeedbackState:
    """One integrator update of the contact-potential compensation voltage.

    Pure-integral control: V_DC <- V_DC - loop_sign * gain * S_w1 * dt, where
    loop_sign is the sign of dS_w1/dV_DC (negative for this rig), making the
    closed loop negative feedback.  Divergence beyond 10 V means a
    mis-configured sign or gain.
    """
    v_dc = state.V_DC - state.loop_sign * state.integrator_gain * s_w1_i * dt
    if abs(v_dc) > 10.0:
        raise LoopSignError(f"V_DC diverged to {v_dc:.2f} V; check loop sign/gain")
    return replace(state, V_DC=v_dc)


def v0_loop_gain_bound(cfg: LockinConfig, s_w1_slope: float) -> float:
    """Largest stable integrator gain for loop slope dS_w1/dV_DC (V per V).

    The cascade contributes a group delay of poles * RC; an integrator crossing
    unity gain beyond pi/2 of accumulated phase rings, so the bound is
    pi / (2 * poles * RC * |slope|).
    """
    delay = cfg.poles * cfg.rc_time
    return math.pi / (2.0 * delay * abs(s_w1_slope))


def vac_setpoint_step(state: FeedbackState, alpha_est: float) -> FeedbackState:
    """Drive-amplitude controller: V_AC = sqrt(2 setpoint / alpha), clamped.

    Holds |S_2w1| near the setpoint as the surfaces approach (alpha grows),
    keeping the calibration force constant.
    """
    if alpha_est <= 0:
        raise DomainError("alpha estimate must be > 0")
    v_ac = math.sqrt(2.0 * state.S2w1_setpoint / alpha_est)
    v_ac = min(max(v_ac, state.v_ac_min), state.v_ac_max)
    return replace(state, V_AC=v_ac)
