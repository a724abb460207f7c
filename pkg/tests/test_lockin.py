import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from casimir_rig.errors import DomainError, LoopSignError, SettlingError
from casimir_rig.lockin import (
    FeedbackState,
    LockinConfig,
    demod_noise_rms,
    demodulate,
    noise_bandwidth,
    rc_cascade_filter,
    rc_cascade_gain,
    rc_cascade_step_response,
    v0_feedback_step,
    v0_loop_gain_bound,
    vac_setpoint_step,
)

FS = 20000.0
W1 = 2.0 * math.pi * 72.2
W2 = 2.0 * math.pi * 119.0


def tone(amp, omega, duration, phase=0.0, fs=FS):
    t = np.arange(int(duration * fs)) / fs
    return amp * np.cos(omega * t + phase)


class TestDemodulate:
    def test_amplitude_convention(self):
        cfg = LockinConfig(reference_omega=2 * W1, rc_time=0.1, poles=4)
        i_val, q_val = demodulate(tone(0.003, 2 * W1, 3.0), cfg, FS)
        assert i_val == pytest.approx(0.003, rel=1e-4)
        assert abs(q_val) < 3e-7

    def test_sine_lands_in_quadrature(self):
        cfg = LockinConfig(reference_omega=W2, rc_time=0.1, poles=4)
        t = np.arange(int(3.0 * FS)) / FS
        i_val, q_val = demodulate(0.002 * np.sin(W2 * t), cfg, FS)
        assert q_val == pytest.approx(0.002, rel=1e-4)
        assert abs(i_val) < 2e-7

    def test_phase_misalignment_rotates_iq(self):
        # the phase knob rotates the I/Q frame: a cos input read with a
        # reference advanced by phi lands at (A cos phi, A sin phi)
        phi = 0.3
        cfg = LockinConfig(reference_omega=W2, phase=phi, rc_time=0.05, poles=4)
        i_val, q_val = demodulate(tone(0.005, W2, 2.0), cfg, FS)
        assert i_val == pytest.approx(0.005 * math.cos(phi), rel=1e-3)
        assert q_val == pytest.approx(0.005 * math.sin(phi), rel=1e-3)

    def test_off_frequency_rejection(self):
        # omega2 input read at 2*omega1: beat at 25.4 Hz, crushed by the filter
        cfg = LockinConfig(reference_omega=2 * W1, rc_time=1.0, poles=4)
        i_val, q_val = demodulate(tone(1.0, W2, 10.0), cfg, FS)
        assert math.hypot(i_val, q_val) < 1e-3

    def test_settling_guard(self):
        cfg = LockinConfig(reference_omega=W1, rc_time=1.0, poles=4)
        with pytest.raises(SettlingError):
            demodulate(tone(1.0, W1, 2.0), cfg, FS)

    def test_state_carry_allows_short_blocks(self):
        cfg = LockinConfig(reference_omega=W1, rc_time=0.2, poles=4)
        sig = tone(0.01, W1, 2.0)
        (_, _), state = demodulate(sig, cfg, FS, return_state=True)
        (i_val, _) = demodulate(tone(0.01, W1, 0.2, phase=W1 * 2.0), cfg, FS,
                                state=state, t_start=2.0)
        assert i_val == pytest.approx(0.01, rel=2e-3)

    @given(a1=st.floats(-0.01, 0.01), a2=st.floats(-0.01, 0.01))
    def test_linearity(self, a1, a2):
        cfg = LockinConfig(reference_omega=W1, rc_time=0.05, poles=2)
        s1 = tone(a1, W1, 1.0)
        s2 = tone(a2, W1, 1.0, phase=0.7)
        i_sum, q_sum = demodulate(s1 + s2, cfg, FS)
        i1, q1 = demodulate(s1, cfg, FS)
        i2, q2 = demodulate(s2, cfg, FS)
        assert i_sum == pytest.approx(i1 + i2, abs=1e-12)
        assert q_sum == pytest.approx(q1 + q2, abs=1e-12)

    def test_noise_reference_level(self):
        """White noise at the rig's density settles to 30 uV rms at RC = 1 s."""
        rng = np.random.default_rng(11)
        density = 7.59e-5
        n = int(500.0 * FS)
        noise = rng.normal(0.0, density * math.sqrt(FS / 2.0), n)
        t = np.arange(n) / FS
        mixed = 2.0 * noise * np.cos(2 * W1 * t)
        filtered, _ = rc_cascade_filter(mixed, 1.0, 4, FS)
        # sample the settled output at 8 s spacing: effectively independent draws
        picks = filtered[int(12 * FS)::int(8 * FS)]
        assert picks.std(ddof=1) == pytest.approx(30e-6, rel=0.20)
        assert demod_noise_rms(density, 1.0, 4) == pytest.approx(30e-6, rel=0.01)


class TestFilter:
    def test_asymptotic_slope_24db_per_octave(self):
        f = 50.0
        ratio = rc_cascade_gain(2 * math.pi * 2 * f, 1.0, 4) / rc_cascade_gain(
            2 * math.pi * f, 1.0, 4)
        assert 20.0 * math.log10(ratio) == pytest.approx(-24.0, abs=0.1)

    def test_step_response_matches_analytic(self):
        rc, poles = 0.2, 4
        n = int(6.0 * FS)
        step = np.ones(n)
        out, _ = rc_cascade_filter(step, rc, poles, FS)
        t = (np.arange(n) + 1) / FS
        expect = rc_cascade_step_response(t, rc, poles)
        assert np.max(np.abs(out - expect)) < 1e-3

    def test_settling_milestones(self):
        # the four-pole cascade reaches 91.8% at 7 RC and 99% at ~10.05 RC
        assert rc_cascade_step_response(7.0, 1.0, 4) == pytest.approx(0.9182, abs=1e-3)
        assert rc_cascade_step_response(10.05, 1.0, 4) == pytest.approx(0.99, abs=1e-3)

    def test_noise_bandwidth_values(self):
        assert noise_bandwidth(1.0, 1) == pytest.approx(0.25, rel=1e-9)
        assert noise_bandwidth(1.0, 4) == pytest.approx(5.0 / 64.0, rel=1e-9)


class TestV0Loop:
    def lockin_cfg(self, rc=0.2):
        return LockinConfig(reference_omega=W1, rc_time=rc, poles=4)

    def loop_until(self, v0, gain, n_steps=200, noise=0.0, rng=None, dt=0.4):
        """Iterate the integrator against the static loop model S = -2 a V (V0+V_DC)."""
        alpha, v_ac = 1.0, 0.09
        fb = FeedbackState(V_AC=v_ac, integrator_gain=gain)
        history = []
        for _ in range(n_steps):
            s_w1 = -2.0 * alpha * v_ac * (v0 + fb.V_DC)
            if rng is not None and noise > 0:
                s_w1 += rng.normal(0.0, noise)
            fb = v0_feedback_step(s_w1, fb, dt)
            history.append(fb.V_DC)
        return np.array(history)

    def test_noiseless_convergence_below_50uV(self):
        slope = 2.0 * 1.0 * 0.09
        gain = 0.25 * v0_loop_gain_bound(self.lockin_cfg(), slope)
        hist = self.loop_until(-0.106, gain)
        assert abs(hist[-1] - 0.106) < 50e-6

    def test_monotone_below_bound(self):
        slope = 2.0 * 1.0 * 0.09
        gain = 0.2 * v0_loop_gain_bound(self.lockin_cfg(), slope)
        hist = self.loop_until(-0.106, gain, n_steps=60)
        err = np.abs(hist - 0.106)
        assert np.all(np.diff(err) <= 1e-15)

    def test_zero_v0_stays_zero(self):
        hist = self.loop_until(0.0, 1.0)
        assert np.allclose(hist, 0.0)

    def test_wrong_sign_diverges(self):
        fb = FeedbackState(V_AC=0.09, integrator_gain=5.0, loop_sign=+1.0)
        with pytest.raises(LoopSignError):
            for _ in range(4000):
                s_w1 = -2.0 * 0.09 * (-0.106 + fb.V_DC)
                fb = v0_feedback_step(s_w1, fb, 1.0)

    def test_noise_scatter_about_1mV(self, rng):
        """With set-point-level wander of V0 the recorded V_DC scatters ~ 1 mV."""
        slope = 2.0 * 1.0 * 0.09
        gain = 0.25 * v0_loop_gain_bound(self.lockin_cfg(), slope)
        readings = []
        for _ in range(120):
            v0 = -0.106 + rng.normal(0.0, 1e-3)
            hist = self.loop_until(v0, gain, n_steps=30, noise=30e-6, rng=rng)
            readings.append(hist[-1])
        scatter = np.std(readings)
        assert 0.4e-3 < scatter < 2.5e-3


class TestVacSetpoint:
    def test_reference_point(self):
        # alpha = 191.3 nm/V / 200 nm, 4 mV setpoint -> 91.5 mV
        fb = FeedbackState(V_AC=0.5, S2w1_setpoint=0.004)
        fb = vac_setpoint_step(fb, 191.3e-9 / 200e-9)
        assert fb.V_AC == pytest.approx(0.09146, rel=1e-3)

    def test_approach_scaling(self):
        fb = FeedbackState(V_AC=0.5, S2w1_setpoint=0.004)
        v_far = vac_setpoint_step(fb, 0.5).V_AC
        v_near = vac_setpoint_step(fb, 1.0).V_AC
        assert v_far / v_near == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_clamping(self):
        fb = FeedbackState(V_AC=0.5, S2w1_setpoint=0.004, v_ac_max=0.2)
        assert vac_setpoint_step(fb, 1e-6).V_AC == 0.2

    def test_force_scale_of_setpoints(self):
        """4 mV drive ~ 50 pN rms calibration force; 194 mV ~ 2 nN (spring runs)."""
        from casimir_rig.rig import TruthParams

        t = TruthParams()
        for setpoint, target, tol in ((0.004, 50e-12, 0.45), (0.194, 2e-9, 0.25)):
            f_rms = setpoint * t.k / (t.gamma * math.sqrt(2.0))
            assert f_rms == pytest.approx(target, rel=tol)

    def test_alpha_must_be_positive(self):
        with pytest.raises(DomainError):
            vac_setpoint_step(FeedbackState(V_AC=0.1), 0.0)
