import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from casimir_rig.constants import EPS0
from casimir_rig.errors import DomainError, SnapInError
from casimir_rig.forces import (
    GasProperties,
    SpherePlateGeometry,
    electrostatic_force,
    electrostatic_force_with_bending,
    hydrodynamic_force,
    sigma_sphere,
    slip_correction,
)

GEOM_100NM = SpherePlateGeometry(radius_R=100e-6, gap_d=100e-9)
AIR = GasProperties()


class TestElectrostatic:
    def test_reference_value(self):
        # eps0 pi R (0.1 V)^2 / 100 nm
        f = electrostatic_force(GEOM_100NM, 0.1)
        assert f == pytest.approx(-2.7816e-10, rel=1e-3)

    def test_compensated_voltage_gives_zero(self):
        assert electrostatic_force(GEOM_100NM, 0.25, v0=-0.25) == 0.0

    def test_quadratic_law(self):
        f1 = electrostatic_force(GEOM_100NM, 0.1)
        f2 = electrostatic_force(GEOM_100NM, 0.2)
        assert f2 == pytest.approx(4.0 * f1, rel=1e-12)

    @given(v=st.floats(-5.0, 5.0), d=st.floats(2e-7, 2e-6))
    def test_never_repulsive(self, v, d):
        geom = SpherePlateGeometry(gap_d=d)
        assert electrostatic_force(geom, v) <= 0.0

    def test_gap_validation(self):
        with pytest.raises(DomainError):
            SpherePlateGeometry(gap_d=-1e-9)

    def test_pfa_validity_flag(self):
        assert SpherePlateGeometry(radius_R=100e-6, gap_d=100e-9).pfa_valid
        assert not SpherePlateGeometry(radius_R=100e-6, gap_d=10e-6).pfa_valid


class TestBending:
    def test_rigid_limit_matches_simple_form(self):
        f_rigid = electrostatic_force_with_bending(1e-6, 1.0, 1e6, 100e-6)
        f_simple = electrostatic_force(SpherePlateGeometry(gap_d=1e-6), 1.0)
        assert f_rigid == pytest.approx(f_simple, rel=1e-4)

    def test_pull_in_threshold(self):
        k, gap, radius = 1.1, 300e-9, 100e-6
        v_crit = math.sqrt(k * gap**2 / (4.0 * EPS0 * math.pi * radius))
        f = electrostatic_force_with_bending(gap, v_crit, k, radius)
        assert f == pytest.approx(-0.5 * k * gap, rel=1e-9)
        with pytest.raises(SnapInError):
            electrostatic_force_with_bending(gap, 1.0001 * v_crit, k, radius)

    def test_small_voltage_series(self):
        # F = -eps0 pi R V^2/D - eps0^2 pi^2 R^2 V^4 / (k D^3) + O(V^6)
        k, gap, radius = 1.1, 500e-9, 100e-6
        v = 0.05
        a = EPS0 * math.pi * radius
        series = -a * v**2 / gap - a**2 * v**4 / (k * gap**3)
        exact = electrostatic_force_with_bending(gap, v, k, radius)
        v6_scale = a**3 * v**6 / (k**2 * gap**5)
        assert abs(exact - series) < 5.0 * v6_scale

    @given(logk=st.floats(2.0, 6.0), v=st.floats(0.05, 1.0))
    def test_rigid_convergence_property(self, logk, v):
        """Relative gap to the simple form < 1e-3 once k d^2 / (eps0 pi R V^2) > 1e4."""
        k, gap, radius = 10.0**logk, 1e-6, 100e-6
        if k * gap**2 / (EPS0 * math.pi * radius * v**2) <= 1e4:
            return
        f_b = electrostatic_force_with_bending(gap, v, k, radius)
        f_s = electrostatic_force(SpherePlateGeometry(gap_d=gap), v)
        assert abs(f_b / f_s - 1.0) < 1e-3


class TestHydrodynamic:
    def test_reference_value_no_slip(self):
        # 119 Hz plate oscillation with 2.72 nm rms amplitude at 100 nm gap
        v_rms = 2.0 * math.pi * 119.0 * 2.72e-9
        f = hydrodynamic_force(GEOM_100NM, v_rms, AIR)
        assert abs(f) == pytest.approx(7.09e-11, rel=0.01)

    def test_perfect_slip_kills_force(self):
        gas = GasProperties(slip_length_b=1.0)
        f = hydrodynamic_force(GEOM_100NM, 1e-6, gas)
        assert abs(f) < 1e-3 * abs(hydrodynamic_force(GEOM_100NM, 1e-6, AIR))

    def test_dissipative_sign(self):
        assert hydrodynamic_force(GEOM_100NM, +1e-6, AIR) < 0
        assert hydrodynamic_force(GEOM_100NM, -1e-6, AIR) > 0

    def test_no_slip_scaling_is_inverse_gap(self):
        f1 = hydrodynamic_force(SpherePlateGeometry(gap_d=100e-9), 1e-6, AIR)
        f2 = hydrodynamic_force(SpherePlateGeometry(gap_d=200e-9), 1e-6, AIR)
        assert f1 / f2 == pytest.approx(2.0, rel=1e-12)

    def test_slip_slope_limits(self):
        b = 100e-9
        gas = GasProperties(slip_length_b=b)

        def loglog_slope(d):
            f1 = abs(hydrodynamic_force(SpherePlateGeometry(gap_d=d), 1e-6, gas))
            f2 = abs(hydrodynamic_force(SpherePlateGeometry(gap_d=1.05 * d), 1e-6, gas))
            return math.log(f2 / f1) / math.log(1.05)

        assert abs(loglog_slope(50e-9)) < 1.0       # d << b: weaker than 1/d
        assert loglog_slope(20e-6) == pytest.approx(-1.0, abs=0.05)  # d >> b

    @given(v=st.floats(1e-9, 1e-3))
    def test_odd_in_velocity(self, v):
        assert hydrodynamic_force(GEOM_100NM, v, AIR) == pytest.approx(
            -hydrodynamic_force(GEOM_100NM, -v, AIR), rel=1e-12)

    @given(b=st.floats(1e-9, 1e-6))
    def test_monotone_in_slip(self, b):
        f_slip = abs(hydrodynamic_force(GEOM_100NM, 1e-6, GasProperties(slip_length_b=b)))
        f_noslip = abs(hydrodynamic_force(GEOM_100NM, 1e-6, AIR))
        assert f_slip < f_noslip

    def test_slip_factor_limits(self):
        assert slip_correction(100e-9, 0.0) == 1.0
        assert slip_correction(1.0, 1e-9) == pytest.approx(1.0, rel=1e-6)


class TestSigmaSphere:
    def test_paper_conditions(self):
        """4 eta w2 R / (p d) at the closest quoted approach: 1.09e-3, i.e. <= 1e-3
        at the one-significant-figure precision of the published bound."""
        omega2 = 2.0 * math.pi * 119.0
        geom = SpherePlateGeometry(gap_d=50e-9)
        sigma = sigma_sphere(AIR, omega2, geom)
        assert sigma == pytest.approx(1.092e-3, rel=0.01)
        rounded = round(sigma, int(-math.floor(math.log10(sigma))))
        assert rounded <= 1e-3
        # strictly inside the measurement range the bound holds exactly
        assert sigma_sphere(AIR, omega2, SpherePlateGeometry(gap_d=55e-9)) <= 1e-3

    def test_inverse_gap(self):
        omega2 = 2.0 * math.pi * 119.0
        s1 = sigma_sphere(AIR, omega2, SpherePlateGeometry(gap_d=50e-9))
        s2 = sigma_sphere(AIR, omega2, SpherePlateGeometry(gap_d=100e-9))
        assert s1 == pytest.approx(2.0 * s2, rel=1e-12)

    def test_high_pressure_limit(self):
        dense = GasProperties(pressure_p=1e12)
        sigma = sigma_sphere(dense, 747.7, GEOM_100NM)
        assert sigma < 1e-9
