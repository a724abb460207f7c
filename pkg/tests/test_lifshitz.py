import math

import numpy as np
import pytest

from casimir_rig.constants import ideal_conductor_pressure
from casimir_rig.errors import ConvergenceError, DomainError
from casimir_rig.lifshitz import (
    MatsubaraGrid,
    gradient_over_R,
    matsubara_grid,
    pressure_curve,
    pressure_pp,
    tail_fraction,
)
from casimir_rig.materials import ConstantEpsModel


class TestMatsubaraGrid:
    def test_first_energy_at_300K(self):
        grid = matsubara_grid(300.0, 100e-9)
        assert grid.xi_eV[1] == pytest.approx(0.162433, rel=1e-4)

    def test_linear_spacing(self):
        grid = matsubara_grid(300.0, 100e-9)
        assert grid.xi_eV[2] == pytest.approx(2.0 * grid.xi_eV[1], rel=1e-14)
        assert grid.xi_eV[0] == 0.0

    def test_thousand_terms_pass_tail_criterion(self, gold):
        """At d = 100 nm / 300 K a 1000-term sum has a sub-0.1% truncation tail."""
        grid = matsubara_grid(300.0, 100e-9)
        assert grid.n_max <= 1000
        xi1 = grid.xi_eV[1]
        big = MatsubaraGrid(300.0, xi1 * np.arange(1001), 1000)
        pressure_pp(100e-9, big, gold, gold)  # internal tail check passes

    def test_adaptive_nmax_scales_inversely_with_d(self):
        n_small = matsubara_grid(300.0, 50e-9).n_max
        n_large = matsubara_grid(300.0, 1000e-9).n_max
        assert n_small > n_large

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            matsubara_grid(-1.0, 100e-9)
        with pytest.raises(DomainError):
            matsubara_grid(300.0, 0.0)


class TestPressure:
    def test_vacuum_pair_is_zero(self):
        vac = ConstantEpsModel(1.0)
        grid = matsubara_grid(300.0, 100e-9)
        assert pressure_pp(100e-9, grid, vac, vac) == 0.0

    def test_ideal_conductor_limit(self):
        """eps = 1e8 on a near-zero-temperature grid reproduces the perfect-mirror law."""
        ideal = ConstantEpsModel(1e8)
        grid = matsubara_grid(10.0, 100e-9)
        p = pressure_pp(100e-9, grid, ideal, ideal,
                        zero_mode_a="drude", zero_mode_b="drude")
        expect = -ideal_conductor_pressure(100e-9)
        assert p == pytest.approx(expect, rel=0.01)
        assert gradient_over_R(p) == pytest.approx(-81.69, rel=0.01)

    def test_attractive_and_decreasing(self, gold):
        d = np.geomspace(50e-9, 1100e-9, 12)
        p = pressure_curve(d, 300.0, gold, gold)
        assert np.all(p < 0)
        assert np.all(np.diff(np.abs(p)) < 0)

    def test_loglog_slope_band(self, gold):
        d = np.geomspace(50e-9, 1100e-9, 12)
        p = pressure_curve(d, 300.0, gold, gold)
        slopes = np.diff(np.log(np.abs(p))) / np.diff(np.log(d))
        assert np.all(slopes < -2.8)
        # the free-carrier zero-mode prescription overshoots the retarded -4
        # law by ~1% near 1 um on its way to the thermal asymptote
        assert np.all(slopes > -4.1)
        assert np.all(slopes[d[:-1] < 600e-9] > -4.0)

    def test_weaker_mirror_never_attracts_more(self, gold, ito):
        for d in (60e-9, 120e-9, 400e-9):
            grid = matsubara_grid(300.0, d)
            p_auau = pressure_pp(d, grid, gold, gold)
            p_auito = pressure_pp(d, grid, gold, ito)
            assert abs(p_auito) < abs(p_auau)

    def test_halving_ratio_band(self, gold, ito):
        grid = matsubara_grid(300.0, 120e-9)
        ratio = (pressure_pp(120e-9, grid, gold, ito)
                 / pressure_pp(120e-9, grid, gold, gold))
        assert 0.4 < ratio < 0.6

    def test_zero_mode_prescriptions_agree_closely(self, gold, ito):
        """Drude vs plasma zero-frequency handling barely moves the Au/ITO ratio."""
        grid = matsubara_grid(300.0, 120e-9)

        def ratio(mode_gold, mode_ito):
            num = pressure_pp(120e-9, grid, gold, ito,
                              zero_mode_a=mode_gold, zero_mode_b=mode_ito)
            den = pressure_pp(120e-9, grid, gold, gold,
                              zero_mode_a=mode_gold, zero_mode_b=mode_gold)
            return num / den

        r_drude = ratio("drude", "drude")
        r_plasma = ratio(("plasma", gold.plasma_energy_eV),
                         ("plasma", ito.plasma_energy_eV))
        assert r_plasma == pytest.approx(r_drude, abs=0.02)

    def test_truncated_grid_raises(self, gold):
        # at 100 nm the sum needs ~200 terms; 4 leave a percent-level tail
        xi1 = matsubara_grid(300.0, 100e-9).xi_eV[1]
        tiny = MatsubaraGrid(300.0, xi1 * np.arange(5), 4)
        with pytest.raises(ConvergenceError):
            pressure_pp(100e-9, tiny, gold, gold)

    def test_dielectric_zero_mode(self, materials):
        """A glass pair uses the static-permittivity n = 0 reflection, not r = 1."""
        glass = materials["float_glass"]
        grid = matsubara_grid(300.0, 100e-9)
        p_auto = pressure_pp(100e-9, grid, glass, glass)
        p_metal0 = pressure_pp(100e-9, grid, glass, glass,
                               zero_mode_a="drude", zero_mode_b="drude")
        assert abs(p_auto) < abs(p_metal0)


class TestGradient:
    def test_pfa_conversion(self):
        assert gradient_over_R(-13.0) == pytest.approx(-81.68, rel=1e-3)
        assert gradient_over_R(0.0) == 0.0

    def test_attractive_sign(self, gold):
        grid = matsubara_grid(300.0, 100e-9)
        p = pressure_pp(100e-9, grid, gold, gold)
        assert gradient_over_R(p) < 0


def test_tail_fraction_estimator():
    terms = np.exp(-0.5 * np.arange(30))
    est = tail_fraction(terms)
    exact = terms[-1] * math.exp(-0.5) / (1 - math.exp(-0.5)) / terms.sum()
    assert est == pytest.approx(exact, rel=0.2)
