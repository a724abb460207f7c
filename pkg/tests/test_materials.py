import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from casimir_rig.errors import ConfigError, DomainError
from casimir_rig.materials import (
    ConstantEpsModel,
    DrudeParams,
    OscillatorModel,
    TabulatedEps2,
    TableModel,
    TaucLorentzParams,
    drude_eps,
    drude_eps2,
    drude_eps_imag,
    eps_imag_axis,
    kramers_kronig_real,
    load_materials_text,
    tauc_lorentz_eps2,
)

GOLD_TAIL = DrudeParams(9.0, 0.035)


class TestDrude:
    def test_imag_axis_value(self):
        # 1 + 81 / (1 * 1.035)
        assert drude_eps_imag(GOLD_TAIL, 1.0) == pytest.approx(79.26087, rel=1e-6)

    def test_complex_energy_agrees_with_imag_axis(self):
        eps = drude_eps(GOLD_TAIL, 1j * 1.0)
        assert complex(eps).real == pytest.approx(79.26087, rel=1e-6)
        assert abs(complex(eps).imag) < 1e-12

    def test_undamped_vanishes_at_plasma_energy(self):
        eps = drude_eps(DrudeParams(9.0, 0.0), 9.0)
        assert eps == pytest.approx(0.0, abs=1e-12)

    def test_high_frequency_transparency(self):
        assert drude_eps_imag(GOLD_TAIL, 1e6) == pytest.approx(1.0, abs=1e-6)

    def test_zero_energy_is_a_pole(self):
        with pytest.raises(DomainError):
            drude_eps(GOLD_TAIL, 0.0)

    @given(wp=st.floats(0.5, 20.0), gam=st.floats(0.0, 1.0),
           xi=st.floats(0.01, 50.0))
    def test_imag_axis_exceeds_unity(self, wp, gam, xi):
        assert drude_eps_imag(DrudeParams(wp, gam), xi) > 1.0

    def test_invalid_params(self):
        with pytest.raises(DomainError):
            DrudeParams(-1.0, 0.1)
        with pytest.raises(DomainError):
            DrudeParams(9.0, -0.1)


class TestTaucLorentz:
    def test_sub_gap_is_zero(self):
        p = TaucLorentzParams(100.0, 5.0, 1.0, 3.0)
        assert tauc_lorentz_eps2(p, 3.0) == 0.0
        assert tauc_lorentz_eps2(p, 1.0) == 0.0

    def test_hand_evaluated_point(self):
        # (1/5) * 100*5*1*(5-3)^2 / ((25-25)^2 + 1*25) = 16
        p = TaucLorentzParams(100.0, 5.0, 1.0, 3.0)
        assert tauc_lorentz_eps2(p, 5.0) == pytest.approx(16.0, rel=1e-12)

    def test_asymptotic_decay(self):
        p = TaucLorentzParams(100.0, 5.0, 1.0, 3.0)
        e = np.geomspace(50.0, 5000.0, 40)
        vals = tauc_lorentz_eps2(p, e)
        assert np.all(np.diff(vals) < 0)
        # ~ 1/E^3 tail: doubling E shrinks eps2 ~ 8x
        assert vals[-1] / tauc_lorentz_eps2(p, e[-1] / 2) == pytest.approx(1 / 8, rel=0.05)

    @given(e=st.floats(0.1, 100.0))
    def test_non_negative(self, e):
        p = TaucLorentzParams(45.0, 5.0, 2.0, 3.5)
        assert tauc_lorentz_eps2(p, e) >= 0.0


def lorentz_eps(e, f=20.0, w0=5.0, gam=0.2):
    return 1 + f / (w0**2 - e**2 - 1j * gam * e)


class TestKramersKronig:
    def test_lorentz_oscillator_pair(self):
        grid = np.geomspace(1e-2, 1e3, 3000)
        table = TabulatedEps2(grid, lorentz_eps(grid).imag)
        for e in (1.0, 3.0, 4.5, 6.0, 10.0):
            assert kramers_kronig_real(table, e) == pytest.approx(
                lorentz_eps(e).real, rel=0.01)

    def test_vacuum(self):
        table = TabulatedEps2(np.geomspace(0.01, 100, 50), np.zeros(50))
        assert kramers_kronig_real(table, 2.0) == pytest.approx(1.0, abs=1e-9)

    def test_drude_table_real_part(self):
        dp = DrudeParams(9.0, 0.5)
        grid = np.geomspace(1e-4, 1e4, 400)
        table = TabulatedEps2(grid, drude_eps2(dp, grid))
        expect = complex(drude_eps(dp, 2.0 + 0j)).real
        assert kramers_kronig_real(table, 2.0) == pytest.approx(expect, rel=0.01)

    def test_on_grid_node_is_finite(self):
        grid = np.geomspace(1e-2, 1e3, 500)
        table = TabulatedEps2(grid, lorentz_eps(grid).imag)
        val = kramers_kronig_real(table, float(grid[250]))
        assert np.isfinite(val)


class TestEpsImagAxis:
    def test_drude_only_table_matches_closed_form(self):
        dp = GOLD_TAIL
        grid = np.geomspace(1e-4, 1e4, 300)
        table = TabulatedEps2(grid, drude_eps2(dp, grid))
        xi = np.geomspace(0.01, 100.0, 30)
        got = eps_imag_axis(table, xi)
        want = drude_eps_imag(dp, xi)
        assert np.max(np.abs(got / want - 1.0)) < 0.02

    def test_analytic_tail_below_table(self):
        dp = GOLD_TAIL
        grid = np.geomspace(0.1, 1e4, 200)
        table = TabulatedEps2(grid, drude_eps2(dp, grid), low_energy_tail=dp)
        xi = np.geomspace(0.01, 100.0, 30)
        got = eps_imag_axis(table, xi)
        want = drude_eps_imag(dp, xi)
        assert np.max(np.abs(got / want - 1.0)) < 0.02

    def test_vacuum_table(self):
        table = TabulatedEps2(np.geomspace(0.01, 100, 60), np.zeros(60))
        assert eps_imag_axis(table, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_monotone_decreasing(self):
        grid = np.geomspace(1e-2, 1e3, 300)
        table = TabulatedEps2(grid, lorentz_eps(grid).imag)
        xi = np.geomspace(0.05, 50, 25)
        vals = eps_imag_axis(table, xi)
        assert np.all(np.diff(vals) < 0)
        assert np.all(vals > 1.0)

    def test_domain_error(self):
        table = TabulatedEps2(np.geomspace(0.01, 100, 60), np.zeros(60))
        with pytest.raises(DomainError):
            eps_imag_axis(table, -1.0)


class TestModelInvariants:
    @pytest.mark.parametrize("name", ["gold", "ito", "sapphire", "float_glass"])
    def test_imag_axis_real_decreasing_above_one(self, materials, name):
        xi = np.geomspace(0.02, 80.0, 40)
        vals = materials[name].eps_imag(xi)
        assert np.all(np.isreal(vals))
        assert np.all(vals > 1.0)
        assert np.all(np.diff(vals) < 0)

    def test_gold_metallic_flags(self, materials):
        assert materials["gold"].metallic
        assert materials["ito"].metallic
        assert not materials["sapphire"].metallic
        assert materials["sapphire"].static_eps() > 2.0

    def test_kk_cutoff_sensitivity(self, gold):
        """Truncating the gold table one decade early moves eps(i xi) by < 1%."""
        tab = gold.table
        keep = tab.energies_eV <= 1e3
        truncated = TableModel(TabulatedEps2(tab.energies_eV[keep], tab.eps2_values[keep],
                                             low_energy_tail=tab.low_energy_tail))
        for xi in (0.16, 1.0, 5.0):
            assert truncated.eps_imag(xi) == pytest.approx(gold.eps_imag(xi), rel=0.01)


class TestMaterialFiles:
    def test_parse_round_trip(self):
        text = """
[metal]
model drude
drude_plasma_ev 5.0
drude_relax_ev 0.1

[oxide]
model tauc_lorentz_sum
drude_plasma_ev 1.0
drude_relax_ev 0.2
tl_amplitude_ev 50
tl_peak_ev 5.0
tl_broadening_ev 2.0
tl_gap_ev 3.0

[tabbed]
model table
table
0.5 10.0
1.0 4.0
2.0 1.0
end
"""
        mats = load_materials_text(text)
        assert set(mats) == {"metal", "oxide", "tabbed"}
        assert mats["metal"].eps_imag(1.0) == pytest.approx(1 + 25 / 1.1, rel=1e-6)
        assert mats["oxide"].metallic
        assert not mats["tabbed"].metallic

    def test_bad_model_rejected(self):
        with pytest.raises(ConfigError):
            load_materials_text("[x]\nmodel nonsense\n")

    def test_table_rows_validated(self):
        with pytest.raises(ConfigError):
            load_materials_text("[x]\nmodel table\ntable\n1.0 2.0 3.0\nend\n")
        with pytest.raises(DomainError):
            load_materials_text("[x]\nmodel table\ntable\n2.0 1.0\n1.0 1.0\nend\n")

    def test_constant_model_requires_physical_eps(self):
        with pytest.raises(DomainError):
            ConstantEpsModel(0.5)
