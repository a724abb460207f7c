import math

import numpy as np
import pytest

from casimir_rig.configfile import parse_kv_text
from casimir_rig.constants import HBAR_C_EV_NM
from casimir_rig.errors import FitDegenerateError
from casimir_rig.materials import ConstantEpsModel, VacuumModel
from casimir_rig.optics import (
    LayerStack,
    fit_film_thickness,
    load_stack,
    read_spectrum,
    rt_spectrum,
    write_spectrum,
)


@pytest.fixture(scope="module")
def ito_stack(materials):
    return LayerStack(layers=[(materials["ito"], 190.0)], substrate=materials["float_glass"])


@pytest.fixture(scope="module")
def ito_spectrum(ito_stack):
    energies = np.linspace(0.5, 6.5, 240)
    r_spec, t_spec = rt_spectrum(ito_stack, energies)
    return energies, r_spec, t_spec


class TestRtSpectrum:
    def test_empty_stack_transparent(self):
        e = np.linspace(0.5, 6.5, 7)
        r_spec, t_spec = rt_spectrum(LayerStack(), e)
        assert np.allclose(r_spec, 0.0, atol=1e-14)
        assert np.allclose(t_spec, 1.0, atol=1e-14)

    def test_quarter_wave_antireflection(self):
        # n=2 coating on n=4 substrate, t=100 nm -> zero reflection at the design energy
        stack = LayerStack(layers=[(ConstantEpsModel(4.0), 100.0)],
                           substrate=ConstantEpsModel(16.0))
        e_design = math.pi / 2 * HBAR_C_EV_NM / (2.0 * 100.0)
        r_val, t_val = rt_spectrum(stack, e_design)
        assert r_val == pytest.approx(0.0, abs=1e-10)
        assert t_val == pytest.approx(1.0, abs=1e-10)

    def test_gold_on_sapphire_transmission_peak(self, materials):
        stack = LayerStack(layers=[(materials["gold"], 100.0)],
                           substrate=materials["sapphire"])
        e = np.linspace(2.0, 3.2, 121)
        _, t_spec = rt_spectrum(stack, e)
        i = int(np.argmax(t_spec))
        assert 2.2 < e[i] < 2.9
        assert t_spec[i] == pytest.approx(0.014, abs=0.005)

    def test_energy_conservation_lossless(self):
        stack = LayerStack(layers=[(ConstantEpsModel(4.0), 150.0),
                                   (ConstantEpsModel(2.25), 80.0)],
                           substrate=ConstantEpsModel(2.56))
        e = np.linspace(0.5, 6.0, 97)
        r_spec, t_spec = rt_spectrum(stack, e)
        assert np.max(np.abs(r_spec + t_spec - 1.0)) < 1e-10

    def test_absorbing_stack_dissipates(self, materials, ito_spectrum):
        _, r_spec, t_spec = ito_spectrum
        total = r_spec + t_spec
        assert np.all(total <= 1.0 + 1e-12)
        assert total.min() < 0.999  # ITO absorbs somewhere in band

    def test_reciprocity_same_bounding_media(self):
        layers = [(ConstantEpsModel(6.0), 120.0), (ConstantEpsModel(2.0), 60.0)]
        e = np.linspace(0.5, 5.0, 41)
        _, t_fwd = rt_spectrum(LayerStack(layers=layers), e)
        _, t_rev = rt_spectrum(LayerStack(layers=layers[::-1]), e)
        assert np.allclose(t_fwd, t_rev, rtol=1e-12)

    def test_fringe_spacing_matches_optical_thickness(self):
        n_film, t_film = 2.0, 400.0
        stack = LayerStack(layers=[(ConstantEpsModel(n_film**2), t_film)],
                           substrate=ConstantEpsModel(2.25))
        e = np.linspace(0.5, 6.0, 4001)
        r_spec, _ = rt_spectrum(stack, e)
        peaks = [i for i in range(1, e.size - 1)
                 if r_spec[i] > r_spec[i - 1] and r_spec[i] > r_spec[i + 1]]
        spacing = np.diff(e[peaks]).mean()
        expected = 2 * math.pi * HBAR_C_EV_NM / (2.0 * n_film * t_film)
        assert spacing == pytest.approx(expected, rel=0.01)


class TestThicknessFit:
    def test_noiseless_round_trip_exact(self, ito_stack, ito_spectrum):
        e, r_spec, t_spec = ito_spectrum
        fit, sigma = fit_film_thickness(e, r_spec, t_spec,
                                        ito_stack.with_thickness(60.0),
                                        bounds_nm=(60, 400))
        assert fit == pytest.approx(190.0, abs=1e-3)
        assert sigma >= 0

    @pytest.mark.parametrize("truth_nm", [190.0, 180.0])
    def test_noisy_round_trip(self, ito_stack, truth_nm, rng):
        e = np.linspace(0.5, 6.5, 240)
        r_spec, t_spec = rt_spectrum(ito_stack.with_thickness(truth_nm), e)
        r_noisy = r_spec * (1.0 + 0.01 * rng.standard_normal(e.size))
        t_noisy = t_spec * (1.0 + 0.01 * rng.standard_normal(e.size))
        fit, sigma = fit_film_thickness(e, r_noisy, t_noisy, ito_stack,
                                        bounds_nm=(60, 400))
        assert fit == pytest.approx(truth_nm, abs=5.0)

    def test_degenerate_without_fringes(self, ito_spectrum):
        e, r_spec, t_spec = ito_spectrum
        # a vacuum "film" leaves the spectra untouched at any thickness
        template = LayerStack(layers=[(VacuumModel(), 100.0)],
                              substrate=ConstantEpsModel(2.25))
        r_flat, t_flat = rt_spectrum(template, e)
        with pytest.raises(FitDegenerateError):
            fit_film_thickness(e, r_flat, t_flat, template, bounds_nm=(60, 400))


class TestFiles:
    def test_spectrum_round_trip(self, tmp_path):
        e = np.linspace(0.5, 6.5, 11)
        v = np.linspace(0.1, 0.9, 11)
        path = tmp_path / "spec.txt"
        write_spectrum(path, e, v)
        e2, v2 = read_spectrum(path)
        assert np.allclose(e, e2) and np.allclose(v, v2)

    def test_stack_file(self, materials):
        sections = parse_kv_text("[stack]\nsubstrate sapphire\nlayer gold 100\n")
        stack = load_stack(sections)
        assert stack.substrate.name == "sapphire"
        assert stack.layers[0][1] == 100.0
