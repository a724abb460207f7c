"""Material permittivities on the real and imaginary frequency axes.

Three model families are supported:

* analytic Drude metals,
* sums of a Drude term and Tauc-Lorentz oscillators (conductive oxides,
  glasses), and
* tabulated ``eps2(E)`` data with an optional analytic Drude tail below the
  first grid point (handbook metal data).

The real part on the real axis always comes from direct Kramers-Kronig
integration of ``eps2``; the imaginary-axis permittivity comes from the
corresponding ``xi``-kernel transform.  Energies are in eV throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configfile import get_float, parse_kv_file, parse_kv_text
from .errors import ConfigError, DomainError

__all__ = [
    "DrudeParams",
    "TaucLorentzParams",
    "TabulatedEps2",
    "drude_eps",
    "drude_eps_imag",
    "tauc_lorentz_eps2",
    "kramers_kronig_real",
    "eps_imag_axis",
    "DielectricModel",
    "VacuumModel",
    "ConstantEpsModel",
    "DrudeModel",
    "OscillatorModel",
    "TableModel",
    "load_materials",
    "load_materials_text",
    "bundled_materials",
]


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class DrudeParams:
    """Free-carrier response: plasma energy omega_p and relaxation rate 1/tau, eV."""

    plasma_energy_eV: float
    relaxation_energy_eV: float

    def __post_init__(self):
        if self.plasma_energy_eV <= 0:
            raise DomainError("Drude plasma energy must be > 0")
        if self.relaxation_energy_eV < 0:
            raise DomainError("Drude relaxation energy must be >= 0")


@dataclass(frozen=True)
class TaucLorentzParams:
    """One Tauc-Lorentz oscillator: amplitude A, peak E0, broadening C, gap Eg (eV)."""

    amplitude_eV: float
    peak_energy_eV: float
    broadening_eV: float
    gap_energy_eV: float

    def __post_init__(self):
        if self.amplitude_eV <= 0 or self.peak_energy_eV <= 0 or self.broadening_eV <= 0:
            raise DomainError("Tauc-Lorentz A, E0, C must be > 0")
        if self.gap_energy_eV < 0:
            raise DomainError("Tauc-Lorentz gap must be >= 0")


@dataclass(frozen=True)
class TabulatedEps2:
    """Tabulated imaginary permittivity on an ascending energy grid.

    ``low_energy_tail`` extends the data below the first grid point with an
    analytic Drude term; above the last point a power-law continuation of the
    final decade is used.
    """

    energies_eV: np.ndarray
    eps2_values: np.ndarray
    low_energy_tail: DrudeParams | None = None

    def __post_init__(self):
        e = np.asarray(self.energies_eV, dtype=float)
        v = np.asarray(self.eps2_values, dtype=float)
        if e.ndim != 1 or e.shape != v.shape or e.size < 2:
            raise DomainError("table needs matching 1-d energy and eps2 arrays")
        if np.any(np.diff(e) <= 0):
            raise DomainError("table energies must be strictly ascending")
        if np.any(v < 0):
            raise DomainError("eps2 must be non-negative")
        object.__setattr__(self, "energies_eV", e)
        object.__setattr__(self, "eps2_values", v)


# ---------------------------------------------------------------------------
# analytic models


def drude_eps(params: DrudeParams, energy_eV):
    """Drude permittivity at complex energy E (eV): 1 - wp^2 / (E (E + i/tau)).

    Passing ``1j * xi`` evaluates the model on the imaginary axis, where the
    result is purely real: 1 + wp^2 / (xi (xi + 1/tau)).
    """
    e = np.asarray(energy_eV, dtype=complex)
    if np.any(e == 0):
        raise DomainError("Drude model has a pole at zero energy")
    wp2 = params.plasma_energy_eV**2
    out = 1.0 - wp2 / (e * (e + 1j * params.relaxation_energy_eV))
    if np.isscalar(energy_eV) or np.ndim(energy_eV) == 0:
        out = complex(out)
        if out.imag == 0.0:
            return out.real if np.isrealobj(np.asarray(energy_eV)) else out
        return out
    return out


def drude_eps_imag(params: DrudeParams, xi_eV):
    """Real-valued Drude permittivity on the imaginary axis, xi > 0."""
    xi = np.asarray(xi_eV, dtype=float)
    if np.any(xi <= 0):
        raise DomainError("imaginary-axis energy must be > 0")
    wp2 = params.plasma_energy_eV**2
    out = 1.0 + wp2 / (xi * (xi + params.relaxation_energy_eV))
    return float(out) if out.ndim == 0 else out


def drude_eps2(params: DrudeParams, energy_eV):
    """Imaginary part of the Drude permittivity on the real axis."""
    e = np.asarray(energy_eV, dtype=float)
    wp2 = params.plasma_energy_eV**2
    g = params.relaxation_energy_eV
    out = wp2 * g / (e * (e**2 + g**2))
    return float(out) if out.ndim == 0 else out


def tauc_lorentz_eps2(params: TaucLorentzParams, energy_eV):
    """Tauc-Lorentz eps2: zero below the gap, Lorentzian-with-gap above."""
    e = np.asarray(energy_eV, dtype=float)
    a, e0, c, eg = (
        params.amplitude_eV,
        params.peak_energy_eV,
        params.broadening_eV,
        params.gap_energy_eV,
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        val = a * e0 * c * (e - eg) ** 2 / (((e**2 - e0**2) ** 2 + c**2 * e**2) * e)
    out = np.where(e > eg, val, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# dense working grid for the integral transforms


def _loglog_interp(x_src, y_src, x_out):
    """Interpolate positive data as a power law between nodes; linear where y hits 0."""
    x_src = np.asarray(x_src, dtype=float)
    y_src = np.asarray(y_src, dtype=float)
    scalar = np.ndim(x_out) == 0
    x_out = np.atleast_1d(np.asarray(x_out, dtype=float))
    out = np.interp(x_out, x_src, y_src)
    pos = y_src > 0.0
    if np.count_nonzero(pos) >= 2:
        # overwrite with log-log interpolation on the strictly positive support
        x_pos, y_pos = x_src[pos], y_src[pos]
        lo, hi = x_pos[0], x_pos[-1]
        inside = (x_out >= lo) & (x_out <= hi)
        if np.all(pos):
            out[inside] = np.exp(
                np.interp(np.log(x_out[inside]), np.log(x_pos), np.log(y_pos))
            )
    return float(out[0]) if scalar else out


@dataclass
class _DenseEps2:
    """Resampled eps2 on a dense log grid, with tail bookkeeping."""

    x: np.ndarray
    y: np.ndarray
    tail: DrudeParams | None
    e_min: float  # first tabulated point; analytic tail applies below

    @property
    def xy(self):
        return self.x * self.y


_PTS_PER_DECADE = 400
_HIGH_EXTEND_DECADES = 1.0


def _densify(table: TabulatedEps2) -> _DenseEps2:
    e = table.energies_eV
    v = table.eps2_values
    lo, hi = e[0], e[-1]
    n_main = max(int(_PTS_PER_DECADE * math.log10(hi / lo)), 200)
    x_main = np.geomspace(lo, hi, n_main)
    y_main = _loglog_interp(e, v, x_main)

    # power-law continuation above the table from the closing decade
    top = e >= hi / 10.0
    if np.count_nonzero(top) >= 2 and np.all(v[top] > 0):
        coeffs = np.polyfit(np.log(e[top]), np.log(v[top]), 1)
        slope = min(coeffs[0], -1.5)
        x_hi = np.geomspace(hi, hi * 10**_HIGH_EXTEND_DECADES, 2 + int(40 * _HIGH_EXTEND_DECADES))[1:]
        y_hi = v[-1] * (x_hi / hi) ** slope
        x_main = np.concatenate([x_main, x_hi])
        y_main = np.concatenate([y_main, y_hi])
    return _DenseEps2(x=x_main, y=y_main, tail=table.low_energy_tail, e_min=lo)


# ---------------------------------------------------------------------------
# Kramers-Kronig (real axis) and imaginary-axis transforms


def _drude_tail_imag_axis(tail: DrudeParams, x_max: float, xi: np.ndarray) -> np.ndarray:
    """(2/pi) * integral_0^x_max  E eps2_drude(E) / (E^2 + xi^2) dE, closed form."""
    g = tail.relaxation_energy_eV
    wp2 = tail.plasma_energy_eV**2
    xi = np.asarray(xi, dtype=float)
    if g == 0.0:
        # undamped limit: eps2 is a delta at 0; full weight lands below any x_max
        return wp2 / xi**2
    a_g = math.atan2(x_max, g) / g
    a_xi = np.arctan2(x_max, xi) / xi
    out = np.empty_like(xi)
    degenerate = np.isclose(xi, g, rtol=1e-9, atol=0.0)
    reg = ~degenerate
    out[reg] = (2.0 * wp2 * g / math.pi) * (a_g - a_xi[reg]) / (xi[reg] ** 2 - g**2)
    if np.any(degenerate):
        lim = (math.atan2(x_max, g) / g**2 + x_max / (g * (g**2 + x_max**2))) / (2.0 * g)
        out[degenerate] = (2.0 * wp2 * g / math.pi) * lim
    return out


def _drude_tail_real_axis(tail: DrudeParams, x_max: float, e: np.ndarray) -> np.ndarray:
    """(2/pi) * PV integral_0^x_max  E' eps2_drude(E') / (E'^2 - E^2) dE', closed form."""
    g = tail.relaxation_energy_eV
    wp2 = tail.plasma_energy_eV**2
    e = np.asarray(e, dtype=float)
    if g == 0.0:
        return -wp2 / e**2
    # partial fractions: 1/((x^2+g^2)(x^2-E^2)) = [1/(E^2+g^2)] (1/(x^2-E^2) - 1/(x^2+g^2))
    pv_log = np.where(
        e < x_max,
        np.log(np.abs((x_max - e) / (x_max + e))) / (2.0 * e),
        np.log(np.abs((e - x_max) / (e + x_max))) / (2.0 * e),
    )
    term = pv_log - np.arctan2(x_max, g) / g
    return (2.0 * wp2 * g / math.pi) * term / (e**2 + g**2)


def kramers_kronig_real(table: TabulatedEps2, energy_eV) -> float | np.ndarray:
    """Real part of the permittivity by principal-value Kramers-Kronig integration.

    eps1(E) = 1 + (2/pi) PV int_0^inf  E' eps2(E') / (E'^2 - E^2) dE'

    The singularity is removed by subtracting ``E eps2(E)`` from the numerator
    (its PV integral is known in closed form), so evaluation points on or near
    grid nodes need no special casing.
    """
    dense = _densify(table)
    e_arr = np.atleast_1d(np.asarray(energy_eV, dtype=float))
    if np.any(e_arr <= 0):
        raise DomainError("evaluation energy must be > 0")

    x = dense.x
    xy = dense.xy
    lam = x[-1]
    x0 = x[0]
    eps2_at = _loglog_interp(x, dense.y, np.clip(e_arr, x0, lam))
    below = e_arr < x0
    if np.any(below) and dense.tail is not None:
        eps2_at[below] = drude_eps2(dense.tail, e_arr[below])
    above = e_arr > lam
    if np.any(above):
        eps2_at[above] = dense.y[-1] * (e_arr[above] / lam) ** -3

    # subtracted integrand, regular at x == E
    denom = x[None, :] ** 2 - e_arr[:, None] ** 2
    numer = xy[None, :] - (e_arr * eps2_at)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        f = numer / denom
    # patch the (rare) exact-node hits with the neighbour average
    bad = ~np.isfinite(f)
    if np.any(bad):
        for i, j in zip(*np.nonzero(bad)):
            jlo = j - 1 if j > 0 else j + 1
            jhi = j + 1 if j + 1 < f.shape[1] else j - 1
            f[i, j] = 0.5 * (f[i, jlo] + f[i, jhi])
    main = np.trapezoid(f, x[None, :], axis=1)

    # closed-form PV of the subtracted constant over [x0, lam]
    inside = (e_arr > x0) & (e_arr < lam)
    pv = np.zeros_like(e_arr)
    pv[inside] = (
        np.log((lam - e_arr[inside]) / (lam + e_arr[inside])
               * (x0 + e_arr[inside]) / (e_arr[inside] - x0))
        / (2.0 * e_arr[inside])
    )
    pv_term = e_arr * eps2_at * pv

    out = 1.0 + (2.0 / math.pi) * (main + pv_term)
    if dense.tail is not None:
        out = out + _drude_tail_real_axis(dense.tail, dense.e_min, e_arr)
        # remove the dense-grid coverage of [x0, e_min) if grid starts below table
        # (densify never extends below the table, so nothing to remove)
    if np.ndim(energy_eV) == 0:
        return float(out[0])
    return out


def eps_imag_axis(table: TabulatedEps2, xi_eV) -> float | np.ndarray:
    """Imaginary-axis permittivity from tabulated eps2.

    eps(i xi) = 1 + (2/pi) int_0^inf  E eps2(E) / (E^2 + xi^2) dE

    with the low-energy Drude tail integrated in closed form below the first
    grid point.  The result is real, > 1, and strictly decreasing in xi.
    """
    xi_arr = np.atleast_1d(np.asarray(xi_eV, dtype=float))
    if np.any(xi_arr <= 0):
        raise DomainError("imaginary-axis energy must be > 0")
    dense = _densify(table)
    out = np.empty_like(xi_arr)
    block = max(int(4e6) // dense.x.size, 16)
    for start in range(0, xi_arr.size, block):
        sl = slice(start, start + block)
        kernel = dense.xy[None, :] / (dense.x[None, :] ** 2 + xi_arr[sl, None] ** 2)
        out[sl] = np.trapezoid(kernel, dense.x[None, :], axis=1)
    out = 1.0 + (2.0 / math.pi) * out
    if dense.tail is not None:
        out = out + _drude_tail_imag_axis(dense.tail, dense.e_min, xi_arr)
    if np.ndim(xi_eV) == 0:
        return float(out[0])
    return out


# ---------------------------------------------------------------------------
# model objects


class DielectricModel:
    """Common interface: complex eps(E) on the real axis, real eps(i xi)."""

    name = "generic"
    #: True when the model carries a free-carrier (Drude) pole, which fixes the
    #: zero-frequency reflection prescription in the Lifshitz sum.
    metallic = False

    def eps_imag(self, xi_eV):
        raise NotImplementedError

    def eps_real_axis(self, energies_eV):
        raise NotImplementedError

    def static_eps(self) -> float:
        """eps at zero frequency; inf for metallic models."""
        return math.inf if self.metallic else float(self.eps_imag(1e-4))

    @property
    def plasma_energy_eV(self) -> float | None:
        """Free-carrier plasma energy when the model has one (else None)."""
        drude = getattr(self, "drude", None) or getattr(self, "params", None)
        if drude is None:
            table = getattr(self, "table", None)
            drude = table.low_energy_tail if table is not None else None
        return drude.plasma_energy_eV if drude is not None else None

    def refractive_index(self, energies_eV):
        return np.sqrt(self.eps_real_axis(energies_eV).astype(complex))


class ConstantEpsModel(DielectricModel):
    def __init__(self, eps: float, name: str = "constant"):
        if eps < 1.0:
            raise DomainError("constant permittivity must be >= 1")
        self.eps = float(eps)
        self.name = name

    def eps_imag(self, xi_eV):
        xi = np.asarray(xi_eV, dtype=float)
        out = np.full_like(xi, self.eps, dtype=float)
        return float(out) if out.ndim == 0 else out

    def eps_real_axis(self, energies_eV):
        e = np.asarray(energies_eV, dtype=float)
        out = np.full_like(e, self.eps, dtype=complex)
        return complex(out) if out.ndim == 0 else out


class VacuumModel(ConstantEpsModel):
    def __init__(self):
        super().__init__(1.0, name="vacuum")


class DrudeModel(DielectricModel):
    metallic = True

    def __init__(self, params: DrudeParams, name: str = "drude"):
        self.params = params
        self.name = name

    def eps_imag(self, xi_eV):
        return drude_eps_imag(self.params, xi_eV)

    def eps_real_axis(self, energies_eV):
        return drude_eps(self.params, np.asarray(energies_eV, dtype=float) + 0j)


class OscillatorModel(DielectricModel):
    """Sum of an optional Drude term and Tauc-Lorentz oscillators.

    The Drude part is handled analytically on both axes; the oscillator part
    goes through the numeric Kramers-Kronig / imaginary-axis transforms of its
    eps2.  ``eps_inf`` adds a constant background (default 1, i.e. none).
    """

    def __init__(
        self,
        oscillators: list[TaucLorentzParams],
        drude: DrudeParams | None = None,
        eps_inf: float = 1.0,
        name: str = "oscillator",
    ):
        if eps_inf < 1.0:
            raise DomainError("eps_inf must be >= 1")
        if not oscillators and drude is None:
            raise DomainError("need at least one oscillator or a Drude term")
        self.oscillators = list(oscillators)
        self.drude = drude
        self.eps_inf = float(eps_inf)
        self.name = name
        self.metallic = drude is not None
        self._osc_table = self._build_osc_table() if self.oscillators else None

    def _build_osc_table(self) -> TabulatedEps2:
        e0_max = max(o.peak_energy_eV for o in self.oscillators)
        eg_min = min(o.gap_energy_eV for o in self.oscillators)
        lo = max(1e-3, eg_min * 0.5) if eg_min > 0 else 1e-3
        hi = max(200.0, 30.0 * e0_max)
        grid = np.geomspace(lo, hi, 1200)
        eps2 = self.osc_eps2(grid)
        return TabulatedEps2(grid, eps2)

    def osc_eps2(self, energies_eV):
        e = np.asarray(energies_eV, dtype=float)
        total = np.zeros_like(e)
        for osc in self.oscillators:
            total = total + tauc_lorentz_eps2(osc, e)
        return total

    def eps2(self, energies_eV):
        out = self.osc_eps2(energies_eV)
        if self.drude is not None:
            out = out + drude_eps2(self.drude, energies_eV)
        return out

    def eps_imag(self, xi_eV):
        xi = np.asarray(xi_eV, dtype=float)
        out = np.full(xi.shape, self.eps_inf, dtype=float)
        if self._osc_table is not None:
            out = out + eps_imag_axis(self._osc_table, xi) - 1.0
        if self.drude is not None:
            out = out + drude_eps_imag(self.drude, xi) - 1.0
        if np.ndim(xi_eV) == 0:
            return float(out)
        return out

    def eps_real_axis(self, energies_eV):
        e = np.asarray(energies_eV, dtype=float)
        eps1 = np.full(e.shape, self.eps_inf, dtype=float)
        if self._osc_table is not None:
            eps1 = eps1 + kramers_kronig_real(self._osc_table, e) - 1.0
        out = eps1 + 1j * self.osc_eps2(e)
        if self.drude is not None:
            out = out + drude_eps(self.drude, e + 0j) - 1.0
        if np.ndim(energies_eV) == 0:
            return complex(out)
        return out


class TableModel(DielectricModel):
    def __init__(self, table: TabulatedEps2, name: str = "table"):
        self.table = table
        self.name = name
        self.metallic = table.low_energy_tail is not None

    def eps2(self, energies_eV):
        dense = _densify(self.table)
        e = np.asarray(energies_eV, dtype=float)
        out = _loglog_interp(dense.x, dense.y, np.clip(e, dense.x[0], dense.x[-1]))
        if self.table.low_energy_tail is not None:
            below = e < dense.e_min
            if np.any(below):
                out = np.where(below, drude_eps2(self.table.low_energy_tail, e), out)
        return out

    def eps_imag(self, xi_eV):
        return eps_imag_axis(self.table, xi_eV)

    def eps_real_axis(self, energies_eV):
        return kramers_kronig_real(self.table, energies_eV) + 1j * self.eps2(energies_eV)


# ---------------------------------------------------------------------------
# material files


def _parse_drude(section: dict) -> DrudeParams | None:
    if "drude_plasma_ev" not in section:
        return None
    return DrudeParams(
        plasma_energy_eV=get_float(section, "drude_plasma_ev"),
        relaxation_energy_eV=get_float(section, "drude_relax_ev"),
    )


def _parse_oscillators(section: dict) -> list[TaucLorentzParams]:
    oscillators = []
    for prefix in ("tl", "tl2", "tl3", "tl4"):
        key = f"{prefix}_amplitude_ev"
        if key not in section:
            continue
        oscillators.append(
            TaucLorentzParams(
                amplitude_eV=get_float(section, key),
                peak_energy_eV=get_float(section, f"{prefix}_peak_ev"),
                broadening_eV=get_float(section, f"{prefix}_broadening_ev"),
                gap_energy_eV=get_float(section, f"{prefix}_gap_ev"),
            )
        )
    return oscillators


def _model_from_section(name: str, section: dict) -> DielectricModel:
    kind = section.get("model", "").strip().lower()
    if kind == "drude":
        drude = _parse_drude(section)
        if drude is None:
            raise ConfigError(f"material {name!r}: drude model needs drude_plasma_ev/drude_relax_ev")
        return DrudeModel(drude, name=name)
    if kind == "tauc_lorentz_sum":
        oscillators = _parse_oscillators(section)
        return OscillatorModel(
            oscillators,
            drude=_parse_drude(section),
            eps_inf=get_float(section, "eps_inf", 1.0),
            name=name,
        )
    if kind == "table":
        rows = section.get("table")
        if not rows:
            raise ConfigError(f"material {name!r}: table model needs a table block")
        energies = np.array([r[0] for r in rows])
        eps2 = np.array([r[1] for r in rows])
        return TableModel(
            TabulatedEps2(energies, eps2, low_energy_tail=_parse_drude(section)),
            name=name,
        )
    raise ConfigError(f"material {name!r}: unknown model {kind!r}")


def load_materials_text(text: str) -> dict[str, DielectricModel]:
    return {name: _model_from_section(name, sec) for name, sec in parse_kv_text(text).items()}


def load_materials(path) -> dict[str, DielectricModel]:
    return {name: _model_from_section(name, sec) for name, sec in parse_kv_file(path).items()}


_bundled_cache: dict[str, DielectricModel] | None = None


def bundled_materials() -> dict[str, DielectricModel]:
    """Materials shipped with the package (gold, ito, sapphire, float_glass)."""
    global _bundled_cache
    if _bundled_cache is None:
        from importlib.resources import files

        text = files("casimir_rig.data").joinpath("materials.txt").read_text()
        _bundled_cache = load_materials_text(text)
    return _bundled_cache
