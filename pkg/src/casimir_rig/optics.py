"""Normal-incidence reflection/transmission of layered stacks and thickness fitting.

Characteristic-matrix method with coherent finite layers between semi-infinite
ambient and substrate media (no substrate backside: mm-thick substrates are
treated as incoherent, so "transmission" is the power entering the substrate).
Convention: fields ~ exp(-i w t), complex index n + ik with k >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR_C_EV_NM
from .errors import ConfigError, DomainError, FitDegenerateError
from .materials import DielectricModel, VacuumModel, bundled_materials, load_materials

__all__ = [
    "LayerStack",
    "rt_spectrum",
    "fit_film_thickness",
    "load_stack",
    "read_spectrum",
    "write_spectrum",
]


@dataclass
class LayerStack:
    """Ambient | finite layers (listed from the ambient side) | substrate."""

    layers: list[tuple[DielectricModel, float]] = field(default_factory=list)
    substrate: DielectricModel = field(default_factory=VacuumModel)
    ambient: DielectricModel = field(default_factory=VacuumModel)

    def __post_init__(self):
        for _, thickness in self.layers:
            if thickness <= 0:
                raise DomainError("layer thickness must be > 0 nm")

    def with_thickness(self, thickness_nm: float, index: int = 0) -> "LayerStack":
        layers = list(self.layers)
        material, _ = layers[index]
        layers[index] = (material, thickness_nm)
        return LayerStack(layers=layers, substrate=self.substrate, ambient=self.ambient)


def _complex_index(model: DielectricModel, energies: np.ndarray) -> np.ndarray:
    n = np.sqrt(np.asarray(model.eps_real_axis(energies), dtype=complex))
    # decay of forward waves requires Im(n) >= 0
    return np.where(n.imag < 0, -n, n)


def rt_spectrum(stack: LayerStack, energies_eV) -> tuple[np.ndarray, np.ndarray]:
    """Reflectance and transmittance on an energy grid (eV).

    R + T <= 1, with equality exactly when every layer is lossless.
    """
    energies = np.atleast_1d(np.asarray(energies_eV, dtype=float))
    if np.any(energies <= 0):
        raise DomainError("photon energies must be > 0")
    n0 = _complex_index(stack.ambient, energies)
    ns = _complex_index(stack.substrate, energies)
    if np.any(n0.imag != 0):
        raise DomainError("ambient medium must be lossless")

    m11 = np.ones_like(n0)
    m12 = np.zeros_like(n0)
    m21 = np.zeros_like(n0)
    m22 = np.ones_like(n0)
    for material, thickness_nm in stack.layers:
        nj = _complex_index(material, energies)
        if np.any(~np.isfinite(nj)):
            raise DomainError(f"non-finite index for layer material {material.name!r}")
        phi = nj * energies * thickness_nm / HBAR_C_EV_NM
        c, s = np.cos(phi), np.sin(phi)
        a11, a12, a21, a22 = c, -1j * s / nj, -1j * nj * s, c
        m11, m12, m21, m22 = (
            m11 * a11 + m12 * a21,
            m11 * a12 + m12 * a22,
            m21 * a11 + m22 * a21,
            m21 * a12 + m22 * a22,
        )

    b = m11 + m12 * ns
    c = m21 + m22 * ns
    denom = n0 * b + c
    r = (n0 * b - c) / denom
    t = 2.0 * n0 / denom
    reflectance = np.abs(r) ** 2
    transmittance = (ns.real / n0.real) * np.abs(t) ** 2
    if np.ndim(energies_eV) == 0:
        return float(reflectance[0]), float(transmittance[0])
    return reflectance, transmittance


def fit_film_thickness(
    energies_eV,
    measured_R,
    measured_T,
    template: LayerStack,
    layer_index: int = 0,
    bounds_nm: tuple[float, float] = (20.0, 1000.0),
    coarse_step_nm: float = 2.0,
) -> tuple[float, float]:
    """Least-squares film thickness from interference fringes.

    Returns (best thickness nm, 1-sigma error nm).  The error comes from the
    curvature of the misfit at the optimum with the residual variance setting
    the scale.  Raises FitDegenerateError when the spectra carry no thickness
    information (flat misfit).
    """
    energies = np.asarray(energies_eV, dtype=float)
    r_meas = np.asarray(measured_R, dtype=float)
    t_meas = np.asarray(measured_T, dtype=float)

    def misfit(thickness):
        r_mod, t_mod = rt_spectrum(template.with_thickness(thickness, layer_index), energies)
        return float(np.sum((r_mod - r_meas) ** 2) + np.sum((t_mod - t_meas) ** 2))

    grid = np.arange(bounds_nm[0], bounds_nm[1] + coarse_step_nm, coarse_step_nm)
    chi = np.array([misfit(t) for t in grid])
    spread = chi.max() - chi.min()
    if spread <= 1e-14 * (1.0 + chi.max()):
        raise FitDegenerateError("misfit is flat in thickness; no fringe structure")
    i0 = int(np.argmin(chi))

    # golden-section refinement inside the bracketing coarse cells
    lo = grid[max(i0 - 1, 0)]
    hi = grid[min(i0 + 1, grid.size - 1)]
    gr = 0.5 * (np.sqrt(5.0) - 1.0)
    a, b = lo, hi
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    f1, f2 = misfit(x1), misfit(x2)
    for _ in range(60):
        if b - a < 1e-5:
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - gr * (b - a)
            f1 = misfit(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + gr * (b - a)
            f2 = misfit(x2)
    best = 0.5 * (a + b)
    chi_min = misfit(best)

    h = max(0.25, coarse_step_nm / 8.0)
    curv = (misfit(best + h) - 2.0 * chi_min + misfit(best - h)) / h**2
    if curv <= 0:
        raise FitDegenerateError("misfit has no curvature at the optimum")
    dof = max(2 * energies.size - 1, 1)
    sigma = float(np.sqrt(2.0 * max(chi_min, 1e-30) / dof / curv))
    # guard for noiseless round trips: curvature-limited resolution floor
    sigma = max(sigma, 1e-3)
    return float(best), sigma


# ---------------------------------------------------------------------------
# file formats


def read_spectrum(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column text file `energy_eV value`."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ConfigError(f"{path}: expected two columns")
    return data[:, 0], data[:, 1]


def write_spectrum(path, energies_eV, values) -> None:
    np.savetxt(path, np.column_stack([energies_eV, values]), fmt="%.8g",
               header="energy_eV value")


def load_stack(sections: dict[str, dict], materials: dict[str, DielectricModel] | None = None) -> LayerStack:
    """Build a LayerStack from a parsed `[stack]` section.

    Keys: ``substrate <name>``, ``layer <name> <thickness_nm>`` (then ``layer2``,
    ``layer3``, ...), optional ``materials <path>`` for a custom material file.
    """
    if "stack" not in sections:
        raise ConfigError("stack file needs a [stack] section")
    sec = sections["stack"]
    if materials is None:
        materials = dict(bundled_materials())
        if "materials" in sec:
            materials.update(load_materials(sec["materials"]))

    def resolve(name: str) -> DielectricModel:
        name = name.strip().lower()
        if name == "vacuum":
            return VacuumModel()
        if name not in materials:
            raise ConfigError(f"unknown material {name!r}")
        return materials[name]

    layers = []
    for key in ("layer", "layer2", "layer3", "layer4"):
        if key not in sec:
            continue
        parts = str(sec[key]).split()
        if len(parts) != 2:
            raise ConfigError(f"{key}: expected '<material> <thickness_nm>'")
        layers.append((resolve(parts[0]), float(parts[1])))
    substrate = resolve(sec.get("substrate", "vacuum"))
    return LayerStack(layers=layers, substrate=substrate)
