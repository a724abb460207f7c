"""Closed-form sphere-plate force models.

All forces are signed along the outward gap axis: attraction toward the plate
is negative.  The proximity-force electrostatic form is valid for gap << R;
the variant with cantilever bending solves the static force balance where the
spring deflection feeds back into the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import EPS0
from .errors import DomainError, SnapInError

__all__ = [
    "SpherePlateGeometry",
    "GasProperties",
    "electrostatic_force",
    "electrostatic_force_with_bending",
    "hydrodynamic_force",
    "slip_correction",
    "sigma_sphere",
]


@dataclass(frozen=True)
class SpherePlateGeometry:
    radius_R: float = 100e-6   # m
    gap_d: float = 100e-9      # m

    def __post_init__(self):
        if self.radius_R <= 0:
            raise DomainError("sphere radius must be > 0")
        if self.gap_d <= 0:
            raise DomainError("gap must be > 0")

    @property
    def pfa_valid(self) -> bool:
        """Proximity-force regime check: gap small against the radius."""
        return self.gap_d / self.radius_R < 0.05


@dataclass(frozen=True)
class GasProperties:
    viscosity_eta: float = 1.85e-5   # Pa s, air at 300 K
    pressure_p: float = 1.013e5     # Pa
    slip_length_b: float = 0.0      # m

    def __post_init__(self):
        if self.viscosity_eta < 0 or self.pressure_p < 0 or self.slip_length_b < 0:
            raise DomainError("gas properties must be non-negative")


def electrostatic_force(geom: SpherePlateGeometry, voltage: float, v0: float = 0.0) -> float:
    """Sphere-plate electrostatic force -eps0 pi R (V + V0)^2 / d, always <= 0."""
    if geom.gap_d <= 0:
        raise DomainError("gap must be > 0")
    v = voltage + v0
    return -EPS0 * math.pi * geom.radius_R * v * v / geom.gap_d


def electrostatic_force_with_bending(
    unbent_gap: float, voltage: float, spring_k: float, radius_R: float
) -> float:
    """Electrostatic force when the cantilever deflection closes the gap.

    Solves F = -eps0 pi R V^2 / (D + F/k) for the stable branch, D being the
    gap the surfaces would have with an infinitely stiff spring:

        F = -(1/2) [ k D - sqrt(k^2 D^2 - 4 k eps0 pi R V^2) ]

    Raises SnapInError past the pull-in instability (negative discriminant).
    """
    if unbent_gap <= 0:
        raise DomainError("gap must be > 0")
    if spring_k <= 0:
        raise DomainError("spring constant must be > 0")
    kd = spring_k * unbent_gap
    disc = kd * kd - 4.0 * spring_k * EPS0 * math.pi * radius_R * voltage * voltage
    if disc < -1e-12 * kd * kd:
        raise SnapInError(
            f"pull-in: V={voltage:.3g} V exceeds the stability limit at gap {unbent_gap:.3g} m"
        )
    return -0.5 * (kd - math.sqrt(max(disc, 0.0)))


def slip_correction(gap_d: float, slip_length_b: float) -> float:
    """Slip factor f*(d, b) for equal slip lengths on both surfaces.

    f* = (d / 3b) [ (1 + d/6b) ln(1 + 6b/d) - 1 ];  f*(d, 0) = 1, monotonically
    decreasing in b, ~ (d/3b)(ln(6b/d) - 1) for b >> d.
    """
    if gap_d <= 0:
        raise DomainError("gap must be > 0")
    if slip_length_b < 0:
        raise DomainError("slip length must be >= 0")
    if slip_length_b == 0.0:
        return 1.0
    x = gap_d / (6.0 * slip_length_b)
    if x > 1e4:
        # avoid cancellation in the no-slip limit
        u = 1.0 / x
        return 1.0 - u / 3.0 + u * u / 6.0
    return 2.0 * x * ((1.0 + x) * math.log1p(1.0 / x) - 1.0)


def hydrodynamic_force(geom: SpherePlateGeometry, velocity: float, gas: GasProperties) -> float:
    """Squeeze-film force on the sphere for gap-opening velocity v (m/s).

    F = -(6 pi eta R^2 v / d) f*(d, b): dissipative, opposing the motion, with
    the lubrication slip factor f* softening the 1/d divergence below d ~ b.
    """
    f_star = slip_correction(geom.gap_d, gas.slip_length_b)
    return -6.0 * math.pi * gas.viscosity_eta * geom.radius_R**2 * velocity * f_star / geom.gap_d


def sigma_sphere(gas: GasProperties, omega2: float, geom: SpherePlateGeometry) -> float:
    """Compressibility criterion 4 eta omega R / (p d); << 1 means incompressible film."""
    if geom.gap_d <= 0 or gas.pressure_p <= 0:
        raise DomainError("gap and pressure must be > 0")
    return 4.0 * gas.viscosity_eta * omega2 * geom.radius_R / (gas.pressure_p * geom.gap_d)
