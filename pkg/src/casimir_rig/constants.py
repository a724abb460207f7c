"""Physical constants and unit conversions used across the package.

Energies are carried in eV on both the real and imaginary frequency axes;
lengths in SI metres unless a name says otherwise (``*_nm``).  All unit
conversions live here so no other module hard-codes them.
"""

import math

# CODATA 2018
EPS0 = 8.8541878128e-12        # vacuum permittivity, F/m
HBAR = 1.054571817e-34         # reduced Planck constant, J s
KB = 1.380649e-23              # Boltzmann constant, J/K
C_LIGHT = 299792458.0          # speed of light, m/s
EV = 1.602176634e-19           # J per eV

HBAR_C_EV_NM = HBAR * C_LIGHT / EV * 1e9   # = 197.327 eV nm
KT_EV_AT_300K = KB * 300.0 / EV            # = 25.85 meV

# first Matsubara energy per kelvin: xi_1 = 2 pi kB T / hbar, in eV
XI1_EV_PER_K = 2.0 * math.pi * KB / EV


def kt_ev(temperature_k):
    """Thermal energy k_B T in eV."""
    return KB * temperature_k / EV


def ideal_conductor_pressure(d_m):
    """Zero-temperature perfect-mirror pressure magnitude pi^2 hbar c / (240 d^4), Pa."""
    return math.pi**2 * HBAR * C_LIGHT / (240.0 * d_m**4)
