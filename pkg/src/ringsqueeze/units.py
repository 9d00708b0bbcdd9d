"""Unit system used throughout the package.

Lengths in micrometers, time in picoseconds, energy in picojoules and
power in milliwatts (1 mW = 1 pJ/ps, so power values need no conversion
factor).  Frequencies are angular (rad/ps) unless a name says otherwise;
wavevectors are rad/um.
"""

# Reduced Planck constant [pJ ps]
HBAR = 1.054571817e-10

# Vacuum speed of light [um/ps]
C_LIGHT = 299.792458


def mhz_from_radps(omega: float) -> float:
    """Convert an angular rate in rad/ps to an ordinary frequency in MHz."""
    return omega / (2.0 * 3.141592653589793) * 1.0e6


def nonlinear_param_internal(gamma_per_mw_m: float) -> float:
    """Convert a nonlinear parameter quoted per (mW m) to per (mW um).

    Config files quote gamma_nl in the customary inverse mW (per meter of
    propagation); internally every length is in micrometers.
    """
    return gamma_per_mw_m * 1.0e-6
