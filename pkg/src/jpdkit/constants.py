"""Physical constants, unit conversions, and thermal photon-number helpers.

Constants are exact SI definition values compiled in as literals so that
every downstream computation is bit-reproducible.

Convention used throughout the library: loss rates and resonance
frequencies are stored in angular units (rad/s); file formats and CLI
flags use linear Hz, converted at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysConstants:
    """SI constants used by the device models."""

    h: float = 6.62607015e-34          # Planck constant, J s
    k_B: float = 1.380649e-23          # Boltzmann constant, J/K
    Phi0: float = 2.067833848e-15      # magnetic flux quantum h/2e, Wb

    @property
    def hbar(self) -> float:
        return self.h / (2.0 * math.pi)

    @property
    def phi0(self) -> float:
        """Reduced flux quantum Phi0 / 2pi, Wb."""
        return self.Phi0 / (2.0 * math.pi)


CONSTANTS = PhysConstants()


def planck_occupation(frequency_hz: float, temperature_k: float) -> float:
    """Mean thermal photon number of a mode at the given frequency and temperature.

    Returns ``1 / (exp(h f / k_B T) - 1)``, and exactly 0 in the
    zero-temperature limit.
    """
    if not (math.isfinite(frequency_hz) and math.isfinite(temperature_k)):
        raise ValueError("frequency and temperature must be finite")
    if frequency_hz <= 0.0:
        raise ValueError(f"frequency must be positive, got {frequency_hz}")
    if temperature_k < 0.0:
        raise ValueError(f"temperature must be >= 0, got {temperature_k}")
    if temperature_k == 0.0:
        return 0.0
    x = CONSTANTS.h * frequency_hz / (CONSTANTS.k_B * temperature_k)
    # expm1 keeps precision for x << 1 (hot/low-frequency modes)
    return 1.0 / math.expm1(x)


def dbm_to_watts(power_dbm: float) -> float:
    """Convert a power on the dBm scale (referenced to 1 mW) to watts."""
    if not math.isfinite(power_dbm):
        raise ValueError(f"power must be finite, got {power_dbm}")
    return 10.0 ** ((power_dbm - 30.0) / 10.0)


def watts_to_dbm(power_w: float) -> float:
    """Inverse of :func:`dbm_to_watts`."""
    if not (math.isfinite(power_w) and power_w > 0.0):
        raise ValueError(f"power must be finite and positive, got {power_w}")
    return 10.0 * math.log10(power_w) + 30.0


def photon_number_from_power(p_in_w: float, params, detuning_hz: float = 0.0) -> float:
    """Average intracavity photon number of a driven single-port resonator.

    Standard driven-cavity steady state,
    ``<n> = kappa_ext P_in / (hbar omega0 ((kappa/2)^2 + Delta^2))``,
    with the detuning supplied in linear Hz and converted to angular
    internally. ``params`` is a :class:`~jpdkit.devices.ResonatorParams`.
    """
    if not math.isfinite(p_in_w) or p_in_w < 0.0:
        raise ValueError(f"input power must be finite and >= 0, got {p_in_w}")
    kappa = params.kappa
    if kappa <= 0.0:
        raise ValueError("total loss rate must be positive")
    delta = 2.0 * math.pi * detuning_hz
    denom = CONSTANTS.hbar * params.omega0 * ((kappa / 2.0) ** 2 + delta**2)
    return params.kappa_ext * p_in_w / denom
