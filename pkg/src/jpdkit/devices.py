"""Forward physics models of the flux-tunable devices.

Covers the flux-dependent resonance frequency of the ring-modulator-coupled
resonator (JPC) and of the SQUID-terminated resonator (JPA), and the ideal
single-port reflection coefficient of a driven dissipative resonator.

Note on the ring-modulator inductance: the validity condition checks the
shunt energy divided by 4 while the inductance formula itself uses the
shunt energy divided by 2. Since E_L/2 > E_L/4, the checked condition also
guarantees a positive denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import CONSTANTS
from .errors import FluxDomainError

_PI = math.pi


@dataclass(frozen=True)
class ResonatorParams:
    """Resonance frequency and loss rates of a single-port resonator.

    All rates in angular units (rad/s). The three quality factors derived
    below satisfy 1/Q_l = 1/Q_ext + 1/Q_int identically.
    """

    omega0: float       # angular resonance frequency
    kappa_ext: float    # external loss rate
    kappa_int: float    # internal loss rate

    def __post_init__(self):
        for name in ("omega0", "kappa_ext", "kappa_int"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.omega0 <= 0.0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.kappa_ext <= 0.0:
            raise ValueError(f"kappa_ext must be positive, got {self.kappa_ext}")
        if self.kappa_int < 0.0:
            raise ValueError(f"kappa_int must be >= 0, got {self.kappa_int}")

    @property
    def kappa(self) -> float:
        return self.kappa_ext + self.kappa_int

    @property
    def q_ext(self) -> float:
        return self.omega0 / self.kappa_ext

    @property
    def q_int(self) -> float:
        return self.omega0 / self.kappa_int if self.kappa_int > 0.0 else math.inf

    @property
    def q_loaded(self) -> float:
        return self.omega0 / self.kappa

    @property
    def f0_hz(self) -> float:
        return self.omega0 / (2.0 * _PI)


@dataclass(frozen=True)
class FluxCalibration:
    """Linear map from a flux-bias control value (e.g. coil current) to flux.

    ``control_offset`` is the control value at zero flux, ``control_period``
    the control change corresponding to one flux quantum.
    """

    control_offset: float
    control_period: float

    def __post_init__(self):
        if not (math.isfinite(self.control_offset) and math.isfinite(self.control_period)):
            raise ValueError("calibration values must be finite")
        if self.control_period == 0.0:
            raise ValueError("control_period must be nonzero")


@dataclass(frozen=True)
class JpcModelParams:
    """Flux-tunability model of the ring-modulator-coupled resonator."""

    omega_r_a: float    # bare resonator angular frequency, rad/s
    z0: float           # characteristic impedance, ohm
    e_j: float          # Josephson energy per junction, J
    e_l: float          # shunt inductive energy phi0^2/L, J
    flux_cal: FluxCalibration = field(default_factory=lambda: FluxCalibration(0.0, 1.0))

    def __post_init__(self):
        for name in ("omega_r_a", "z0", "e_j", "e_l"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and positive, got {v}")

    @property
    def l_half_wave(self) -> float:
        """Lumped equivalent inductance of the half-wave resonator, 2 Z0 / (pi omega_r)."""
        return 2.0 * self.z0 / (_PI * self.omega_r_a)

    @property
    def shunt_inductance(self) -> float:
        """Internal shunt inductance L = phi0^2 / E_L."""
        return CONSTANTS.phi0**2 / self.e_l


@dataclass(frozen=True)
class JpaModelParams:
    """Flux-tunability model of the SQUID-terminated quarter-wave resonator."""

    omega_r: float      # bare resonator angular frequency, rad/s
    l_r: float          # resonator inductance, H
    l_loop: float       # SQUID loop geometric inductance, H
    i_c: float          # single-junction critical current, A
    flux_cal: FluxCalibration = field(default_factory=lambda: FluxCalibration(0.0, 1.0))

    def __post_init__(self):
        for name in ("omega_r", "l_r", "l_loop", "i_c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and positive, got {v}")


def jrm_inductance(phi_ext: float, e_j: float, e_l: float) -> float:
    """Flux-tunable inductance of the shunted Josephson ring modulator.

    ``phi_ext`` is the normalized flux (radians) threading each of the four
    sub-loops. Valid for E_L/4 + E_J cos(phi_ext) > 0; violations raise
    :class:`FluxDomainError` carrying the offending flux.
    """
    c = math.cos(phi_ext)
    if e_l / 4.0 + e_j * c <= 0.0:
        raise FluxDomainError("ring-modulator inductance outside validity domain", phi_ext)
    return CONSTANTS.phi0**2 / (e_l / 2.0 + e_j * c)


def jpc_frequency(phi_ext_wb: float, params: JpcModelParams) -> float:
    """Flux-dependent resonance frequency (rad/s) of the coupled resonator.

    The external flux (Wb) is assumed equally distributed over the four
    ring sub-loops: phi_ext = (1/4)(2 pi Phi_ext / Phi0) per loop.
    """
    phi_ext = 0.25 * (2.0 * _PI * phi_ext_wb / CONSTANTS.Phi0)
    l_a = jrm_inductance(phi_ext, params.e_j, params.e_l)
    half = _PI**2 * params.l_half_wave / 2.0
    return params.omega_r_a * half / (half + l_a)


def squid_inductance(phi_ext_wb: float, i_c: float, cos_guard: float = 1e-6) -> float:
    """Flux-tunable inductance of the dc SQUID, Phi0 / (4 pi I_c |cos(pi Phi/Phi0)|).

    Diverges at half-integer flux quanta; evaluations with
    ``|cos| <= cos_guard`` raise :class:`FluxDomainError`.
    """
    if i_c <= 0.0:
        raise ValueError(f"critical current must be positive, got {i_c}")
    c = abs(math.cos(_PI * phi_ext_wb / CONSTANTS.Phi0))
    if c <= cos_guard:
        raise FluxDomainError("SQUID inductance near half-flux-quantum singularity",
                              phi_ext_wb)
    return CONSTANTS.Phi0 / (4.0 * _PI * i_c * c)


def jpa_frequency(phi_ext_wb: float, params: JpaModelParams, cos_guard: float = 1e-6) -> float:
    """Flux-dependent resonance frequency (rad/s) of the SQUID-terminated resonator."""
    l_s = squid_inductance(phi_ext_wb, params.i_c, cos_guard=cos_guard)
    return params.omega_r / (1.0 + (l_s + params.l_loop / 4.0) / params.l_r)


def ideal_reflection(delta, params: ResonatorParams):
    """Ideal single-port reflection coefficient 1 + kappa_ext / (i Delta - kappa/2).

    ``delta`` is the angular detuning omega - omega0 (rad/s); scalar or
    array. As Delta sweeps the real line the value traces a circle of
    radius kappa_ext/kappa centered at (1 - kappa_ext/kappa, 0).
    """
    delta = np.asarray(delta, dtype=float)
    s = 1.0 + params.kappa_ext / (1j * delta - params.kappa / 2.0)
    return s if s.ndim else complex(s)


def reflection_circle(params: ResonatorParams) -> tuple[complex, float]:
    """Closed-form (center, radius) of the ideal reflection circle."""
    r = params.kappa_ext / params.kappa
    return complex(1.0 - r, 0.0), r


def resonator_rates(q_ext: float, q_int: float, omega0: float) -> ResonatorParams:
    """Build :class:`ResonatorParams` from quality factors.

    ``q_int = math.inf`` is the lossless-internal sentinel (kappa_int = 0).
    """
    if not (omega0 > 0.0 and math.isfinite(omega0)):
        raise ValueError(f"omega0 must be positive and finite, got {omega0}")
    if not q_ext > 0.0 or not math.isfinite(q_ext):
        raise ValueError(f"q_ext must be positive and finite, got {q_ext}")
    if not q_int > 0.0:
        raise ValueError(f"q_int must be positive, got {q_int}")
    kappa_int = 0.0 if math.isinf(q_int) else omega0 / q_int
    return ResonatorParams(omega0=omega0, kappa_ext=omega0 / q_ext, kappa_int=kappa_int)
