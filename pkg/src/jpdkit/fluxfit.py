"""Fits of resonance-frequency-vs-flux-control maps.

Extracts junction critical currents, Josephson energies, and inductances by
fitting measured flux maps to the device models. The flux calibration
(control offset and control change per flux quantum) is always co-fitted,
since raw maps are recorded against a coil control value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .devices import (FluxCalibration, JpaModelParams, JpcModelParams,
                      jpa_frequency, jpc_frequency)
from .errors import FluxDomainError
from .optimize import Bounds, FitResult, least_squares

_PI = math.pi
_TWO_PI = 2.0 * math.pi

# residual value assigned to points that wander into a model validity
# violation during optimization; steers the search back without aborting
_PENALTY_HZ = 1e12


@dataclass(frozen=True)
class FluxMapPoint:
    """One row of a flux map: control value, fitted resonance frequency, error."""

    control: float
    f0: float               # Hz
    f0_err: float | None = None

    def __post_init__(self):
        if not self.f0 > 0.0:
            raise ValueError(f"f0 must be positive, got {self.f0}")
        if self.f0_err is not None and not self.f0_err > 0.0:
            raise ValueError(f"f0_err must be positive, got {self.f0_err}")


@dataclass(frozen=True)
class JunctionDerived:
    """Quantities derived from a junction critical current."""

    i_c: float     # A
    e_j: float     # J
    l_j0: float    # zero-flux Josephson inductance, H


def junction_derived(i_c: float) -> JunctionDerived:
    """Josephson energy E_J = phi0 I_c and zero-flux inductance L_J0 = phi0 / I_c."""
    if not i_c > 0.0:
        raise ValueError(f"critical current must be positive, got {i_c}")
    phi0 = CONSTANTS.phi0
    return JunctionDerived(i_c=i_c, e_j=phi0 * i_c, l_j0=phi0 / i_c)


def flux_from_control(control: float, cal: FluxCalibration) -> float:
    """External flux (Wb) from a control value via the linear calibration."""
    return (control - cal.control_offset) / cal.control_period * CONSTANTS.Phi0


def _unpack(points):
    controls = np.array([p.control for p in points], dtype=float)
    f0 = np.array([p.f0 for p in points], dtype=float)
    errs = np.array([p.f0_err if p.f0_err is not None else np.nan for p in points])
    sigma = np.where(np.isfinite(errs), errs, 1.0)
    return controls, f0, sigma


def _check_span(controls, period, half_period_quanta, device):
    span_quanta = np.ptp(controls) / abs(period)
    if span_quanta < half_period_quanta:
        raise ValueError(
            f"{device} flux map spans {span_quanta:.2f} flux quanta of control, "
            f"need at least {half_period_quanta} (half a flux period)")


def _exclude_singular(points, cal, predicate, device):
    kept, dropped = [], []
    for p in points:
        if predicate(flux_from_control(p.control, cal)):
            kept.append(p)
        else:
            dropped.append(p)
    if dropped:
        warnings.warn(
            f"excluded {len(dropped)} {device} flux-map point(s) inside the "
            "model validity guard", RuntimeWarning, stacklevel=3)
    return kept


def _scaled_least_squares(residuals, p0, lower, upper, f_tol=1e-8, **kwargs):
    """Run the box-bounded fit on parameters rescaled to O(1).

    The objective tolerance defaults to a noise-appropriate 1e-8 here:
    flux maps carry measurement noise, and grinding a nearly-degenerate
    direction down to the exact-arithmetic default wastes iterations.
    """
    p0 = np.asarray(p0, dtype=float)
    scale = np.where(np.abs(p0) > 0, np.abs(p0), 1.0)
    bounds = Bounds(np.asarray(lower) / scale, np.asarray(upper) / scale)
    result = least_squares(lambda q: residuals(q * scale), p0 / scale,
                           bounds=bounds, f_tol=f_tol, **kwargs)
    result.params = result.params * scale
    if result.covariance is not None:
        result.covariance = result.covariance * np.outer(scale, scale)
    return result


def fit_jpa_flux(points, init: JpaModelParams,
                 cos_guard: float = 1e-6) -> tuple[JpaModelParams, FitResult]:
    """Fit a SQUID-resonator flux map over {omega_r, I_c, flux offset, flux period}.

    ``l_r`` and ``l_loop`` are taken from ``init`` and held fixed. Points
    inside the half-flux-quantum singularity guard (under the initial
    calibration) are excluded with a warning. Seeds: the bare frequency
    and critical current come from a closed-form two-point inversion of
    the frequency model at the map maximum and a quarter-period point; the
    flux offset seeds at the control value of the maximum.
    """
    if len(points) < 6:
        raise ValueError(f"need at least 6 flux-map points, got {len(points)}")
    _check_span([p.control for p in points], init.flux_cal.control_period, 0.5, "JPA")

    points = _exclude_singular(
        points, init.flux_cal,
        lambda phi: abs(math.cos(_PI * phi / CONSTANTS.Phi0)) > cos_guard, "JPA")
    if len(points) < 6:
        raise ValueError("fewer than 6 points remain after singularity exclusion")
    controls, f0, sigma = _unpack(points)

    period0 = init.flux_cal.control_period
    offset0 = float(controls[np.argmax(f0)])
    omega_r0, i_c0 = _seed_jpa(controls, f0, offset0, period0, init)

    l_r, l_loop = init.l_r, init.l_loop

    def residuals(p):
        omega_r, i_c, offset, period = p
        cal = FluxCalibration(offset, period)
        out = np.empty(len(controls))
        params = JpaModelParams(omega_r=omega_r, l_r=l_r, l_loop=l_loop, i_c=i_c,
                                flux_cal=cal)
        for k, c in enumerate(controls):
            try:
                model = jpa_frequency(flux_from_control(c, cal), params,
                                      cos_guard=cos_guard) / _TWO_PI
            except FluxDomainError:
                model = f0[k] + _PENALTY_HZ
            out[k] = (model - f0[k]) / sigma[k]
        return out

    p0 = [omega_r0, i_c0, offset0, period0]
    lower = [_TWO_PI * np.max(f0), i_c0 / 50.0,
             offset0 - abs(period0), min(period0 / 2.0, period0 * 2.0)]
    upper = [3.0 * omega_r0, i_c0 * 50.0,
             offset0 + abs(period0), max(period0 / 2.0, period0 * 2.0)]
    result = _scaled_least_squares(residuals, p0, lower, upper)

    omega_r, i_c, offset, period = result.params
    fitted = JpaModelParams(omega_r=float(omega_r), l_r=l_r, l_loop=l_loop,
                            i_c=float(i_c),
                            flux_cal=FluxCalibration(float(offset), float(period)))
    return fitted, result


def _seed_jpa(controls, f0, offset0, period0, init):
    """Closed-form (omega_r, I_c) seed from two flux points of the model.

    With L_S(Phi) = L_S0 / |cos(pi Phi/Phi0)| the model at two fluxes gives
    two linear equations in (omega_r, L_S0).
    """
    w_a = _TWO_PI * float(np.max(f0))
    phi_frac = (controls - offset0) / period0
    target = np.abs(np.abs(phi_frac) - 0.25)
    k = int(np.argmin(target))
    c_b = abs(math.cos(_PI * phi_frac[k]))
    w_b = _TWO_PI * f0[k]
    l4 = init.l_loop / 4.0
    if c_b > 0.999 or c_b < 1e-3 or w_b >= w_a:
        return 1.01 * w_a, init.i_c
    denom = 1.0 - (w_a / w_b - 1.0) / (1.0 / c_b - 1.0)
    if denom <= 0.0:
        return 1.01 * w_a, init.i_c
    omega_r = w_a * (1.0 + l4 / init.l_r) / denom
    l_s0 = omega_r * init.l_r * (1.0 / w_b - 1.0 / w_a) / (1.0 / c_b - 1.0)
    if l_s0 <= 0.0:
        return 1.01 * w_a, init.i_c
    return omega_r, CONSTANTS.Phi0 / (4.0 * _PI * l_s0)


def fit_jpc_flux(points, init: JpcModelParams) -> tuple[JpcModelParams, FitResult]:
    """Fit a ring-modulator flux map over {omega_r, E_J, E_L, flux offset, period}.

    ``z0`` is taken from ``init`` and held fixed. Points violating the
    ring-modulator validity condition under the initial calibration are
    excluded with a warning; violations during the search are penalized.
    The flux period of the model is four flux quanta (the external flux
    divides over the four ring sub-loops), so the map must span at least
    two flux quanta of control.
    """
    if len(points) < 6:
        raise ValueError(f"need at least 6 flux-map points, got {len(points)}")
    _check_span([p.control for p in points], init.flux_cal.control_period, 2.0, "JPC")

    def valid(phi_wb):
        phi_ext = 0.25 * (_TWO_PI * phi_wb / CONSTANTS.Phi0)
        return init.e_l / 4.0 + init.e_j * math.cos(phi_ext) > 0.0

    points = _exclude_singular(points, init.flux_cal, valid, "JPC")
    if len(points) < 6:
        raise ValueError("fewer than 6 points remain after validity exclusion")
    controls, f0, sigma = _unpack(points)

    offset0 = float(controls[np.argmax(f0)])
    period0 = init.flux_cal.control_period
    z0 = init.z0

    def residuals(p):
        omega_r, e_j, e_l, offset, period = p
        cal = FluxCalibration(offset, period)
        params = JpcModelParams(omega_r_a=omega_r, z0=z0, e_j=e_j, e_l=e_l,
                                flux_cal=cal)
        out = np.empty(len(controls))
        for k, c in enumerate(controls):
            try:
                model = jpc_frequency(flux_from_control(c, cal), params) / _TWO_PI
            except FluxDomainError:
                model = f0[k] + _PENALTY_HZ
            out[k] = (model - f0[k]) / sigma[k]
        return out

    p0 = [init.omega_r_a, init.e_j, init.e_l, offset0, period0]
    lower = [_TWO_PI * np.max(f0), init.e_j / 100.0, init.e_l / 100.0,
             offset0 - abs(period0), min(period0 / 2.0, period0 * 2.0)]
    upper = [10.0 * init.omega_r_a, init.e_j * 100.0, init.e_l * 100.0,
             offset0 + abs(period0), max(period0 / 2.0, period0 * 2.0)]
    result = _scaled_least_squares(residuals, p0, lower, upper)

    omega_r, e_j, e_l, offset, period = result.params
    fitted = JpcModelParams(omega_r_a=float(omega_r), z0=z0, e_j=float(e_j),
                            e_l=float(e_l),
                            flux_cal=FluxCalibration(float(offset), float(period)))
    return fitted, result


def jpa_tunability(params: JpaModelParams, flux_range=(-0.45, 0.45),
                   n: int = 1001) -> float:
    """Max minus min of the model frequency (Hz) over a flux range in quanta."""
    fracs = np.linspace(flux_range[0], flux_range[1], n)
    freqs = [jpa_frequency(frac * CONSTANTS.Phi0, params) / _TWO_PI for frac in fracs]
    return float(np.max(freqs) - np.min(freqs))


def jpc_tunability(params: JpcModelParams, flux_range=(-0.5, 0.5),
                   n: int = 1001) -> float:
    """Max minus min of the model frequency (Hz) over a flux range in quanta."""
    freqs = []
    for frac in np.linspace(flux_range[0], flux_range[1], n):
        try:
            freqs.append(jpc_frequency(frac * CONSTANTS.Phi0, params) / _TWO_PI)
        except FluxDomainError:
            continue
    if not freqs:
        raise FluxDomainError("no valid flux points in range", flux_range)
    return float(np.max(freqs) - np.min(freqs))
