"""Inverse pipeline: resonator parameters from a distorted reflection trace.

The correction chain mirrors standard measurement practice for single-port
resonance circles:

1. estimate the cable delay from a linear fit to the unwrapped phase,
2. refine it by minimizing the algebraic circle-fit residual over the
   delay alone,
3. either divide out a separately acquired background trace or rescale by
   the off-resonant point and rotate the circle center onto the real axis,
4. shift the corrected circle to the origin and fit the phase-vs-detuning
   arctangent model for the total loss rate and resonance frequency,
5. fit the external loss rate against the ideal reflection model (with an
   optional box constraint on the implied internal loss, for strongly
   overcoupled devices).

All stages are deterministic, so identical traces produce bit-identical
reports.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .devices import ResonatorParams, ideal_reflection
from .errors import FitError, PipelineStageError, SpanError
from .optimize import Bounds, least_squares, minimize_simplex
from .simulate import ComplexTrace

_PI = math.pi

# Q_int/Q_loaded above this is flagged: the trace shape barely constrains
# the internal loss and the unconstrained estimate is ill-conditioned.
QINT_CONDITION_THRESHOLD = 100.0


@dataclass(frozen=True)
class CircleGeom:
    """Algebraic circle: center, radius, and RMS radial residual of the fit."""

    center: complex
    radius: float
    rms_residual: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.rms_residual < 0.0:
            raise ValueError("rms_residual must be >= 0")


@dataclass(frozen=True)
class ReflectionFitReport:
    """Full result of the reflection-fit pipeline with per-stage diagnostics."""

    resonator: ResonatorParams
    delay: float                 # s
    circle: CircleGeom           # geometry of the corrected (normalized) circle
    theta0: float                # residual phase offset from the phase fit, rad
    method: str                  # "off-resonant-normalize" | "background-divide"
    quality: dict = field(default_factory=dict)
    s21mc: ComplexTrace | None = None   # corrected trace the final fit ran on
    model: np.ndarray | None = None     # ideal-model samples at the fitted parameters


def fit_circle(points) -> CircleGeom:
    """Least-squares algebraic circle through complex points (Kasa method).

    Solves the linear system for x^2 + y^2 + D x + E y + F = 0 on
    centroid-shifted coordinates; exact for points lying exactly on a
    circle. Collinear or degenerate input is rejected.
    """
    z = np.asarray(points, dtype=complex)
    if len(z) < 3:
        raise ValueError(f"circle fit needs at least 3 points, got {len(z)}")
    x = z.real - z.real.mean()
    y = z.imag - z.imag.mean()
    a = np.column_stack([x, y, np.ones(len(z))])
    b = -(x**2 + y**2)
    coef, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < 3:
        raise ValueError("degenerate circle fit: points are collinear or coincident")
    d, e, f = coef
    r_sq = d**2 / 4.0 + e**2 / 4.0 - f
    if not r_sq > 0.0:
        raise ValueError("degenerate circle fit: non-positive radius")
    center = complex(-d / 2.0 + z.real.mean(), -e / 2.0 + z.imag.mean())
    radius = math.sqrt(r_sq)
    rms = math.sqrt(float(np.mean((np.abs(z - center) - radius) ** 2)))
    return CircleGeom(center=center, radius=radius, rms_residual=rms)


def estimate_delay(trace: ComplexTrace) -> float:
    """Cable delay from a linear fit to the unwrapped phase vs frequency.

    On traces containing a resonance this estimate carries a bias of the
    order 1/span (the resonance itself winds the phase); it serves as the
    seed for :func:`refine_delay`. Constant-phase traces return 0 with a
    warning.
    """
    if len(trace) < 8:
        raise ValueError(f"delay estimate needs at least 8 points, got {len(trace)}")
    phase = np.unwrap(np.angle(trace.samples))
    if np.ptp(phase) < 1e-12:
        warnings.warn("constant-phase trace: delay estimate degenerate, returning 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    slope = np.polyfit(trace.frequencies, phase, 1)[0]
    return float(-slope / (2.0 * _PI))


def correct_delay(trace: ComplexTrace, tau: float) -> ComplexTrace:
    """Undo a cable delay: multiply samples by exp(+2 pi i f tau)."""
    return trace.replace_samples(
        trace.samples * np.exp(2j * _PI * trace.frequencies * tau))


def _delay_objective(trace: ComplexTrace):
    f = trace.frequencies
    s = trace.samples

    def objective(tau_vec):
        corrected = s * np.exp(2j * _PI * f * tau_vec[0])
        try:
            return fit_circle(corrected).rms_residual
        except ValueError:
            return float(np.ptp(np.abs(corrected))) + 1.0
    return objective


def refine_delay(trace: ComplexTrace, tau0: float) -> float:
    """Delay minimizing the circle-fit residual of the delay-corrected trace.

    A coarse deterministic scan over a window of a few 1/span around the
    seed guards against the winding ambiguity of the linear-fit seed, then
    a simplex polish localizes the minimum. The residual at the returned
    delay never exceeds the residual at ``tau0``.
    """
    objective = _delay_objective(trace)
    span = float(trace.frequencies[-1] - trace.frequencies[0])
    window = 3.0 / span
    scan = tau0 + np.linspace(-window, window, 61)
    values = [objective([t]) for t in scan]
    best = int(np.argmin(values))
    seed = float(scan[best])

    step = scan[1] - scan[0]
    result = minimize_simplex(objective, [seed], x_tol=1e-12, f_tol=1e-15,
                              max_iter=400, initial_step=step / 4.0)
    if not result.converged:
        raise FitError(f"delay refinement did not converge (iterations={result.iterations})")
    tau = float(result.params[0])

    # parabolic vertex through three points straddling the simplex result:
    # the simplex alone can stall ~1e-14 s off the minimum (its objective
    # basin flattens below floating-point resolution), which leaves enough
    # residual phase tilt across the span to bias the later phase fit
    h = 1e-6 / span
    f_mid, f_lo, f_hi = objective([tau]), objective([tau - h]), objective([tau + h])
    curvature = f_lo - 2.0 * f_mid + f_hi
    if curvature > 0.0:
        vertex = tau + 0.5 * h * (f_lo - f_hi) / curvature
        if objective([vertex]) <= f_mid:
            tau = float(vertex)

    return tau if objective([tau]) <= objective([tau0]) else tau0


def background_divide(trace: ComplexTrace, background: ComplexTrace) -> ComplexTrace:
    """Elementwise complex division of the trace by a background trace.

    The background is interpolated onto the trace grid when the grids
    differ; trace frequencies outside the background range, or background
    samples with magnitude below 1e-6, are rejected.
    """
    fb = background.frequencies
    if len(fb) == len(trace) and np.array_equal(fb, trace.frequencies):
        bg = background.samples
    else:
        f = trace.frequencies
        if f[0] < fb[0] or f[-1] > fb[-1]:
            raise ValueError("trace grid extends beyond the background grid; "
                             "cannot interpolate")
        bg = np.interp(f, fb, background.samples.real) \
            + 1j * np.interp(f, fb, background.samples.imag)
    if np.any(np.abs(bg) <= 1e-6):
        raise ValueError("background samples too close to zero for division")
    return trace.replace_samples(trace.samples / bg)


def _edge_means(trace: ComplexTrace, edge_fraction: float):
    k = max(1, int(round(edge_fraction * len(trace))))
    left = complex(np.mean(trace.samples[:k]))
    right = complex(np.mean(trace.samples[-k:]))
    return left, right


def offres_span_ratio(trace: ComplexTrace, circle: CircleGeom,
                      edge_fraction: float = 0.05) -> float:
    """Estimated span/kappa from the gap between the two edge-point clusters.

    For the ideal reflection the edge clusters sit 2 kappa_ext/span on
    either side of the off-resonant point while the circle diameter is
    2 kappa_ext/kappa, so span/kappa ~ 4 radius / gap.
    """
    left, right = _edge_means(trace, edge_fraction)
    gap = abs(left - right)
    if gap == 0.0:
        return math.inf
    return 4.0 * circle.radius / gap


def normalize_offres(trace: ComplexTrace, tau: float, circle: CircleGeom,
                     edge_fraction: float = 0.05) -> ComplexTrace:
    """Rescale and rotate a delay-corrected trace onto the ideal frame.

    The off-resonant reference point is the mean of the outermost
    ``edge_fraction`` of points on each edge of the grid, projected onto
    the fitted circle (the raw edge mean sits slightly inside the circle,
    by ~radius * angle^2/2; the projection removes that radial bias). The
    trace is divided by the reference so the off-resonant point maps to
    1 + 0i, then rotated about that point until the circle center lies on
    the real axis, left of the off-resonant point.

    ``tau`` is recorded in the output metadata; the input trace itself
    must already be delay-corrected.
    """
    ratio = offres_span_ratio(trace, circle, edge_fraction)
    if ratio < 5.0:
        raise SpanError(
            f"off-resonant point indeterminate: span is only ~{ratio:.2f} "
            "linewidths (need >= 5)")

    left, right = _edge_means(trace, edge_fraction)
    edge_mean = 0.5 * (left + right)
    direction = edge_mean - circle.center
    if abs(direction) < 1e-12 * circle.radius:
        raise ValueError("edge mean coincides with circle center; "
                         "off-resonant direction undefined")
    reference = circle.center + circle.radius * direction / abs(direction)

    scaled = trace.samples / reference
    center_scaled = circle.center / reference
    # rotate about (1, 0) so the center sits on the real axis at angle pi
    beta = np.angle(center_scaled - 1.0) - _PI
    out = 1.0 + (scaled - 1.0) * np.exp(-1j * beta)
    return trace.replace_samples(out, delay_s=tau)


def phase_angle(delta, kappa: float, theta0: float = 0.0):
    """Phase-vs-detuning model theta0 + 2 arctan(-2 Delta / kappa)."""
    return theta0 + 2.0 * np.arctan(-2.0 * np.asarray(delta, dtype=float) / kappa)


def fit_phase(centered: ComplexTrace) -> tuple[float, float, float]:
    """Fit the arctangent phase model to an origin-centered trace.

    Returns ``(kappa, omega0, theta0)`` in angular units. The winding
    direction of the data is detected and the model's detuning sign set to
    match: the reflection geometry winds the centered phase *upward* with
    detuning, opposite to the sign convention of the transmission-notch
    form of the model (see :func:`phase_angle`). Fails when the phase winds
    by less than pi across the span.
    """
    omega = centered.omega
    theta = np.unwrap(np.angle(centered.samples))
    winding = theta[-1] - theta[0]
    if abs(winding) < _PI:
        raise SpanError(
            f"insufficient span for phase fit: total winding {abs(winding):.3f} rad < pi")
    sign = 1.0 if winding > 0 else -1.0

    theta_mid = 0.5 * (theta[0] + theta[-1])

    def crossing(level):
        idx = int(np.argmin(np.abs(theta - level)))
        if 0 < idx < len(theta) - 1:
            i0, i1 = (idx - 1, idx) if (theta[idx] - level) * (theta[idx - 1] - level) < 0 \
                else (idx, min(idx + 1, len(theta) - 1))
            t0, t1 = theta[i0], theta[i1]
            if t1 != t0:
                frac = (level - t0) / (t1 - t0)
                return float(omega[i0] + frac * (omega[i1] - omega[i0]))
        return float(omega[idx])

    omega0_guess = crossing(theta_mid)
    w_lo = crossing(theta_mid - sign * _PI / 2.0)
    w_hi = crossing(theta_mid + sign * _PI / 2.0)
    kappa_guess = abs(w_hi - w_lo)
    if kappa_guess <= 0.0:
        kappa_guess = 0.1 * (omega[-1] - omega[0])

    def residuals(p):
        kappa, omega0, theta0 = p
        model = theta0 + 2.0 * sign * np.arctan(2.0 * (omega - omega0) / kappa)
        return model - theta

    p0 = np.array([kappa_guess, omega0_guess, theta_mid])
    bounds = Bounds([1e-6 * kappa_guess, omega[0] - (omega[-1] - omega[0]), -np.inf],
                    [np.inf, omega[-1] + (omega[-1] - omega[0]), np.inf])
    result = least_squares(residuals, p0, bounds=bounds)
    if not result.converged:
        raise FitError("phase fit did not converge")
    kappa, omega0, theta0 = result.params
    return float(kappa), float(omega0), float(theta0)


def qint_inv_to_kappa_ext_bounds(kappa: float, omega0: float,
                                 qint_inv_interval) -> tuple[float, float]:
    """Translate an interval on 1/Q_l - 1/Q_ext (= 1/Q_int) to kappa_ext bounds."""
    lo, hi = qint_inv_interval
    if not 0.0 <= lo <= hi:
        raise ValueError(f"invalid internal-loss interval [{lo}, {hi}]")
    return kappa - hi * omega0, kappa - lo * omega0


def extract_kappa_ext(s21mc: ComplexTrace, kappa: float, omega0: float,
                      constraint: Bounds | None = None,
                      float_pole: bool = False) -> ResonatorParams:
    """Fit the external loss rate of the ideal reflection model to a corrected trace.

    ``kappa`` and ``omega0`` come from the phase fit and are held fixed
    (unless ``float_pole``, which lets both vary within +-1% to absorb
    phase-fit bias). ``constraint``, when given, is a box on the implied
    inverse internal quality factor 1/Q_l - 1/Q_ext, translated to bounds
    on kappa_ext. Without it, kappa_ext is bounded to (0, kappa] so the
    internal loss stays non-negative.
    """
    omega = s21mc.omega

    if constraint is not None:
        lo, hi = qint_inv_to_kappa_ext_bounds(kappa, omega0,
                                              (float(constraint.lower[0]),
                                               float(constraint.upper[0])))
        ke_lo, ke_hi = max(lo, 1e-9 * kappa), min(hi, kappa)
        if ke_lo > ke_hi:
            raise ValueError("internal-loss constraint incompatible with fitted kappa")
    else:
        ke_lo, ke_hi = 1e-9 * kappa, kappa

    try:
        radius = fit_circle(s21mc.samples).radius
    except ValueError:
        radius = 0.5
    ke_seed = min(max(radius * kappa, ke_lo), ke_hi)

    if float_pole:
        def residuals(p):
            ke, w0, kap = p
            model = 1.0 + ke / (1j * (omega - w0) - kap / 2.0)
            diff = model - s21mc.samples
            return np.concatenate([diff.real, diff.imag])

        p0 = np.array([ke_seed, omega0, kappa])
        bounds = Bounds([ke_lo, 0.99 * omega0, 0.99 * kappa],
                        [ke_hi, 1.01 * omega0, 1.01 * kappa])
    else:
        def residuals(p):
            model = 1.0 + p[0] / (1j * (omega - omega0) - kappa / 2.0)
            diff = model - s21mc.samples
            return np.concatenate([diff.real, diff.imag])

        p0 = np.array([ke_seed])
        bounds = Bounds([ke_lo], [ke_hi])

    result = least_squares(residuals, p0, bounds=bounds)
    if not result.converged:
        raise FitError("kappa_ext fit did not converge")

    if float_pole:
        kappa_ext, omega0, kappa = (float(v) for v in result.params)
    else:
        kappa_ext = float(result.params[0])

    if constraint is None and kappa_ext >= kappa * (1.0 - 1e-12):
        warnings.warn(
            "kappa_ext fit pinned at kappa_ext = kappa: the unconstrained optimum "
            "is unphysical (kappa_ext > kappa); internal loss reported as 0",
            RuntimeWarning, stacklevel=2)
        kappa_ext = kappa

    return ResonatorParams(omega0=omega0, kappa_ext=kappa_ext,
                           kappa_int=max(kappa - kappa_ext, 0.0))


def _stage(name, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def fit_reflection(trace: ComplexTrace, background: ComplexTrace | None = None,
                   method: str | None = None,
                   qint_inv_bounds: tuple[float, float] | None = None,
                   float_pole: bool = False,
                   edge_fraction: float = 0.05) -> ReflectionFitReport:
    """Run the full correction-and-fit pipeline on a measured trace.

    ``method`` defaults to "background-divide" when a background trace is
    supplied and "off-resonant-normalize" otherwise. In the
    background-divide path the off-resonant normalization still runs after
    the division, absorbing residual tilt and scale the background cannot
    cancel. ``qint_inv_bounds`` is the optional (lo, hi) interval on
    1/Q_l - 1/Q_ext for constrained overcoupled fits.

    Any stage failure is re-raised as :class:`PipelineStageError` naming
    the stage.
    """
    if method is None:
        method = "background-divide" if background is not None else "off-resonant-normalize"
    if method not in ("off-resonant-normalize", "background-divide"):
        raise ValueError(f"unknown method {method!r}")
    if method == "background-divide" and background is None:
        raise ValueError("background-divide requires a background trace")

    quality: dict = {}
    working = trace
    if method == "background-divide":
        working = _stage("background-divide", background_divide, trace, background)

    tau0 = _stage("estimate-delay", estimate_delay, working)
    tau = _stage("refine-delay", refine_delay, working, tau0)
    corrected = correct_delay(working, tau)
    quality["delay_estimate_s"] = tau0

    raw_circle = _stage("circle-fit", fit_circle, corrected.samples)
    quality["delay_circle_rms"] = raw_circle.rms_residual
    quality["offres_span_over_kappa"] = offres_span_ratio(corrected, raw_circle,
                                                          edge_fraction)

    s21mc = _stage("normalize", normalize_offres, corrected, tau, raw_circle,
                   edge_fraction)
    norm_circle = _stage("circle-fit", fit_circle, s21mc.samples)
    quality["normalized_circle_rms"] = norm_circle.rms_residual

    s21c = s21mc.replace_samples(s21mc.samples - norm_circle.center)
    kappa, omega0, theta0 = _stage("phase-fit", fit_phase, s21c)

    constraint = None
    if qint_inv_bounds is not None:
        constraint = Bounds([qint_inv_bounds[0]], [qint_inv_bounds[1]])
    resonator = _stage("kappa-ext", extract_kappa_ext, s21mc, kappa, omega0,
                       constraint, float_pole)

    model = ideal_reflection(s21mc.omega - resonator.omega0, resonator)
    quality["phase_fit_rms_rad"] = float(np.sqrt(np.mean(
        (np.unwrap(np.angle(s21c.samples))
         - np.unwrap(np.angle(model - norm_circle.center))) ** 2)))
    quality["kappa_ext_fit_rms"] = float(np.sqrt(np.mean(np.abs(
        model - s21mc.samples) ** 2)))
    condition = resonator.q_int / resonator.q_loaded
    quality["qint_condition_number"] = condition
    quality["qint_ill_conditioned"] = bool(condition > QINT_CONDITION_THRESHOLD)
    quality["constrained"] = qint_inv_bounds is not None

    return ReflectionFitReport(resonator=resonator, delay=tau, circle=norm_circle,
                               theta0=theta0, method=method, quality=quality,
                               s21mc=s21mc, model=model)
