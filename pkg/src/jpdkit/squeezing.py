"""Squeezed-vacuum generation model and fit.

Degenerate parametric resonator coupled to two thermal baths (external line
and internal loss), with a gain-dependent pump-noise photon number split
evenly between the quadratures. Vacuum quadrature variance is 0.25
throughout; squeezing S and antisqueezing A are in dB relative to vacuum,
purity mu = 1 / (4 sqrt(sigma_s^2 sigma_as^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import dbm_to_watts, planck_occupation
from .errors import ThresholdError
from .optimize import Bounds, FitResult, least_squares

_TWO_PI = 2.0 * math.pi

VACUUM_VARIANCE = 0.25

#: default weight on purity residuals in the joint fit; puts
#: percentage-point purity errors on the numeric scale of dB errors
PURITY_RESIDUAL_WEIGHT = 100.0

TEMPERATURE_BOUNDS_K = (0.010, 0.050)


@dataclass(frozen=True)
class SqueezingParams:
    """Parameter set of the squeezing model.

    Rates in angular units (rad/s). ``chi2`` is the nonlinear
    susceptibility (pump strength chi = pump amplitude * chi2);
    ``pump_coupling`` converts the square root of pump power in watts to
    the dimensionless pump amplitude.
    """

    omega_jpa: float
    kappa_ext: float
    kappa_int: float
    chi2: float
    nj_prefactor: float
    delta_exp: float
    t_att: float
    t_mxc: float
    pump_coupling: float = 1.0

    def __post_init__(self):
        for name in ("omega_jpa", "kappa_ext", "chi2", "pump_coupling"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("kappa_int", "nj_prefactor", "delta_exp", "t_att", "t_mxc"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def kappa(self) -> float:
        return self.kappa_ext + self.kappa_int

    @property
    def q_int(self) -> float:
        return self.omega_jpa / self.kappa_int if self.kappa_int > 0.0 else math.inf

    @property
    def q_ext(self) -> float:
        return self.omega_jpa / self.kappa_ext


@dataclass(frozen=True)
class SqueezedStateMetrics:
    """Squeezing level, antisqueezing level, purity, and the variances behind them."""

    s_db: float
    a_db: float
    mu: float
    sigma_s2: float
    sigma_as2: float


def _check_chi(chi: float, kappa: float):
    if chi < 0.0:
        raise ValueError(f"chi must be >= 0, got {chi}")
    if 2.0 * chi >= kappa:
        raise ThresholdError(
            f"pump strength at/beyond parametric threshold: 2 chi = {2 * chi:.6g} "
            f">= kappa = {kappa:.6g}")


def output_variances(chi: float, p: SqueezingParams) -> tuple[float, float]:
    """Output quadrature variances (squeezed, antisqueezed) below threshold.

    Both bath inputs are thermal; at chi = 0 and zero temperatures both
    variances equal the vacuum value 0.25.
    """
    _check_chi(chi, p.kappa)
    ke, ki, k = p.kappa_ext, p.kappa_int, p.kappa
    f_hz = p.omega_jpa / _TWO_PI
    v_b = (1.0 + 2.0 * planck_occupation(f_hz, p.t_att)) / 4.0
    v_c = (1.0 + 2.0 * planck_occupation(f_hz, p.t_mxc)) / 4.0
    p2 = ((2.0 * chi - ke + ki) ** 2 * v_b + 4.0 * ke * ki * v_c) / (2.0 * chi + k) ** 2
    q2 = ((2.0 * chi + ke - ki) ** 2 * v_b + 4.0 * ke * ki * v_c) / (2.0 * chi - k) ** 2
    return p2, q2


def gain_from_chi(chi: float, kappa: float) -> float:
    """Degenerate gain, ((2 chi + kappa)/(kappa - 2 chi))^2; 1 at zero pump."""
    _check_chi(chi, kappa)
    return ((2.0 * chi + kappa) / (kappa - 2.0 * chi)) ** 2


def pump_noise(gain: float, p: SqueezingParams) -> float:
    """Gain-dependent pump-noise photon number n_J' (G - 1)^delta."""
    if gain < 1.0:
        raise ValueError(f"gain must be >= 1, got {gain}")
    if gain == 1.0:
        return 0.0
    return p.nj_prefactor * (gain - 1.0) ** p.delta_exp


def metrics(sigma_s2: float, sigma_as2: float) -> SqueezedStateMetrics:
    """Squeezing/antisqueezing levels (dB) and purity from the two variances.

    Variance pairs below the Heisenberg bound (product < 1/16, beyond a
    1e-12 numerical allowance) are rejected.
    """
    if not (sigma_s2 > 0.0 and sigma_as2 > 0.0):
        raise ValueError("variances must be positive")
    product = sigma_s2 * sigma_as2
    if product < 1.0 / 16.0 - 1e-12:
        raise ValueError(
            f"variance product {product:.6g} violates the Heisenberg bound 1/16")
    s_db = -10.0 * math.log10(sigma_s2 / VACUUM_VARIANCE)
    a_db = 10.0 * math.log10(sigma_as2 / VACUUM_VARIANCE)
    mu = 1.0 / (4.0 * math.sqrt(product))
    return SqueezedStateMetrics(s_db=s_db, a_db=a_db, mu=mu,
                                sigma_s2=sigma_s2, sigma_as2=sigma_as2)


def metrics_from_chi(chi: float, p: SqueezingParams) -> SqueezedStateMetrics:
    """Model metrics at a given pump strength chi (rad/s)."""
    p2, q2 = output_variances(chi, p)
    n_j = pump_noise(gain_from_chi(chi, p.kappa), p)
    return metrics(p2 + n_j / 2.0, q2 + n_j / 2.0)


def chi_from_power(power_dbm: float, p: SqueezingParams) -> float:
    """Pump strength chi from a pump power in dBm via the amplitude coupling."""
    eps = p.pump_coupling * math.sqrt(dbm_to_watts(power_dbm))
    return eps * p.chi2


def model_curve(p: SqueezingParams, pump_powers_dbm) -> list[SqueezedStateMetrics]:
    """Model metrics for each pump power; threshold crossings name the power."""
    out = []
    for power in pump_powers_dbm:
        chi = chi_from_power(power, p)
        try:
            out.append(metrics_from_chi(chi, p))
        except ThresholdError as exc:
            raise ThresholdError(
                f"pump power {power} dBm drives the model past threshold: {exc}"
            ) from exc
    return out


def fit_squeezing(data, init: SqueezingParams, bounds: Bounds | None = None,
                  purity_weight: float = PURITY_RESIDUAL_WEIGHT,
                  fit_temperatures: bool = False
                  ) -> tuple[SqueezingParams, FitResult]:
    """Jointly fit squeezing (dB) and purity vs pump power.

    ``data`` is a sequence of (power_dbm, squeezing_db, purity) rows, at
    least 6 of them. Free parameters: kappa_int, chi2, nj_prefactor and
    delta_exp. kappa_ext and the pump coupling are taken from ``init``
    and held fixed (the pump coupling is degenerate with chi2: only their
    product enters the model).

    The bath temperatures are constrained to the 10-50 mK window: by
    default they are clipped into it and held at their init values
    (the thermal occupations are nearly flat there, so letting them float
    mostly degrades the conditioning of the other parameters);
    ``fit_temperatures=True`` adds them to the free vector with that box.

    ``bounds``, when given, replaces the default box for the free vector
    ([kappa_int, chi2, nj_prefactor, delta_exp], plus [t_att, t_mxc] when
    the temperatures float). Threshold crossings during the search are
    penalized, not raised.
    """
    rows = [(float(p_), float(s), float(m)) for p_, s, m in data]
    if len(rows) < 6:
        raise ValueError(f"need at least 6 data points, got {len(rows)}")
    powers = np.array([r[0] for r in rows])
    s_data = np.array([r[1] for r in rows])
    mu_data = np.array([r[2] for r in rows])

    t_lo, t_hi = TEMPERATURE_BOUNDS_K
    t_att0 = min(max(init.t_att, t_lo), t_hi)
    t_mxc0 = min(max(init.t_mxc, t_lo), t_hi)

    if bounds is None:
        lower = [init.kappa_ext * 1e-8, init.chi2 * 1e-3, 0.0, 0.0]
        upper = [init.kappa_ext, init.chi2 * 1e3, 1.0, 5.0]
        if fit_temperatures:
            lower += [t_lo, t_lo]
            upper += [t_hi, t_hi]
        bounds = Bounds(lower, upper)

    watts_sqrt = np.sqrt([dbm_to_watts(pw) for pw in powers])

    def residuals(p):
        kappa_int, chi2, nj, delta = p[:4]
        t_att, t_mxc = (p[4], p[5]) if fit_temperatures else (t_att0, t_mxc0)
        trial = replace(init, kappa_int=kappa_int, chi2=chi2, nj_prefactor=nj,
                        delta_exp=delta, t_att=t_att, t_mxc=t_mxc)
        out = np.empty(2 * len(powers))
        for k, w in enumerate(watts_sqrt):
            chi = init.pump_coupling * w * chi2
            try:
                m = metrics_from_chi(chi, trial)
                out[k] = m.s_db - s_data[k]
                out[len(powers) + k] = purity_weight * (m.mu - mu_data[k])
            except (ThresholdError, ValueError):
                out[k] = 1e3 * (1.0 + 2.0 * chi / trial.kappa)
                out[len(powers) + k] = 1e3
        return out

    p0 = [init.kappa_int, init.chi2, init.nj_prefactor, init.delta_exp]
    if fit_temperatures:
        p0 += [t_att0, t_mxc0]
    p0 = bounds.clip(np.asarray(p0, dtype=float))

    scale = np.where(np.abs(p0) > 0, np.abs(p0), 1.0)
    scaled_bounds = Bounds(bounds.lower / scale, bounds.upper / scale)
    # noise-limited objective: stop once relative progress stalls below
    # 1e-8 rather than grinding the ill-conditioned direction for the
    # (exact-arithmetic) default tolerance
    result = least_squares(lambda q: residuals(q * scale), p0 / scale,
                           bounds=scaled_bounds, f_tol=1e-8)
    result.params = result.params * scale
    if result.covariance is not None:
        result.covariance = result.covariance * np.outer(scale, scale)

    kappa_int, chi2, nj, delta = result.params[:4]
    t_att, t_mxc = ((float(result.params[4]), float(result.params[5]))
                    if fit_temperatures else (t_att0, t_mxc0))
    fitted = replace(init, kappa_int=float(kappa_int), chi2=float(chi2),
                     nj_prefactor=float(nj), delta_exp=float(delta),
                     t_att=t_att, t_mxc=t_mxc)
    return fitted, result
