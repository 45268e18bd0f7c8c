"""Generic numerical machinery for the fitting modules.

Two deterministic minimizers:

* :func:`minimize_simplex` — derivative-free Nelder-Mead for scalar
  objectives (delegates to scipy's simplex behind this module's contract);
* :func:`least_squares` — damped Gauss-Newton with a numerically
  differenced Jacobian and box bounds enforced by projection after each
  damped step.

Both are re-entrant and never touch global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError


@dataclass
class FitResult:
    """Outcome of a minimization.

    ``residual_rms`` is the root-mean-square residual for least-squares
    fits and the final objective value for scalar minimization.
    ``covariance`` (least squares only) is the residual variance times the
    inverse Gauss-Newton normal matrix; populated only on converged fits.
    """

    params: np.ndarray
    residual_rms: float
    iterations: int
    converged: bool
    covariance: np.ndarray | None = None

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.residual_rms < 0.0:
            raise ValueError(f"residual_rms must be >= 0, got {self.residual_rms}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")


@dataclass(frozen=True)
class Bounds:
    """Elementwise box bounds; +-inf entries mean unbounded."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same shape")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")

    @classmethod
    def unbounded(cls, n: int) -> "Bounds":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, rtol: float = 0.0) -> bool:
        slack = rtol * np.maximum(np.abs(x), 1.0)
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))


def minimize_simplex(objective, x0, x_tol: float = 1e-10, f_tol: float = 1e-12,
                     max_iter: int = 500, initial_step=None) -> FitResult:
    """Nelder-Mead minimization of a scalar objective.

    Converged means both the simplex diameter and the objective spread fell
    below the tolerances. A non-finite objective value anywhere during the
    search aborts with :class:`FitError`.
    """
    from scipy.optimize import minimize as _scipy_minimize

    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def guarded(x):
        v = objective(x)
        if not math.isfinite(v):
            raise FitError(f"objective returned non-finite value {v!r} at x={x!r}")
        return v

    f0 = guarded(x0)
    scale = max(1.0, float(np.max(np.abs(x0))))
    options = {
        "xatol": x_tol * scale,
        "fatol": f_tol * max(1.0, abs(f0)),
        "maxiter": max_iter,
        "maxfev": 50 * max_iter,
    }
    if initial_step is not None:
        steps = np.broadcast_to(np.asarray(initial_step, dtype=float), x0.shape)
        simplex = np.vstack([x0] + [x0 + steps[i] * np.eye(len(x0))[i]
                                    for i in range(len(x0))])
        options["initial_simplex"] = simplex

    res = _scipy_minimize(guarded, x0, method="Nelder-Mead", options=options)
    final = float(res.fun)
    # the returned vertex is the best seen, so it never exceeds f(x0)
    if final > f0:
        res.x, final = x0, f0
    return FitResult(params=np.asarray(res.x, dtype=float),
                     residual_rms=max(final, 0.0),
                     iterations=int(res.nit),
                     converged=bool(res.success))


def _fd_jacobian(residuals, p, r0, bounds: Bounds, h: float):
    """Forward-difference Jacobian with scale-aware step h * max(|p|, 1).

    Steps that would leave the box are taken backward instead, so the
    residual function is never evaluated outside the bounds.
    """
    n = len(p)
    jac = np.empty((len(r0), n))
    for i in range(n):
        step = h * max(abs(p[i]), 1.0)
        if p[i] + step > bounds.upper[i]:
            step = -step
        pi = p.copy()
        pi[i] += step
        ri = np.asarray(residuals(pi), dtype=float)
        jac[:, i] = (ri - r0) / step
    return jac


def least_squares(residuals, p0, bounds: Bounds | None = None,
                  p_tol: float = 1e-10, f_tol: float = 1e-12, max_iter: int = 500,
                  fd_step: float = 1.4901161193847656e-08,
                  on_iterate=None) -> FitResult:
    """Damped Gauss-Newton (Levenberg-Marquardt) with box bounds by projection.

    The sum of squares is non-increasing across accepted steps; singular
    normal equations are handled by raising the damping. Returns
    ``converged=False`` when ``max_iter`` is exhausted or the damping
    saturates without meeting the tolerances.

    ``on_iterate(p)``, when given, is called with every accepted iterate
    (initial point included).
    """
    p = np.atleast_1d(np.asarray(p0, dtype=float)).copy()
    if bounds is None:
        bounds = Bounds.unbounded(len(p))
    if not bounds.contains(p):
        raise ValueError("initial point violates bounds")

    r = np.asarray(residuals(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals non-finite at the initial point")
    ssq = float(r @ r)
    m = len(r)
    if on_iterate is not None:
        on_iterate(p.copy())

    lam = 1e-3
    converged = False
    iterations = 0
    jac = None

    while iterations < max_iter:
        iterations += 1
        jac = _fd_jacobian(residuals, p, r, bounds, fd_step)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1.0

        accepted = False
        while lam < 1e15:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = bounds.clip(p + step)
            r_new = np.asarray(residuals(p_new), dtype=float)
            if np.all(np.isfinite(r_new)):
                ssq_new = float(r_new @ r_new)
                if ssq_new <= ssq:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            break

        actual_step = p_new - p
        p, r, ssq_prev, ssq = p_new, r_new, ssq, ssq_new
        lam = max(lam * 0.1, 1e-14)
        if on_iterate is not None:
            on_iterate(p.copy())

        rel_step = np.max(np.abs(actual_step) / np.maximum(np.abs(p), 1.0))
        if rel_step < p_tol or (ssq_prev - ssq) <= f_tol * max(ssq, 1e-300):
            converged = True
            break

    covariance = None
    if converged and jac is not None:
        dof = max(m - len(p), 1)
        try:
            covariance = (ssq / dof) * np.linalg.inv(jac.T @ jac)
        except np.linalg.LinAlgError:
            covariance = None

    return FitResult(params=p, residual_rms=math.sqrt(ssq / m),
                     iterations=iterations, converged=converged,
                     covariance=covariance)
