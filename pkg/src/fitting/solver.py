"""
Levenberg-Marquardt least squares with a finite-difference Jacobian.

Residuals are sqrt(w) (y - f(x, p)). Each iteration solves the damped
normal equations (J^T J + mu diag(J^T J)) dp = -J^T r; mu shrinks after an
accepted step and grows after a rejected one.
"""

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ConfigError, ConvergenceError, DataError
from ..utils import get_logger
from .schemas import FitResult


logger = get_logger("fitting")

MAX_ITERATIONS = 500
COST_RTOL = 1e-10
STEP_RTOL = 1e-8
CONDITION_LIMIT = 1e12
_MU_START = 1e-3
_MU_MAX = 1e16

Bounds = tuple[Sequence[float], Sequence[float]]


def _bounds_arrays(bounds: Optional[Bounds], k: int) -> tuple[np.ndarray, np.ndarray]:
    if bounds is None:
        return np.full(k, -np.inf), np.full(k, np.inf)
    lower = np.asarray(bounds[0], dtype=float)
    upper = np.asarray(bounds[1], dtype=float)
    if lower.shape != (k,) or upper.shape != (k,) or np.any(lower > upper):
        raise ConfigError("bounds must be two length-k arrays with lower <= upper")
    return lower, upper


def numeric_jacobian(
    func: Callable[[np.ndarray], np.ndarray],
    p: Sequence[float],
    bounds: Optional[Bounds] = None,
) -> np.ndarray:
    """
    Central-difference Jacobian of a vector function, step max(1e-6 |p|, 1e-9).

    A one-sided difference is used when the central stencil would cross a bound.
    """
    p = np.asarray(p, dtype=float)
    lower, upper = _bounds_arrays(bounds, len(p))
    f0 = np.asarray(func(p), dtype=float)
    jac = np.empty((f0.size, len(p)))
    for i in range(len(p)):
        h = max(1e-6 * abs(p[i]), 1e-9)
        up, down = p.copy(), p.copy()
        up[i] += h
        down[i] -= h
        if up[i] > upper[i]:
            jac[:, i] = (f0 - np.asarray(func(down), dtype=float)) / h
        elif down[i] < lower[i]:
            jac[:, i] = (np.asarray(func(up), dtype=float) - f0) / h
        else:
            jac[:, i] = (np.asarray(func(up), dtype=float) - np.asarray(func(down), dtype=float)) / (2 * h)
    return jac


def _covariance(jac: np.ndarray, cost: float, dof: int) -> tuple[np.ndarray, float, bool]:
    normal = jac.T @ jac
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(normal)) if normal.size else 1.0
    scale = cost / dof if dof > 0 else 1.0
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        return np.linalg.pinv(normal) * scale, cond, False
    return np.linalg.inv(normal) * scale, cond, True


def nlls_solve(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    init: Sequence[float],
    weights: Optional[np.ndarray] = None,
    bounds: Optional[Bounds] = None,
    names: Optional[Sequence[str]] = None,
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """
    Minimize sum w (y - model(x, p))^2.

    Args:
        model: f(x, p) returning an array shaped like y
        x: Inputs passed through to the model
        y: Observations
        init: Starting parameters, inside bounds
        weights: Positive weights, default ones
        bounds: (lower, upper) per parameter
        names: Parameter names, default p0, p1, ...

    Returns:
        FitResult; converged is False when max_iterations ran out
    """
    p = np.asarray(init, dtype=float).copy()
    k = len(p)
    names = list(names) if names is not None else [f"p{i}" for i in range(k)]
    if len(names) != k:
        raise ConfigError("one name per parameter is required")
    y = np.asarray(y, dtype=float).ravel()
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != y.shape or np.any(~(w > 0)):
        raise ConfigError("weights must be positive and match the data")
    lower, upper = _bounds_arrays(bounds, k)
    if np.any(p < lower) or np.any(p > upper):
        raise ConfigError("initial parameters lie outside the bounds")
    sqrt_w = np.sqrt(w)

    def residual(params: np.ndarray) -> np.ndarray:
        return sqrt_w * (y - np.asarray(model(x, params), dtype=float).ravel())

    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise DataError("model output is not finite at the initial parameters")
    cost = float(r @ r)
    mu = _MU_START
    converged = cost == 0.0
    message = "exact fit" if converged else "maximum iterations reached"
    iterations = 0

    while not converged and iterations < max_iterations:
        jac = numeric_jacobian(residual, p, (lower, upper))
        normal = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(normal).copy()
        diag[diag <= 0] = 1.0

        accepted = False
        while not accepted and iterations < max_iterations:
            iterations += 1
            try:
                step = np.linalg.solve(normal + mu * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            trial = np.clip(p + step, lower, upper)
            r_trial = residual(trial)
            trial_cost = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else np.inf
            if trial_cost <= cost:
                accepted = True
                rel_cost = (cost - trial_cost) / max(cost, np.finfo(float).tiny)
                rel_step = float(np.max(np.abs(trial - p) / np.maximum(np.abs(p), 1e-12)))
                p, r, cost = trial, r_trial, trial_cost
                mu = max(mu / 10, 1e-12)
                if cost == 0.0 or rel_cost < COST_RTOL:
                    converged, message = True, "relative cost change below tolerance"
                elif rel_step < STEP_RTOL:
                    converged, message = True, "relative step below tolerance"
            else:
                mu *= 10
                if mu > _MU_MAX:
                    # no descent direction left: a local minimum within precision
                    converged, message = True, "no further decrease"
                    break
        if converged:
            break

    jac = numeric_jacobian(residual, p, (lower, upper))
    cov, cond, identifiable = _covariance(jac, cost, len(y) - k)
    if not identifiable:
        logger.warning(f"[Fitting] normal matrix singular (condition {cond:.3g}); parameters not identifiable")
    sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(
        names=names,
        values=p.tolist(),
        uncertainties=sigmas.tolist(),
        covariance=cov.tolist(),
        residuals=r.tolist(),
        cost=cost,
        converged=converged,
        iterations=iterations,
        message=message,
        condition_number=cond,
        identifiable=identifiable,
    )


def require_converged(result: FitResult, label: str) -> FitResult:
    """Raise ConvergenceError, carrying the last iterate, unless the fit converged."""
    if not result.converged:
        raise ConvergenceError(f"{label} fit did not converge: {result.message}", result)
    return result
