"""
Sideband-rate fits: the backaction-plus-heating power sweep and the
thermal-equilibrium temperature sweep.
"""

import math
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..models import (
    CavityParams,
    ThermalLink,
    bose_occupancy,
    equipartition_occupancy,
    sideband_rates_vs_temperature,
    steady_state,
)
from ..schemas import DriveSide
from ..utils import get_logger
from .schemas import FitResult, PowerSweep
from .solver import nlls_solve, require_converged


logger = get_logger("fitting")

GLOBAL_PARAMS = ("T_MC", "heat_load", "k_exp", "g0")
TEMPERATURE_SWEEP_MIN_K = 0.05


def _sweep_rates(sweep: PowerSweep, params: dict[str, float], eta: float, cavity: CavityParams, link: ThermalLink):
    cavity = cavity.model_copy(update={"g0": params["g0"]})
    common = dict(
        T_MC=params["T_MC"],
        heat_load=params["heat_load"],
        k_exp=params["k_exp"],
        g0=params["g0"],
        cavity=cavity,
        gamma_ac0=link.gamma_ac0,
        gamma_ball_coeff=link.gamma_ball_coeff,
        power_unit_w=link.heat_power_unit_w,
    )
    red = steady_state(sweep.P_in, DriveSide.anti_stokes, **common)["rate_per_eta_det"]
    blue = steady_state(sweep.P_in, DriveSide.stokes, **common)["rate_per_eta_det"]
    return eta * np.asarray(red), eta * np.asarray(blue)


def fit_power_sweep(
    sweeps: Sequence[PowerSweep],
    cavity: Optional[CavityParams] = None,
    link: Optional[ThermalLink] = None,
    eta_det_init: float = 0.18,
    fixed: Optional[dict[str, float]] = None,
    shared_eta: bool = False,
) -> FitResult:
    """
    Fit red and blue sideband rates versus input power across sweeps.

    T_MC, the heat load q = beta^(k+1), k and g0 are global; each sweep gets
    its own detection efficiency unless shared_eta is set. Any global
    parameter can be pinned through `fixed`.

    Args:
        sweeps: One or more PowerSweep sets, each with both drive sides
        cavity: Cavity parameters (g0 is the starting value)
        link: Thermal link (T_MC, beta_heat and k_exp are starting values)
        eta_det_init: Starting detection efficiency
        fixed: Parameters held at the given values
        shared_eta: Use one efficiency for every sweep

    Returns:
        FitResult with extras beta_heat (and sigma), the zero-power bath
        occupancy n_th and the equipartition occupancy k_B T_MC / hbar omega_ac
    """
    if not sweeps:
        raise DataError("at least one power sweep is required")
    cavity = cavity or CavityParams()
    link = link or ThermalLink()
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(GLOBAL_PARAMS)
    if unknown:
        raise ConfigError(f"only {GLOBAL_PARAMS} can be fixed, got {sorted(unknown)}")

    start = {
        "T_MC": link.T_MC,
        "heat_load": link.beta_heat ** (link.k_exp + 1.0),
        "k_exp": link.k_exp,
        "g0": cavity.g0,
    }
    start.update(fixed)
    free = [name for name in GLOBAL_PARAMS if name not in fixed]
    eta_names = ["eta_det"] if shared_eta else [f"eta_det_{s.label}" for s in sweeps]
    if len(set(eta_names)) != len(eta_names):
        raise ConfigError("sweep labels must be unique")
    names = free + eta_names
    init = [start[n] for n in free] + [eta_det_init] * len(eta_names)
    lower_by_name = {"T_MC": 1e-4, "heat_load": 0.0, "k_exp": -0.9, "g0": 0.0}
    lower = [lower_by_name[n] for n in free] + [1e-6] * len(eta_names)
    upper = [np.inf] * len(free) + [1.0] * len(eta_names)

    observed, sigma = [], []
    for s in sweeps:
        observed += [s.R_AS, s.R_S]
        sigma += [s.sigma_AS or np.sqrt(np.maximum(s.R_AS, 1.0)), s.sigma_S or np.sqrt(np.maximum(s.R_S, 1.0))]
    y = np.concatenate([np.asarray(o, dtype=float) for o in observed])
    weights = 1.0 / np.concatenate([np.asarray(v, dtype=float) for v in sigma]) ** 2

    def model(_x, p):
        values = dict(zip(names, p))
        params = {n: values.get(n, start[n]) for n in GLOBAL_PARAMS}
        parts = []
        for j, s in enumerate(sweeps):
            eta = values[eta_names[0 if shared_eta else j]]
            red, blue = _sweep_rates(s, params, eta, cavity, link)
            parts += [red, blue]
        return np.concatenate(parts)

    result = nlls_solve(model, None, y, init, weights=weights, bounds=(lower, upper), names=names)
    require_converged(result, "power sweep")

    values = {n: result.value(n) for n in GLOBAL_PARAMS if n in result.names}
    values.update(fixed)
    q, k = values["heat_load"], values["k_exp"]
    beta = q ** (1.0 / (k + 1.0)) if q > 0 else 0.0
    beta_sigma = _beta_sigma(result, q, k, beta)
    n_th = bose_occupancy(cavity.omega_ac, values["T_MC"])
    result.extras.update(
        {
            "beta_heat": beta,
            "beta_heat_sigma": beta_sigma,
            "n_th_zero_power": n_th,
            "equipartition_occupancy": equipartition_occupancy(cavity.omega_ac, values["T_MC"]),
            "fixed": fixed,
        }
    )
    logger.info(
        f"[Fitting] power sweep: T_MC={values['T_MC'] * 1e3:.2f} mK, beta={beta:.3g}, "
        f"k={k:.3g}, g0/2pi={values['g0'] / (2 * math.pi):.1f} Hz"
    )
    return result


def _beta_sigma(result: FitResult, q: float, k: float, beta: float) -> float:
    """Delta-method uncertainty of beta = q^(1/(k+1))."""
    names = result.names
    cov = np.asarray(result.covariance)
    if "heat_load" not in names:
        return 0.0
    iq = names.index("heat_load")
    if q <= 0:
        return float(result.uncertainties[iq] ** (1.0 / (k + 1.0)))
    grad = np.zeros(len(names))
    grad[iq] = beta / ((k + 1.0) * q)
    if "k_exp" in names:
        grad[names.index("k_exp")] = -beta * math.log(q) / (k + 1.0) ** 2
    return float(np.sqrt(max(grad @ cov @ grad, 0.0)))


def fit_temperature_sweep(
    T_MC: Sequence[float],
    r_as: Sequence[float],
    r_s: Sequence[float],
    omega_ac: float,
    sigma_as: Optional[Sequence[float]] = None,
    sigma_s: Optional[Sequence[float]] = None,
) -> FitResult:
    """
    One-parameter fit of power-normalized rates to a n(T) and a (n(T) + 1).

    Only points with T_MC > 50 mK are used.
    """
    T = np.asarray(T_MC, dtype=float)
    r_as = np.asarray(r_as, dtype=float)
    r_s = np.asarray(r_s, dtype=float)
    if not T.shape == r_as.shape == r_s.shape:
        raise ConfigError("temperature sweep columns must have equal length")
    use = T > TEMPERATURE_SWEEP_MIN_K
    if use.sum() < 2:
        raise DataError(f"need at least 2 points above {TEMPERATURE_SWEEP_MIN_K * 1e3:.0f} mK, got {int(use.sum())}")

    sig_as = np.ones_like(T) if sigma_as is None else np.asarray(sigma_as, dtype=float)
    sig_s = np.ones_like(T) if sigma_s is None else np.asarray(sigma_s, dtype=float)
    y = np.concatenate([r_as[use], r_s[use]])
    weights = 1.0 / np.concatenate([sig_as[use], sig_s[use]]) ** 2
    n = bose_occupancy(omega_ac, T[use])
    a0 = float(np.mean(r_s[use] - r_as[use])) or 1.0

    def model(_x, p):
        red, blue = sideband_rates_vs_temperature(T[use], p[0], omega_ac)
        return np.concatenate([red, blue])

    result = nlls_solve(model, None, y, [a0], weights=weights, names=["a"])
    require_converged(result, "temperature sweep")
    result.extras.update({"points_used": int(use.sum()), "mean_occupancy": float(np.mean(n))})
    return result
