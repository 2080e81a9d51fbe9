"""
Optomechanical backaction plus drive heating: steady-state occupancy,
total damping and sideband scattering rates versus input power.
"""

import numpy as np
from scipy.constants import hbar, k as k_B

from ..errors import ConfigError, InstabilityError
from ..schemas import DriveSide
from ..utils import get_logger
from .schemas import BackactionResult, CavityParams, ThermalLink


logger = get_logger("models")


def bose_occupancy(omega, T):
    """Bose-Einstein occupancy at angular frequency omega and temperature T (K)."""
    T = np.asarray(T, dtype=float)
    safe = np.where(T > 0, T, 1.0)
    with np.errstate(over="ignore"):
        value = np.where(T > 0, 1.0 / np.expm1(hbar * omega / (k_B * safe)), 0.0)
    value = np.where(np.isnan(T), np.nan, value)
    return float(value) if np.ndim(value) == 0 else value


def equipartition_occupancy(omega, T):
    """High-temperature occupancy k_B T / (hbar omega)."""
    value = k_B * np.asarray(T, dtype=float) / (hbar * omega)
    return float(value) if np.ndim(value) == 0 else value


def fiber_temperature(P_in, T_MC: float, heat_load: float, k_exp: float, power_unit_w: float = 1e-3):
    """
    (T_MC^(k+1) + q P)^(1/(k+1)) with q = beta^(k+1) and P in power_unit_w.

    Non-physical combinations (negative base) come back as NaN.
    """
    base = T_MC ** (k_exp + 1.0) + heat_load * np.asarray(P_in, dtype=float) / power_unit_w
    with np.errstate(invalid="ignore"):
        return np.where(base > 0, np.abs(base) ** (1.0 / (k_exp + 1.0)), np.nan)


def thermal_bath_occupancy(P_in, link: ThermalLink, omega_ac: float):
    """
    Occupancy of the bath the mode relaxes to, mixing the heated fiber
    (intrinsic damping) with the fridge (ballistic damping).

    Returns:
        (n_th, T_fib, gamma_ac)
    """
    return _bath(
        np.asarray(P_in, dtype=float),
        link.T_MC,
        link.beta_heat ** (link.k_exp + 1.0),
        link.k_exp,
        link.gamma_ac0,
        link.gamma_ball_coeff,
        link.heat_power_unit_w,
        omega_ac,
    )


def _bath(P, T_MC, heat_load, k_exp, gamma_ac0, gamma_ball_coeff, unit, omega_ac):
    T_fib = fiber_temperature(P, T_MC, heat_load, k_exp, unit)
    gamma_ball = gamma_ball_coeff * T_MC**4
    gamma_ac = gamma_ac0 + gamma_ball
    n_th = (bose_occupancy(omega_ac, T_fib) * gamma_ac0 + bose_occupancy(omega_ac, T_MC) * gamma_ball) / gamma_ac
    return n_th, T_fib, gamma_ac


def drive_detuning(cavity: CavityParams, side: DriveSide) -> float:
    """Red drive sits at -omega_ac, blue at +omega_ac, unless overridden."""
    if cavity.Delta is not None:
        return cavity.Delta
    return -cavity.omega_ac if side == DriveSide.anti_stokes else cavity.omega_ac


def intracavity_photons(P_in, cavity: CavityParams, side: DriveSide):
    """
    n_c = kappa_in / ((kappa_c/2)^2 + Delta^2) * P_in / (hbar omega_drive).

    An explicit cavity.n_c takes precedence.
    """
    if cavity.n_c is not None:
        return np.full(np.shape(P_in), cavity.n_c) if np.ndim(P_in) else cavity.n_c
    delta = drive_detuning(cavity, side)
    omega_drive = cavity.omega_c + delta
    lorentz = cavity.kappa_in / ((cavity.kappa_c / 2) ** 2 + delta**2)
    return lorentz * np.asarray(P_in, dtype=float) / (hbar * omega_drive)


def backaction_floor(cavity: CavityParams) -> float:
    """Residual occupancy under strong red-sideband cooling, (kappa_c / 4 omega_ac)^2."""
    return (cavity.kappa_c / (4 * cavity.omega_ac)) ** 2


def steady_state(
    P_in,
    side: DriveSide,
    *,
    T_MC: float,
    heat_load: float,
    k_exp: float,
    g0: float,
    cavity: CavityParams,
    gamma_ac0: float,
    gamma_ball_coeff: float,
    power_unit_w: float = 1e-3,
) -> dict[str, np.ndarray]:
    """
    Vectorized backaction model over input powers.

    Heating enters through q = beta^(k+1) so the fitter can pass q directly.
    Unstable blue-drive points (gamma_bar <= 0) come back as NaN.
    """
    P = np.asarray(P_in, dtype=float)
    n_th, T_fib, gamma_ac = _bath(P, T_MC, heat_load, k_exp, gamma_ac0, gamma_ball_coeff, power_unit_w, cavity.omega_ac)
    n_c = intracavity_photons(P, cavity, side)
    gamma_opt = 4.0 * g0**2 * n_c / cavity.kappa_c
    floor = backaction_floor(cavity)

    with np.errstate(divide="ignore", invalid="ignore"):
        if side == DriveSide.anti_stokes:
            gamma_bar = gamma_ac + gamma_opt
            n_ac = (gamma_opt * floor + gamma_ac * n_th) / gamma_bar
            rate = gamma_opt * n_ac * cavity.eta_kappa
        else:
            gamma_bar = gamma_ac - gamma_opt
            n_ac = (gamma_ac * n_th + gamma_opt * (1.0 + floor)) / gamma_bar
            rate = gamma_opt * (n_ac + 1.0) * cavity.eta_kappa
        unstable = gamma_bar <= 0
        n_ac = np.where(unstable, np.nan, n_ac)
        rate = np.where(unstable, np.nan, rate)

    return {
        "n_ac": n_ac,
        "gamma_bar": gamma_bar,
        "rate_per_eta_det": rate,
        "n_th": n_th,
        "T_fib": T_fib,
        "gamma_opt": gamma_opt,
        "gamma_ac": gamma_ac,
        "n_c": n_c,
    }


def backaction_occupancy(P_in: float, cavity: CavityParams, link: ThermalLink, side: DriveSide) -> BackactionResult:
    """
    Occupancy, damping and detected sideband rate (per unit eta_det) at one power.

    Args:
        P_in: Input power (W)
        cavity: Cavity and coupling
        link: Thermal link and bath
        side: anti_stokes for the red drive, stokes for the blue drive

    Raises:
        InstabilityError: blue drive with gamma_bar <= 0
    """
    if P_in < 0:
        raise ConfigError("P_in must be non-negative")
    state = steady_state(
        P_in,
        side,
        T_MC=link.T_MC,
        heat_load=link.beta_heat ** (link.k_exp + 1.0),
        k_exp=link.k_exp,
        g0=cavity.g0,
        cavity=cavity,
        gamma_ac0=link.gamma_ac0,
        gamma_ball_coeff=link.gamma_ball_coeff,
        power_unit_w=link.heat_power_unit_w,
    )
    gamma_bar = float(state["gamma_bar"])
    if gamma_bar <= 0:
        raise InstabilityError(
            f"blue drive at {P_in * 1e6:.3g} uW is parametrically unstable (gamma_bar={gamma_bar:.3g} rad/s)",
            gamma_bar,
        )
    return BackactionResult(**{key: float(value) for key, value in state.items()})


def sideband_rates_vs_temperature(T, a: float, omega_ac: float):
    """Power-normalized red and blue rates, a n(T) and a (n(T) + 1)."""
    n = bose_occupancy(omega_ac, T)
    return a * np.asarray(n), a * (np.asarray(n) + 1.0)
