"""
Spectrum model: background, filtered sideband and GAWBS Lorentzians,
plus the fiber transverse-mode solver behind the GAWBS peaks.
"""

import math

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import bisect
from scipy.special import jv

from ..errors import ConfigError, RootFindingError
from .schemas import FilterChain, GawbsModel, GawbsPeak


ROOT_RESIDUAL_TOL = 1e-10
_GRID_STEP = math.pi / 8


class GawbsMode(BaseModel):
    """One radial acoustic mode of the fiber."""
    m: int = Field(..., description="Mode index, from 1")
    y: float = Field(..., description="Root of the mode equation")
    frequency_hz: float = Field(..., description="Mode frequency (Hz)")
    residual: float = Field(..., description="|h(y)| at the returned root")


def lorentzian(Delta, center: float, width: float):
    """Unit-height Lorentzian in |Delta| with full width `width`."""
    offset = (np.abs(np.asarray(Delta, dtype=float)) - center) / width
    return 1.0 / (1.0 + 4.0 * offset**2)


def filter_transmission(Delta, filters: FilterChain, omega_ac: float | None = None):
    """Product of the two filter-cavity Lorentzians, unity on resonance."""
    center = filters.center if omega_ac is None else omega_ac
    return lorentzian(Delta, center, filters.kappa_FC1) * lorentzian(Delta, center, filters.kappa_FC2)


def gawbs_lorentzian(Delta, peak: GawbsPeak):
    return lorentzian(Delta, peak.omega_G, peak.kappa_G)


def spectrum_rate(
    Delta,
    Gamma_bkg: float,
    Gamma_res: float,
    gawbs: GawbsModel,
    filters: FilterChain,
    omega_ac: float,
):
    """
    Detected count rate versus drive detuning.

    Gamma(Delta) = Gamma_bkg + f_filter(Delta) Gamma_res + sum_G f_G(Delta) Gamma_G

    Args:
        Delta: Detuning(s) in rad/s; the model depends on |Delta|
        Gamma_bkg: Flat background (counts/s)
        Gamma_res: Sideband rate on filter resonance (counts/s)
        gawbs: Provides the GAWBS peaks
        filters: Filter-cavity linewidths
        omega_ac: Acoustic frequency the filters sit on (rad/s)
    """
    rate = Gamma_bkg + filter_transmission(Delta, filters, omega_ac) * Gamma_res
    for peak in gawbs.peaks:
        rate = rate + gawbs_lorentzian(Delta, peak) * peak.Gamma_G
    return float(rate) if np.ndim(rate) == 0 else rate


def mode_equation(y, alpha: float):
    """h(y) = (1 - alpha^2) J0(y) - alpha^2 J2(y)."""
    return (1.0 - alpha**2) * jv(0, y) - alpha**2 * jv(2, y)


def gawbs_mode_roots(model: GawbsModel, m_max: int) -> list[GawbsMode]:
    """
    First m_max positive roots of the mode equation.

    Brackets come from sign changes on a pi/8 grid; each bracket is refined
    by bisection.
    """
    if m_max < 1:
        raise ConfigError("m_max must be at least 1")
    alpha = model.alpha
    scale = model.V_d / (2 * math.pi * model.a)
    y_limit = _GRID_STEP * 8 * (m_max + 4) * 2

    roots: list[float] = []
    lo = _GRID_STEP
    h_lo = mode_equation(lo, alpha)
    while len(roots) < m_max:
        hi = lo + _GRID_STEP
        if hi > y_limit:
            raise RootFindingError(f"found only {len(roots)} of {m_max} roots below y={y_limit:.1f}")
        h_hi = mode_equation(hi, alpha)
        if h_lo == 0.0:
            roots.append(lo)
        elif h_lo * h_hi < 0:
            roots.append(bisect(mode_equation, lo, hi, args=(alpha,), xtol=1e-15, rtol=1e-15, maxiter=200))
        lo, h_lo = hi, h_hi

    modes = []
    for m, y in enumerate(roots[:m_max], start=1):
        residual = abs(float(mode_equation(y, alpha)))
        if residual >= ROOT_RESIDUAL_TOL:
            raise RootFindingError(f"root {m} at y={y} has residual {residual:.2e}")
        modes.append(GawbsMode(m=m, y=float(y), frequency_hz=scale * y, residual=residual))
    return modes


def gawbs_mode_freqs(model: GawbsModel, m_max: int) -> list[float]:
    """Frequencies f_m = V_d y_m / (2 pi a) of the first m_max modes (Hz)."""
    return [mode.frequency_hz for mode in gawbs_mode_roots(model, m_max)]
