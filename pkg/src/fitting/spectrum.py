"""
Count-rate spectrum fits and the linear power dependence of the fitted rates.
"""

from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..models import FilterChain, GawbsModel, GawbsPeak, OMEGA_AC, filter_transmission, mhz, spectrum_rate
from ..utils import get_logger
from .schemas import FitResult, SpectrumMode
from .solver import nlls_solve, require_converged


logger = get_logger("fitting")

FIVE_POINT_MINIMUM = 5


def _local_maxima(Delta: np.ndarray, rate: np.ndarray) -> np.ndarray:
    """Indices of local maxima of rate over |Delta|, tallest first."""
    order = np.argsort(np.abs(Delta))
    r = rate[order]
    padded = np.concatenate(([-np.inf], r, [-np.inf]))
    peaks = np.flatnonzero((r >= padded[:-2]) & (r > padded[2:]))
    peaks = peaks[np.argsort(-r[peaks], kind="stable")]
    return order[peaks]


def fit_spectrum(
    Delta: Sequence[float],
    rate: Sequence[float],
    weights: Optional[Sequence[float]] = None,
    mode: SpectrumMode = SpectrumMode.five_point,
    n_gawbs_peaks: int = 1,
    filters: Optional[FilterChain] = None,
    omega_ac: float = OMEGA_AC,
    gawbs: Optional[GawbsModel] = None,
) -> FitResult:
    """
    Fit the detuning dependence of the detected count rate.

    five_point fits Gamma_bkg and Gamma_res with filters, omega_ac and any
    GAWBS peaks held fixed. full also frees omega_ac and, per GAWBS peak,
    its rate, centre and width.

    Args:
        Delta: Detunings (rad/s)
        rate: Count rates (counts/s)
        weights: Default 1 / max(rate, 1)
        mode: five_point or full
        n_gawbs_peaks: GAWBS Lorentzians in the full fit
        filters: Filter chain (linewidths always fixed)
        omega_ac: Fixed (five_point) or starting (full) sideband centre
        gawbs: Fixed peaks for five_point, optional seeds for full
    """
    Delta = np.asarray(Delta, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if Delta.shape != rate.shape:
        raise ConfigError("Delta and rate must have equal length")
    filters = filters or FilterChain(center=omega_ac)
    gawbs = gawbs or GawbsModel()
    w = 1.0 / np.maximum(rate, 1.0) if weights is None else np.asarray(weights, dtype=float)
    mode = SpectrumMode(mode)

    if mode == SpectrumMode.five_point:
        if len(Delta) < FIVE_POINT_MINIMUM:
            raise DataError(f"five-point fit needs at least {FIVE_POINT_MINIMUM} points, got {len(Delta)}")
        fixed = spectrum_rate(Delta, 0.0, 0.0, gawbs, filters, omega_ac)
        transmission = filter_transmission(Delta, filters, omega_ac)

        def five_point(_x, p):
            return p[0] + transmission * p[1] + fixed

        result = nlls_solve(
            five_point,
            None,
            rate,
            [max(float(rate.min()), 0.0), max(float(rate.max() - rate.min()), 1.0)],
            weights=w,
            names=["Gamma_bkg", "Gamma_res"],
        )
        return require_converged(result, "five-point spectrum")

    n_params = 3 + 3 * n_gawbs_peaks
    if len(Delta) <= n_params:
        raise DataError(f"full spectrum fit needs more than {n_params} points, got {len(Delta)}")
    maxima = _local_maxima(Delta, rate)
    if len(maxima) == 0:
        raise DataError("spectrum has no local maximum to seed from")
    centre = int(maxima[np.argmin(np.abs(np.abs(Delta[maxima]) - omega_ac))])
    bkg0 = max(float(np.percentile(rate, 10)), 0.0)
    init = [bkg0, max(float(rate[centre]) - bkg0, 1.0), float(abs(Delta[centre]))]
    names = ["Gamma_bkg", "Gamma_res", "omega_ac"]

    seeds = list(gawbs.peaks)
    others = [int(i) for i in maxima if i != centre]
    while len(seeds) < n_gawbs_peaks:
        if not others:
            raise DataError(f"found {len(seeds)} GAWBS seeds, {n_gawbs_peaks} requested")
        i = others.pop(0)
        seeds.append(GawbsPeak(omega_G=abs(float(Delta[i])), kappa_G=mhz(2.0), Gamma_G=max(float(rate[i]) - bkg0, 1.0)))
    for j, peak in enumerate(seeds[:n_gawbs_peaks]):
        init += [max(peak.Gamma_G, 1.0), peak.omega_G, peak.kappa_G]
        names += [f"Gamma_G{j}", f"omega_G{j}", f"kappa_G{j}"]

    lower = [0.0, 0.0, 0.0] + [0.0, 0.0, 1.0] * n_gawbs_peaks
    upper = [np.inf] * n_params

    def full(_x, p):
        peaks = [
            GawbsPeak(Gamma_G=max(p[3 + 3 * j], 0.0), omega_G=max(p[4 + 3 * j], 1.0), kappa_G=max(p[5 + 3 * j], 1.0))
            for j in range(n_gawbs_peaks)
        ]
        return spectrum_rate(Delta, p[0], p[1], GawbsModel(peaks=peaks), filters, p[2])

    result = nlls_solve(full, None, rate, init, weights=w, bounds=(lower, upper), names=names)
    spacing = float(np.min(np.diff(np.unique(np.abs(Delta))))) if len(np.unique(np.abs(Delta))) > 1 else 0.0
    narrow = [f"kappa_G{j}" for j in range(n_gawbs_peaks) if result.value(f"kappa_G{j}") < spacing]
    if narrow:
        logger.warning(f"[Fitting] {', '.join(narrow)} collapsed below the {spacing:.3g} rad/s grid spacing")
        result.identifiable = False
        result.extras["narrow_peaks"] = narrow
    return require_converged(result, "full spectrum")


def fit_background_power(
    powers: Sequence[float],
    rates: Sequence[float],
    sigmas: Optional[Sequence[float]] = None,
) -> FitResult:
    """Gamma(P) = Gamma_0 + Gamma_1 P; pass P in the unit the slope should carry."""
    powers = np.asarray(powers, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if len(powers) < 2 or powers.shape != rates.shape:
        raise DataError("need at least two (power, rate) pairs of equal length")
    w = None if sigmas is None else 1.0 / np.asarray(sigmas, dtype=float) ** 2
    slope = float(np.polyfit(powers, rates, 1)[0]) if np.ptp(powers) > 0 else 0.0
    intercept = float(rates.mean() - slope * powers.mean())

    def line(x, p):
        return p[0] + p[1] * x

    result = nlls_solve(line, powers, rates, [intercept, slope], weights=w, names=["Gamma_0", "Gamma_1"])
    return require_converged(result, "background power")
