"""
Coherence histogram fits to A + B f_n(gamma_bar tau), evaluated as exact
bin averages over the histogram's delay bins.
"""

import math
from typing import Optional

import numpy as np

from ..correlator import CoincidenceHistogram
from ..errors import DataError
from ..models import binned_thermal_coherence
from ..utils import get_logger
from .schemas import FitResult
from .solver import nlls_solve


logger = get_logger("fitting")


def _delay_grid(hist: CoincidenceHistogram) -> tuple[list[np.ndarray], list[float]]:
    edges_s = hist.lower_edges_ns * 1e-9
    axes = np.meshgrid(*([edges_s] * (hist.order - 1)), indexing="ij")
    widths = [hist.bin_width_ns * 1e-9] * (hist.order - 1)
    return [a.ravel() for a in axes], widths


def coherence_model(order: int, lower_edges: list[np.ndarray], widths: list[float], A: float, B: float, gamma_bar: float):
    """A + B (binned g^(order) - 1) over the given bins."""
    g = binned_thermal_coherence(order, lower_edges, widths, gamma_bar)
    return A + B * (np.asarray(g) - 1.0)


def seed_coherence(values: np.ndarray, bin_width_ns: int) -> tuple[float, float, float]:
    """
    Starting A, B and gamma_bar from the histogram shape.

    gamma_bar comes from the delay where the first-axis profile (other axes
    at their first bin) falls halfway from its first bin to its far-end mean.
    """
    order = values.ndim + 1
    n = values.shape[0]
    tail = max(1, n // 4)
    far = values[(slice(n - tail, None),) * values.ndim]
    A0 = float(far.mean()) if far.mean() > 0 else float(max(values.mean(), 1.0))
    profile = values[(slice(None),) + (0,) * (values.ndim - 1)].astype(float)
    head = float(profile[0])
    plateau = float(profile[-tail:].mean())
    half = 0.5 * (head + plateau)
    below = np.flatnonzero(profile <= half) if head > plateau else np.empty(0, int)
    if len(below) and below[0] > 0:
        tau_half = (below[0] + 0.5) * bin_width_ns * 1e-9
    else:
        tau_half = n * bin_width_ns * 1e-9 / 8
    gamma0 = math.log(2.0) / tau_half
    B0 = (head - A0) / max(math.factorial(order) - 1, 1)
    return A0, B0, gamma0


def fit_coherence(
    hist: CoincidenceHistogram,
    values: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
    init: Optional[tuple[float, float, float]] = None,
) -> FitResult:
    """
    Fit A (plateau), B and gamma_bar to a coincidence histogram.

    Args:
        hist: Histogram supplying the bin grid (and counts when values is None)
        values: Optional replacement for the counts, e.g. background-corrected
            counts on the same grid
        weights: Per-bin weights; default Poisson 1 / max(count, 1)
        init: Optional (A, B, gamma_bar) seed

    Returns:
        FitResult with names A, B, gamma_bar and extras g_zero (with its sigma)
    """
    order = hist.order
    data = hist.counts.astype(float) if values is None else np.asarray(values, dtype=float)
    if data.shape != hist.counts.shape:
        raise DataError(f"values shape {data.shape} does not match histogram {hist.counts.shape}")
    if data.size == 0 or not np.any(data):
        raise DataError("empty coincidence histogram")

    zero_factor = math.factorial(order) - 1
    if np.ptp(data) == 0:
        logger.warning(f"[Fitting] order-{order} histogram is flat; B and gamma_bar are not identifiable")
        level = float(data.flat[0])
        return FitResult(
            names=["A", "B", "gamma_bar"],
            values=[level, 0.0, math.nan],
            uncertainties=[math.nan, math.nan, math.nan],
            cost=0.0,
            converged=False,
            message="degenerate histogram: all bins equal",
            condition_number=math.inf,
            identifiable=False,
            extras={"order": order, "g_zero": 1.0},
        )

    edges, widths = _delay_grid(hist)
    if weights is None:
        weights = 1.0 / np.maximum(np.abs(data), 1.0)
    A0, B0, gamma0 = init or seed_coherence(data, hist.bin_width_ns)

    def model(_x, p):
        return coherence_model(order, edges, widths, p[0], p[1], p[2])

    result = nlls_solve(
        model,
        None,
        data.ravel(),
        [A0, B0, gamma0],
        weights=np.asarray(weights, dtype=float).ravel(),
        bounds=([1e-12, -np.inf, 1e-3], [np.inf, np.inf, np.inf]),
        names=["A", "B", "gamma_bar"],
    )
    A, B, _ = result.values
    cov = np.asarray(result.covariance)
    g_zero = 1.0 + zero_factor * B / A
    grad = np.array([-zero_factor * B / A**2, zero_factor / A, 0.0])
    g_zero_sigma = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    result.extras.update(
        {
            "order": order,
            "g_zero": g_zero,
            "g_zero_sigma": g_zero_sigma,
            "gamma_bar_over_2pi_hz": result.value("gamma_bar") / (2 * math.pi),
        }
    )
    logger.info(
        f"[Fitting] order {order}: g(0)={g_zero:.4f}, gamma_bar/2pi={result.extras['gamma_bar_over_2pi_hz']:.1f} Hz"
    )
    return result
