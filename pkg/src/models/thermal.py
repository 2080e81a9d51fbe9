"""
Phonon coherences of a thermal state and of heralded (k-phonon
subtracted or added) states.

The closed forms are sums of exponentials in the consecutive delays. Each
term is stored as a coefficient and a multiplicity per delay, so the same
table drives the point evaluation and the exact bin average.
"""

from itertools import permutations
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..schemas import HeraldSide, Ordering


# order -> [(coefficient, multiplicity of each delay in the exponent)]
COHERENCE_TERMS: dict[int, list[tuple[float, tuple[int, ...]]]] = {
    2: [(1.0, (1,))],
    3: [(1.0, (1, 0)), (1.0, (0, 1)), (3.0, (1, 1))],
    4: [
        (1.0, (1, 0, 0)),
        (1.0, (0, 1, 0)),
        (1.0, (0, 0, 1)),
        (3.0, (1, 1, 0)),
        (3.0, (0, 1, 1)),
        (1.0, (1, 0, 1)),
        (9.0, (1, 1, 1)),
        (4.0, (1, 2, 1)),
    ],
}

MAX_ORACLE_ORDER = 6


def coherence_terms(order: int) -> list[tuple[float, tuple[int, ...]]]:
    """Exponential expansion of g^(order) - 1."""
    if order not in COHERENCE_TERMS:
        raise ConfigError(f"closed form available for orders 2-4, got {order}")
    return COHERENCE_TERMS[order]


def _as_delays(order: int, delays) -> list[np.ndarray]:
    if np.isscalar(delays) or (order == 2 and isinstance(delays, np.ndarray)):
        delays = [delays]
    taus = [np.asarray(d, dtype=float) for d in delays]
    if len(taus) != order - 1:
        raise ConfigError(f"order {order} takes {order - 1} delays, got {len(taus)}")
    for tau in taus:
        if np.any(tau < 0) or np.any(np.isnan(tau)):
            raise ConfigError("delays must be non-negative")
    return taus


def thermal_coherence(order: int, delays, gamma_bar: float):
    """
    g^(n) of a thermal state at consecutive delays (seconds).

    Delays may be arrays (broadcast together) and may be +inf.

    Args:
        order: 2, 3 or 4
        delays: n - 1 consecutive delays; a bare number is accepted for order 2
        gamma_bar: Total damping rate (rad/s)
    """
    terms = coherence_terms(order)
    taus = _as_delays(order, delays)
    total = 1.0
    for coef, mult in terms:
        exponent = sum(m * tau for m, tau in zip(mult, taus) if m)
        total = total + coef * np.exp(-gamma_bar * exponent)
    return float(total) if np.ndim(total) == 0 else total


def _bin_average_exp(rate: float, lower, width):
    """Average of e^{-rate t} over [lower, lower + width)."""
    lower = np.asarray(lower, dtype=float)
    width = np.asarray(width, dtype=float)
    x = rate * width
    safe = np.where(x > 0, x, 1.0)
    factor = np.where(x > 0, -np.expm1(-safe) / safe, 1.0)
    return np.exp(-rate * lower) * factor


def binned_thermal_coherence(order: int, lower_edges: Sequence, widths: Sequence, gamma_bar: float):
    """
    Exact average of the thermal coherence over rectangular delay bins.

    Args:
        order: 2, 3 or 4
        lower_edges: n - 1 arrays of bin lower edges (seconds)
        widths: n - 1 bin widths (seconds); zero means a point evaluation
        gamma_bar: Total damping rate (rad/s)
    """
    terms = coherence_terms(order)
    edges = _as_delays(order, lower_edges)
    if len(widths) != order - 1:
        raise ConfigError("one bin width per delay axis is required")
    total = 1.0
    for coef, mult in terms:
        product = 1.0
        for m, lo, w in zip(mult, edges, widths):
            if m:
                product = product * _bin_average_exp(m * gamma_bar, lo, w)
        total = total + coef * product
    return float(total) if np.ndim(total) == 0 else total


def permanent(matrix: np.ndarray) -> float:
    """Permanent by full permutation sum."""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    rows = np.arange(n)
    return float(sum(np.prod(matrix[rows, list(perm)]) for perm in permutations(range(n))))


def wick_oracle(
    order: int,
    times: Sequence[float],
    n_ac: float,
    gamma_bar: float,
    ordering: Ordering = Ordering.normal,
) -> float:
    """
    Brute-force normalized coherence at absolute times via Wick's theorem.

    The numerator is the permanent of the pair-correlation matrix
    n_eff e^{-gamma |t_i - t_j| / 2}; dividing by n_eff^n normalizes it.
    """
    if not 1 <= order <= MAX_ORACLE_ORDER:
        raise ConfigError(f"wick_oracle supports orders 1-{MAX_ORACLE_ORDER}, got {order}")
    t = np.asarray(times, dtype=float)
    if t.shape != (order,) or not np.all(np.isfinite(t)):
        raise ConfigError(f"wick_oracle needs {order} finite times")
    n_eff = n_ac + 1.0 if ordering == Ordering.antinormal else n_ac
    kernel = np.exp(-0.5 * gamma_bar * np.abs(t[:, None] - t[None, :]))
    if n_eff <= 0:
        # vacuum normal ordering: scale cancels, keep the normalized value
        return permanent(kernel)
    return permanent(n_eff * kernel) / n_eff**order


def _times_from_delays(delays: Sequence[float]) -> list[float]:
    return [0.0] + list(np.cumsum(np.asarray(delays, dtype=float)))


def _oracle_at(order: int, delays: Sequence[float], gamma_bar: float) -> float:
    return wick_oracle(order, _times_from_delays(delays), 1.0, gamma_bar)


def conditional_g2(k: int, tau, gamma_bar: float):
    """Second-order coherence of a k-phonon subtracted (or added) thermal state."""
    if k < 1:
        raise ConfigError("k must be at least 1")
    e = np.exp(-gamma_bar * np.asarray(tau, dtype=float))
    value = (1.0 + (k + 1) * e) / (1.0 + k * e)
    return float(value) if np.ndim(value) == 0 else value


def conditional_g2_from_coherences(k: int, tau: float, gamma_bar: float) -> float:
    """Ratio-of-coherences form of conditional_g2, evaluated with wick_oracle."""
    return conditional_coherence(2, k, [tau], gamma_bar)


def conditional_coherence(n: int, k: int, delays: Sequence[float], gamma_bar: float) -> float:
    """
    n-th order coherence of a k-phonon subtracted thermal state.

    g^(k+n)(0^k, tau) g^(k)(0)^(n-1) / [g^(k+1)(0) prod_p g^(k+1)(0^(k-1), t_p)]
    with t_p the cumulative delays. Identical for the added state.
    """
    if k < 1 or n < 2:
        raise ConfigError("need k >= 1 and n >= 2")
    if k + n > MAX_ORACLE_ORDER:
        raise ConfigError(f"k + n must not exceed {MAX_ORACLE_ORDER}")
    delays = [float(d) for d in delays]
    if len(delays) != n - 1:
        raise ConfigError(f"order {n} takes {n - 1} delays")
    zeros = [0.0] * k
    numerator = _oracle_at(k + n, zeros + delays, gamma_bar) * _oracle_at(k, [0.0] * (k - 1), gamma_bar) ** (n - 1)
    denominator = _oracle_at(k + 1, zeros, gamma_bar)
    for t_p in np.cumsum(delays):
        denominator *= _oracle_at(k + 1, [0.0] * (k - 1) + [float(t_p)], gamma_bar)
    return numerator / denominator


def occupancy_ratio_from_coherences(k: int, tau: float, gamma_bar: float) -> float:
    """g^(k+1)(0^(k-1), tau) / g^(k)(0): heralded occupancy relative to the steady state."""
    if k < 1:
        raise ConfigError("k must be at least 1")
    return _oracle_at(k + 1, [0.0] * (k - 1) + [tau], gamma_bar) / _oracle_at(k, [0.0] * (k - 1), gamma_bar)


def conditional_occupancy(k: int, side: HeraldSide, tau, n_ac: float, gamma_bar: float):
    """
    Mean occupancy a time tau after heralding k phonon subtractions or additions.

    subtracted: n (1 + k e^{-gamma tau})
    added:      (n + 1)(1 + k e^{-gamma tau}) - 1
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    boost = 1.0 + k * np.exp(-gamma_bar * np.asarray(tau, dtype=float))
    if HeraldSide(side) == HeraldSide.subtracted:
        value = n_ac * boost
    else:
        value = (n_ac + 1.0) * boost - 1.0
    return float(value) if np.ndim(value) == 0 else value


def occupancy_ratio(k: int, tau, gamma_bar: float):
    """Closed form of the heralded-to-steady-state ratio, 1 + k e^{-gamma tau}."""
    value = 1.0 + k * np.exp(-gamma_bar * np.asarray(tau, dtype=float))
    return float(value) if np.ndim(value) == 0 else value
