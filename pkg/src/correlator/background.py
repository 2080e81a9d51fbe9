"""
Background ratio and exact background correction of coherences.

Uncorrelated Poisson background at ratio epsilon to the sideband mixes the
true coherences of every lower order into the measured one:

    g3_exp = (g3 + eps * sum G2_3 + 3 eps^2 + eps^3) / (1 + eps)^3

and likewise at orders 2 and 4. Each relation is affine in the highest
order, so correction inverts them from order 2 upwards using the already
corrected lower orders.
"""

import itertools
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..utils import get_logger
from .schemas import BackgroundRatio


logger = get_logger("correlator")

EPSILON_BAND = (0.04, 0.2)


def estimate_epsilon(background_rate: float, sideband_rate: float) -> BackgroundRatio:
    """Ratio of fitted background to fitted sideband rate."""
    if not sideband_rate > 0:
        raise ConfigError(f"sideband rate must be positive, got {sideband_rate}")
    if background_rate < 0:
        raise ConfigError(f"background rate must be non-negative, got {background_rate}")
    epsilon = background_rate / sideband_rate
    in_band = EPSILON_BAND[0] <= epsilon <= EPSILON_BAND[1]
    if not in_band:
        logger.warning(f"[Correlator] epsilon={epsilon:.3g} outside the usual {EPSILON_BAND[0]}-{EPSILON_BAND[1]} band")
    return BackgroundRatio(epsilon=epsilon, in_operating_band=in_band)


def _check_epsilon(epsilon: float) -> None:
    if not (epsilon >= 0 and np.isfinite(epsilon)):
        raise ConfigError(f"epsilon must be finite and >= 0, got {epsilon}")


def _sum(values: Sequence) -> np.ndarray:
    return sum(np.asarray(v, dtype=float) for v in values)


# Point values. g2_values / g3_values are the lower-order true coherences
# at the delay combinations that the background tags leave behind.

def forward_mix_g2(g2, epsilon: float):
    _check_epsilon(epsilon)
    return (np.asarray(g2, dtype=float) + 2 * epsilon + epsilon**2) / (1 + epsilon) ** 2


def correct_g2(g2_exp, epsilon: float):
    _check_epsilon(epsilon)
    g = np.asarray(g2_exp, dtype=float)
    return g + 2 * (g - 1) * epsilon + (g - 1) * epsilon**2


def forward_mix_g3(g3, g2_values: Sequence, epsilon: float):
    """g2_values: g2(tau1), g2(tau2), g2(tau1 + tau2)."""
    _check_epsilon(epsilon)
    if len(g2_values) != 3:
        raise DataError("order-3 mixing needs three order-2 values")
    e = epsilon
    return (np.asarray(g3, dtype=float) + e * _sum(g2_values) + 3 * e**2 + e**3) / (1 + e) ** 3


def correct_g3(g3_exp, g2_values: Sequence, epsilon: float):
    _check_epsilon(epsilon)
    if len(g2_values) != 3:
        raise DataError("order-3 correction needs three order-2 values")
    e = epsilon
    return np.asarray(g3_exp, dtype=float) * (1 + e) ** 3 - e * _sum(g2_values) - 3 * e**2 - e**3


def forward_mix_g4(g4, g3_values: Sequence, g2_values: Sequence, epsilon: float):
    """
    g3_values: g3(t1, t2), g3(t1 + t2, t3), g3(t1, t2 + t3), g3(t2, t3).
    g2_values: g2 at t1, t2, t3, t1 + t2, t2 + t3 and t1 + t2 + t3.
    """
    _check_epsilon(epsilon)
    if len(g3_values) != 4 or len(g2_values) != 6:
        raise DataError("order-4 mixing needs four order-3 and six order-2 values")
    e = epsilon
    return (
        np.asarray(g4, dtype=float) + e * _sum(g3_values) + e**2 * _sum(g2_values) + 4 * e**3 + e**4
    ) / (1 + e) ** 4


def correct_g4(g4_exp, g3_values: Sequence, g2_values: Sequence, epsilon: float):
    _check_epsilon(epsilon)
    if len(g3_values) != 4 or len(g2_values) != 6:
        raise DataError("order-4 correction needs four order-3 and six order-2 values")
    e = epsilon
    return (
        np.asarray(g4_exp, dtype=float) * (1 + e) ** 4
        - e * _sum(g3_values)
        - e**2 * _sum(g2_values)
        - 4 * e**3
        - e**4
    )


def _centre_lookup(grid: np.ndarray, *axes: tuple[np.ndarray, ...], order: int) -> np.ndarray:
    """
    Grid values at summed delays, one tuple of bin-index arrays per grid axis.

    A sum of m delays is centred at (sum of indices + m/2) bin widths, which
    is bin s + (m-1)/2 for odd m and halfway between two bins for even m.
    """
    per_axis = []
    for axis, parts in enumerate(axes):
        s = sum(parts)
        m = len(parts)
        if m % 2:
            picks = [(s + (m - 1) // 2, 1.0)]
        else:
            picks = [(s + m // 2 - 1, 0.5), (s + m // 2, 0.5)]
        needed = int(max(np.max(p[0]) for p in picks)) + 1
        if needed > grid.shape[axis]:
            raise DataError(
                f"missing lower-order slices: order-{grid.ndim + 1} grid has {grid.shape[axis]} bins on "
                f"axis {axis}, order-{order} correction needs {needed}"
            )
        per_axis.append(picks)

    out = 0.0
    for combo in itertools.product(*per_axis):
        index = tuple(p[0] for p in combo)
        weight = float(np.prod([p[1] for p in combo]))
        out = out + weight * grid[index]
    return out


def _lower_terms(order: int, lower: Mapping[int, np.ndarray], n_bins: int) -> tuple[list, list]:
    """Order-3 and order-2 values that mix into an order-`order` grid."""
    if order == 2:
        return [], []
    idx = np.indices((n_bins,) * (order - 1))
    for m in range(2, order):
        if m not in lower:
            raise DataError(f"missing lower-order slices: order {m} is required for order {order}")
    g2 = np.asarray(lower[2], dtype=float)
    if order == 3:
        i, j = idx
        g2_values = [
            _centre_lookup(g2, (i,), order=3),
            _centre_lookup(g2, (j,), order=3),
            _centre_lookup(g2, (i, j), order=3),
        ]
        return [], g2_values
    i, j, k = idx
    g3 = np.asarray(lower[3], dtype=float)
    g3_values = [
        _centre_lookup(g3, (i,), (j,), order=4),
        _centre_lookup(g3, (i, j), (k,), order=4),
        _centre_lookup(g3, (i,), (j, k), order=4),
        _centre_lookup(g3, (j,), (k,), order=4),
    ]
    g2_values = [
        _centre_lookup(g2, (i,), order=4),
        _centre_lookup(g2, (j,), order=4),
        _centre_lookup(g2, (k,), order=4),
        _centre_lookup(g2, (i, j), order=4),
        _centre_lookup(g2, (j, k), order=4),
        _centre_lookup(g2, (i, j, k), order=4),
    ]
    return g3_values, g2_values


def _cube(order: int, grid: np.ndarray) -> int:
    grid = np.asarray(grid)
    if grid.ndim != order - 1 or len(set(grid.shape)) > 1:
        raise ConfigError(f"order-{order} grid must be a cube with {order - 1} axes, got shape {grid.shape}")
    return grid.shape[0]


def forward_mix(order: int, g_true: np.ndarray, lower: Mapping[int, np.ndarray], epsilon: float) -> np.ndarray:
    """
    Measured coherence grid for a true grid mixed with background.

    Args:
        order: 2, 3 or 4
        g_true: True coherence on the binned delay grid
        lower: True coherence grids of orders 2..order-1; order m must
            cover (order - m + 1) times the delay range of g_true
        epsilon: Background ratio
    """
    n_bins = _cube(order, g_true)
    if order == 2:
        return forward_mix_g2(g_true, epsilon)
    g3_values, g2_values = _lower_terms(order, lower, n_bins)
    if order == 3:
        return forward_mix_g3(g_true, g2_values, epsilon)
    if order == 4:
        return forward_mix_g4(g_true, g3_values, g2_values, epsilon)
    raise ConfigError(f"order must be 2, 3 or 4, got {order}")


def _supported_bins(order: int, lower: Mapping[int, np.ndarray]) -> int:
    for m in range(2, order):
        if m not in lower:
            raise DataError(f"missing lower-order slices: order {m} is required for order {order}")
    if order == 3:
        return len(lower[2]) // 2
    return min(len(lower[3]) // 2, len(lower[2]) // 3)


def correct_background(measured: Mapping[int, np.ndarray], epsilon: float) -> dict[int, np.ndarray]:
    """
    Correct measured coherence grids of every supplied order.

    Orders are corrected in ascending order, each using the corrected grids
    below it. An intermediate order is cut to the leading cube its own lower
    orders cover; the highest order must be covered in full, so order 2 needs
    twice (order 3) or four times (order 4) its delay range and order 3 twice
    the order-4 range.
    """
    _check_epsilon(epsilon)
    orders = sorted(measured)
    if not orders or any(o not in (2, 3, 4) for o in orders):
        raise ConfigError(f"orders must be drawn from 2, 3 and 4, got {orders}")
    corrected: dict[int, np.ndarray] = {}
    for order in orders:
        grid = np.asarray(measured[order], dtype=float)
        n_bins = _cube(order, grid)
        if order == 2:
            corrected[2] = correct_g2(grid, epsilon)
            continue
        supported = _supported_bins(order, corrected)
        if supported < n_bins:
            if order == orders[-1]:
                raise DataError(
                    f"missing lower-order slices: order-{order} grid of {n_bins} bins, lower orders cover {supported}"
                )
            grid = grid[(slice(0, supported),) * (order - 1)]
            n_bins = supported
        g3_values, g2_values = _lower_terms(order, corrected, n_bins)
        if order == 3:
            corrected[3] = correct_g3(grid, g2_values, epsilon)
        else:
            corrected[4] = correct_g4(grid, g3_values, g2_values, epsilon)
    return corrected
