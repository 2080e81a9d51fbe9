"""
Conditioned-count estimators for heralded states.

A herald is any k-chain of clicks in one valid record whose k-1 gaps are
all below the herald window; its time t0 is the last herald click. Clicks
following t0 inside the analysis window are binned by their delay from t0.
Overlapping heralds all count, in numerator and normalization alike.
"""

from typing import Sequence

import numpy as np

from ..correlator import grow_chains, successor_table, valid_record_tags
from ..errors import ConfigError, DataError
from ..models import binned_thermal_coherence
from ..schemas import DriveSide, herald_side_for
from ..tagstream import DaqRecord, TagStream, ensure_sorted
from ..utils import get_logger
from .schemas import HeraldCurve, HeraldSpec


logger = get_logger("postselect")

LOW_COUNT_LIMIT = 100
MAX_G2_HERALDS = 2


class _Tags:
    """Valid-record tags with their record bounds."""

    def __init__(self, stream: TagStream, records: Sequence[DaqRecord]):
        ensure_sorted(stream)
        self.times, self.channels, self.record_of = valid_record_tags(stream, records)
        self.ends = np.array([r.end_ns for r in records], dtype=np.int64)


def _herald_indices(tags: _Tags, k: int, window_ns: int, analysis_ns: int) -> np.ndarray:
    """Index of the last click of every qualifying herald chain, with multiplicity."""
    n = len(tags.times)
    if n == 0:
        return np.empty(0, np.int64)
    offsets, successors = successor_table(tags.times, tags.record_of, window_ns)
    last = grow_chains(np.arange(n), offsets, successors, k)[-1]
    fits = tags.times[last] + analysis_ns <= tags.ends[tags.record_of[last]]
    return np.sort(last[fits], kind="stable")


def herald_events(stream: TagStream, records: Sequence[DaqRecord], spec: HeraldSpec) -> np.ndarray:
    """Herald times t0 (ns), one per qualifying k-chain, sorted."""
    tags = _Tags(stream, records)
    return tags.times[_herald_indices(tags, spec.k, spec.herald_window_ns, spec.max_delay_ns)]


def _conditioned_counts(tags: _Tags, k: int, spec: HeraldSpec) -> tuple[np.ndarray, int]:
    heralds = _herald_indices(tags, k, spec.herald_window_ns, spec.max_delay_ns)
    if len(heralds) == 0:
        raise DataError(f"no herald events with k={k} and a {spec.herald_window_ns} ns window")
    offsets, successors = successor_table(tags.times, tags.record_of, spec.max_delay_ns)
    start, follow = grow_chains(heralds, offsets, successors, 2)
    delays = tags.times[follow] - tags.times[start]
    counts = np.bincount(delays // spec.bin_width_ns, minlength=spec.n_bins)
    return counts, len(heralds)


def _normalized(counts: np.ndarray, spec: HeraldSpec) -> tuple[np.ndarray, np.ndarray]:
    far = spec.lower_edges_ns >= spec.resolved_normalization_ns()
    far_total = counts[far].sum()
    if far_total == 0:
        raise DataError("no conditioned counts beyond the normalization delay")
    plateau = far_total / far.sum()
    ratio = counts / plateau
    sigma = ratio * np.sqrt(1.0 / np.maximum(counts, 1) + 1.0 / far_total)
    return ratio, sigma


def rate_theory(k: int, spec: HeraldSpec) -> np.ndarray:
    """
    Bin-averaged g^(k+1)(herald gaps, tau) / g^(k)(herald gaps), each herald
    gap averaged over [0, herald_window).
    """
    if spec.gamma_bar is None:
        raise ConfigError("gamma_bar is required for the theory curve")
    lower = spec.lower_edges_ns * 1e-9
    width = spec.bin_width_ns * 1e-9
    window = spec.herald_window_ns * 1e-9
    numerator = binned_thermal_coherence(
        k + 1, [0.0] * (k - 1) + [lower], [window] * (k - 1) + [width], spec.gamma_bar
    )
    if k == 1:
        return np.asarray(numerator)
    denominator = binned_thermal_coherence(k, [0.0] * (k - 1), [window] * (k - 1), spec.gamma_bar)
    return np.asarray(numerator) / denominator


def _low_count_flags(counts: np.ndarray, label: str) -> list[str]:
    low = np.flatnonzero(counts < LOW_COUNT_LIMIT)
    if len(low) == 0:
        return []
    logger.warning(f"[PostSelect] {len(low)} {label} bin(s) below {LOW_COUNT_LIMIT} conditioned counts")
    return [f"low_counts:{int(i)}" for i in low]


def conditioned_rate_curve(
    stream: TagStream,
    records: Sequence[DaqRecord],
    spec: HeraldSpec,
    side: DriveSide,
) -> HeraldCurve:
    """
    Post-herald click rate relative to its value at long delay.

    Anti-Stokes heralds give n^(-k)(tau) / n_ac, Stokes heralds
    (n^(+k)(tau) + 1) / (n_ac + 1); both relax from 1 + k towards 1.
    """
    tags = _Tags(stream, records)
    counts, heralds = _conditioned_counts(tags, spec.k, spec)
    value, sigma = _normalized(counts, spec)
    theory = rate_theory(spec.k, spec).tolist() if spec.gamma_bar is not None else None
    logger.info(
        f"[PostSelect] k={spec.k}: {heralds} heralds, {int(counts.sum())} conditioned counts, "
        f"initial ratio {value[0]:.3f}"
    )
    return HeraldCurve(
        kind="occupancy_ratio",
        k=spec.k,
        side=herald_side_for(DriveSide(side)),
        tau_ns=spec.lower_edges_ns.tolist(),
        bin_width_ns=spec.bin_width_ns,
        value=value.tolist(),
        sigma=sigma.tolist(),
        theory=theory,
        herald_count=heralds,
        conditioned_counts=counts.tolist(),
        normalization_delay_ns=spec.resolved_normalization_ns(),
        flags=_low_count_flags(counts, "rate-curve"),
    )


def conditioned_g2_curve(
    stream: TagStream,
    records: Sequence[DaqRecord],
    spec: HeraldSpec,
    side: DriveSide,
) -> HeraldCurve:
    """
    Second-order coherence of the heralded state.

    Conditioning on k heralds plus one more click inside the herald window,
    then dividing by the k-herald rate curve, gives
    g^(k+2)(0^k, tau) g^(k)(0) / [g^(k+1)(0^k) g^(k+1)(0^(k-1), tau)].
    """
    if spec.k > MAX_G2_HERALDS:
        raise ConfigError(f"conditional g2 needs order k + 2 <= 4, got k={spec.k}")
    tags = _Tags(stream, records)
    pairs, pair_heralds = _conditioned_counts(tags, spec.k + 1, spec)
    singles, _ = _conditioned_counts(tags, spec.k, spec)
    upper, upper_sigma = _normalized(pairs, spec)
    lower, lower_sigma = _normalized(singles, spec)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(lower > 0, upper / lower, np.nan)
        sigma = np.abs(value) * np.sqrt(
            (upper_sigma / np.where(upper > 0, upper, 1.0)) ** 2 + (lower_sigma / np.where(lower > 0, lower, 1.0)) ** 2
        )
    theory = None
    if spec.gamma_bar is not None:
        theory = (rate_theory(spec.k + 1, spec) / rate_theory(spec.k, spec)).tolist()
    logger.info(f"[PostSelect] conditional g2, k={spec.k}: {pair_heralds} herald pairs, first bin {value[0]:.3f}")
    return HeraldCurve(
        kind="conditional_g2",
        k=spec.k,
        side=herald_side_for(DriveSide(side)),
        tau_ns=spec.lower_edges_ns.tolist(),
        bin_width_ns=spec.bin_width_ns,
        value=value.tolist(),
        sigma=sigma.tolist(),
        theory=theory,
        herald_count=pair_heralds,
        conditioned_counts=pairs.tolist(),
        normalization_delay_ns=spec.resolved_normalization_ns(),
        flags=_low_count_flags(pairs, "conditional-g2"),
    )
