"""
Count statistics per interval and statistical burst rejection.

A record is discarded when it holds an interval whose count is so unlikely
under the null model that fewer than epsilon such intervals are expected in
the whole run.
"""

import math
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from ..errors import ConfigError
from ..schemas import CountModel, RejectionReason
from ..tagstream import DaqRecord, TagStream, ensure_sorted
from ..utils import get_logger
from .schemas import BurstPolicy, ConditioningReport, CountDistribution, WindowThreshold


logger = get_logger("conditioning")


def log_count_probability(k, lam: float, model: CountModel):
    """log P(k, lambda) for the thermal (Bose-Einstein) or Poisson model."""
    k = np.asarray(k, dtype=float)
    if lam == 0:
        return np.where(k == 0, 0.0, -np.inf)
    if CountModel(model) == CountModel.thermal:
        return k * math.log(lam) - (k + 1) * math.log1p(lam)
    return k * math.log(lam) - lam - gammaln(k + 1)


def burst_threshold(lam: float, n_intervals: int, epsilon: float, model: CountModel = CountModel.thermal) -> int:
    """
    Smallest count k in the upper tail with n_intervals * P(k, lambda) < epsilon.

    The search starts at max(1, floor(lambda) + 1).
    """
    if lam < 0 or n_intervals < 1 or epsilon <= 0:
        raise ConfigError("burst_threshold needs lambda >= 0, n_intervals >= 1, epsilon > 0")
    if lam == 0:
        return 1
    log_target = math.log(epsilon) - math.log(n_intervals)
    k = max(1, math.floor(lam) + 1)
    while float(log_count_probability(k, lam, model)) >= log_target:
        k += 1
    return k


def expected_count_distribution(lam: float, n_intervals: int, k_max: int, model: CountModel = CountModel.thermal) -> np.ndarray:
    """Expected occupancy N P(k, lambda) for k = 0..k_max."""
    k = np.arange(k_max + 1)
    return n_intervals * np.exp(log_count_probability(k, lam, model))


def count_distribution(stream: TagStream, window_ns: int, span_ns: int | None = None) -> CountDistribution:
    """
    Histogram of counts over consecutive disjoint windows of [0, span).

    The final partial window is dropped.
    """
    if window_ns <= 0:
        raise ConfigError("window_ns must be positive")
    span = stream.duration_ns if span_ns is None else span_ns
    n_intervals = span // window_ns
    times = stream.timestamps[stream.timestamps < n_intervals * window_ns]
    _, per_interval = np.unique(times // window_ns, return_counts=True)
    occupancy = np.bincount(per_interval, minlength=1) if len(per_interval) else np.zeros(1, dtype=np.int64)
    occupancy[0] += n_intervals - len(per_interval)
    return CountDistribution(window_ns=window_ns, n_intervals=int(n_intervals), occupancy=occupancy.tolist())


def _records_over_threshold(
    times: np.ndarray,
    record_of_tag: np.ndarray,
    starts: np.ndarray,
    full_intervals: np.ndarray,
    window_ns: int,
    k_thr: int,
) -> np.ndarray:
    local = (times - starts[record_of_tag]) // window_ns
    inside = local < full_intervals[record_of_tag]
    stride = int(full_intervals.max()) + 1
    keys = record_of_tag[inside].astype(np.int64) * stride + local[inside]
    keys, counts = np.unique(keys, return_counts=True)
    return np.unique(keys[counts >= k_thr] // stride)


def reject_bursts(
    stream: TagStream,
    records: Sequence[DaqRecord],
    policy: BurstPolicy,
    afterpulses_removed: int = 0,
) -> tuple[list[DaqRecord], ConditioningReport]:
    """
    Mark records that contain an improbably full interval as invalid.

    Args:
        stream: Afterpulse-filtered stream
        records: Tiling of the stream
        policy: Windows, epsilon and null model
        afterpulses_removed: Carried into the report

    Returns:
        (updated records, report)
    """
    ensure_sorted(stream)
    records = list(records)
    report = ConditioningReport(afterpulses_removed=afterpulses_removed, total_records=len(records))
    if not records or stream.duration_ns == 0:
        return records, report

    starts = np.array([r.start_ns for r in records], dtype=np.int64)
    lengths = np.array([r.length_ns for r in records], dtype=np.int64)
    times = stream.timestamps
    record_of_tag = np.searchsorted(starts, times, side="right") - 1
    rate_per_ns = len(stream) / stream.duration_ns

    for window in policy.windows_ns:
        full = lengths // window
        n_intervals = int(full.sum())
        lam = rate_per_ns * window
        k_thr = burst_threshold(lam, max(n_intervals, 1), policy.epsilon, policy.model)
        newly = 0
        if n_intervals and len(times):
            for idx in _records_over_threshold(times, record_of_tag, starts, full, window, k_thr).tolist():
                if records[idx].valid:
                    records[idx] = records[idx].reject(RejectionReason.burst)
                    report.rejected_record_indices.append(idx)
                    newly += 1
        report.windows.append(
            WindowThreshold(window_ns=window, lam=lam, n_intervals=n_intervals, k_thr=k_thr, records_rejected=newly)
        )
        logger.info(f"[Conditioning] window {window} ns: lambda={lam:.3g}, k_thr={k_thr}, rejected {newly}")

    report.rejected_record_indices.sort()
    report.records_rejected = len(report.rejected_record_indices)
    return records, report
