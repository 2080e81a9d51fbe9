"""
Data cleaning: afterpulse removal and statistical burst rejection.
"""

from .schemas import DEFAULT_WINDOWS_NS, BurstPolicy, ConditioningReport, CountDistribution, WindowThreshold
from .afterpulse import AFTERPULSE_WINDOW_NS, filter_afterpulses
from .bursts import (
    burst_threshold,
    count_distribution,
    expected_count_distribution,
    log_count_probability,
    reject_bursts,
)
from .pipeline import condition_stream

__all__ = [
    "AFTERPULSE_WINDOW_NS",
    "DEFAULT_WINDOWS_NS",
    "BurstPolicy",
    "ConditioningReport",
    "CountDistribution",
    "WindowThreshold",
    "burst_threshold",
    "condition_stream",
    "count_distribution",
    "expected_count_distribution",
    "filter_afterpulses",
    "log_count_probability",
    "reject_bursts",
]
