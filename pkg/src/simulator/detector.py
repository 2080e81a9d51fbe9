"""
Detector artifacts: dead time, one-generation afterpulsing and burst trains.
"""

import numpy as np

from ..tagstream import TagStream, ensure_sorted, holdoff_mask
from ..utils import get_logger
from .schemas import DetectorModel


logger = get_logger("simulator")


def _channel_with_afterpulses(times: np.ndarray, det: DetectorModel, duration_ns: int, rng: np.random.Generator) -> np.ndarray:
    accepted = times[holdoff_mask(times, det.dead_time_ns)]
    if det.afterpulse_prob <= 0 or len(accepted) == 0:
        return accepted
    spawned = rng.random(len(accepted)) < det.afterpulse_prob
    echoes = accepted[spawned] + det.afterpulse_delay_ns
    echoes = echoes[echoes < duration_ns]
    merged = np.sort(np.concatenate([accepted, echoes]), kind="stable")
    return merged[holdoff_mask(merged, det.dead_time_ns)]


def _burst_trains(det: DetectorModel, stream: TagStream, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, list[int]]:
    burst = det.burst_injection
    if burst is None or burst.rate_per_s == 0 or stream.duration_ns == 0:
        return np.empty(0, np.int64), np.empty(0, np.uint8), []
    count = rng.poisson(burst.rate_per_s * stream.duration_ns * 1e-9)
    starts = np.sort(rng.integers(0, stream.duration_ns, count))
    period = 1e9 / burst.intra_rate
    offsets = np.floor(np.arange(0.0, burst.duration_ns, period)).astype(np.int64)
    times, chans = [np.empty(0, np.int64)], [np.empty(0, np.uint8)]
    for start in starts:
        train = start + offsets
        train = train[train < stream.duration_ns]
        times.append(train)
        chans.append(np.full(len(train), rng.integers(0, stream.channel_count), dtype=np.uint8))
    return np.concatenate(times), np.concatenate(chans), [int(s) for s in starts]


def apply_detector_artifacts(stream: TagStream, det: DetectorModel, seed) -> TagStream:
    """
    Impose detector behaviour on an ideal click stream.

    Per channel, clicks within the dead time of an accepted click are dropped
    and each accepted click may echo once after the afterpulse delay. Burst
    trains are added last and are not subject to dead time.

    Args:
        stream: Sorted ideal stream
        det: Detector model
        seed: int or numpy SeedSequence
    """
    ensure_sorted(stream)
    rng = np.random.default_rng(seed)

    times, chans = [], []
    for channel in range(stream.channel_count):
        kept = _channel_with_afterpulses(stream.channel_view(channel), det, stream.duration_ns, rng)
        times.append(kept)
        chans.append(np.full(len(kept), channel, dtype=np.uint8))

    burst_times, burst_chans, burst_starts = _burst_trains(det, stream, rng)
    times.append(burst_times)
    chans.append(burst_chans)

    out = TagStream.from_unsorted(
        np.concatenate(times),
        np.concatenate(chans),
        duration_ns=stream.duration_ns,
        channel_count=stream.channel_count,
        metadata={
            **stream.metadata,
            "dead_time_ns": det.dead_time_ns,
            "afterpulse_prob": det.afterpulse_prob,
            "afterpulse_delay_ns": det.afterpulse_delay_ns,
            "burst_starts_ns": burst_starts,
        },
    )
    if burst_starts:
        logger.info(f"[Simulator] injected {len(burst_starts)} burst train(s)")
    return out
