"""
n-fold coincidence histograms from tag streams.

Tuples are chains of tag indices i_1 < i_2 < ... < i_n inside one valid
record whose consecutive delays are all below max_delay. The successor
table of every tag is built once by a vectorized shift scan; chains are
then grown level by level and binned with bincount. Starting tags are
split into chunks that are histogrammed independently and summed.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..schemas import ChannelMode
from ..tagstream import DaqRecord, TagStream, ensure_sorted
from ..utils import get_logger
from .schemas import SUPPORTED_ORDERS, CoincidenceHistogram, axis_length


logger = get_logger("correlator")

CHUNK_STARTS = 1 << 16
PLATEAU_GAMMA_MULTIPLE = 10.0


def valid_record_tags(stream: TagStream, records: Sequence[DaqRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Tags that fall inside valid records.

    Returns:
        (timestamps, channels, record index per tag)
    """
    if not records:
        empty = np.empty(0, np.int64)
        return empty, np.empty(0, np.uint8), empty
    starts = np.array([r.start_ns for r in records], dtype=np.int64)
    ends = np.array([r.end_ns for r in records], dtype=np.int64)
    valid = np.array([r.valid for r in records], dtype=bool)
    times = stream.timestamps
    record_of = np.searchsorted(starts, times, side="right") - 1
    idx = np.flatnonzero(record_of >= 0)
    rec = record_of[idx]
    idx = idx[(times[idx] < ends[rec]) & valid[rec]]
    return times[idx], stream.channels[idx], record_of[idx]


def successor_table(
    times: np.ndarray,
    record_of: np.ndarray,
    max_delay_ns: int,
    channels: Optional[np.ndarray] = None,
    cross_only: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """
    CSR table of admissible next tags.

    The successors of tag i are successors[offsets[i]:offsets[i + 1]], in
    index order. A successor lies in the same record, strictly later in
    index and less than max_delay_ns after tag i; in cross-only mode it
    also sits on a different channel.
    """
    n = len(times)
    firsts, seconds = [], []
    active = np.arange(max(n - 1, 0))
    shift = 1
    while len(active):
        active = active[active + shift < n]
        nxt = active + shift
        ok = (times[nxt] - times[active] < max_delay_ns) & (record_of[nxt] == record_of[active])
        active, nxt = active[ok], nxt[ok]
        if cross_only and channels is not None:
            keep = channels[nxt] != channels[active]
            firsts.append(active[keep])
            seconds.append(nxt[keep])
        else:
            firsts.append(active)
            seconds.append(nxt)
        shift += 1

    first = np.concatenate(firsts) if firsts else np.empty(0, np.int64)
    second = np.concatenate(seconds) if seconds else np.empty(0, np.int64)
    order = np.lexsort((second, first))
    first, second = first[order], second[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(first, minlength=n), out=offsets[1:])
    return offsets, second


def grow_chains(starts: np.ndarray, offsets: np.ndarray, successors: np.ndarray, length: int) -> list[np.ndarray]:
    """
    All chains of the given length that begin at the given tags.

    Returns:
        One index array per chain position
    """
    chains = [np.asarray(starts, dtype=np.int64)]
    for _ in range(length - 1):
        last = chains[-1]
        fan = offsets[last + 1] - offsets[last]
        parent = np.repeat(np.arange(len(last)), fan)
        within = np.arange(int(fan.sum())) - np.repeat(np.cumsum(fan) - fan, fan)
        nxt = successors[np.repeat(offsets[last], fan) + within]
        chains = [c[parent] for c in chains] + [nxt]
    return chains


def _bin_chunk(
    starts: np.ndarray,
    times: np.ndarray,
    offsets: np.ndarray,
    successors: np.ndarray,
    order: int,
    bin_width_ns: int,
    n_bins: int,
) -> np.ndarray:
    chains = grow_chains(starts, offsets, successors, order)
    shape = (n_bins,) * (order - 1)
    if len(chains[0]) == 0:
        return np.zeros(int(np.prod(shape)), dtype=np.int64)
    bins = [(times[b] - times[a]) // bin_width_ns for a, b in zip(chains, chains[1:])]
    flat = np.ravel_multi_index(bins, shape)
    return np.bincount(flat, minlength=int(np.prod(shape)))


def _compact(counts: np.ndarray) -> np.ndarray:
    if counts.size == 0 or counts.max() <= np.iinfo(np.uint32).max:
        return counts.astype(np.uint32)
    return counts


def coincidence_histogram(
    stream: TagStream,
    records: Sequence[DaqRecord],
    order: int,
    bin_width_ns: int,
    max_delay_ns: int,
    channel_mode: ChannelMode = ChannelMode.all_pairs,
    workers: int = 1,
) -> CoincidenceHistogram:
    """
    Histogram of consecutive delays over every admissible n-tuple.

    Args:
        stream: Conditioned stream
        records: Record tiling; invalid records are skipped
        order: 2, 3 or 4
        bin_width_ns: Delay bin width
        max_delay_ns: Bound on every consecutive delay
        channel_mode: all_pairs or cross_only
        workers: Thread count for the chunked scan

    Returns:
        CoincidenceHistogram with ceil(max_delay / bin_width) bins per axis
    """
    if order not in SUPPORTED_ORDERS:
        raise ConfigError(f"order must be one of {SUPPORTED_ORDERS}, got {order}")
    if bin_width_ns <= 0 or max_delay_ns <= 0:
        raise ConfigError("bin_width_ns and max_delay_ns must be positive")
    longest = max((r.length_ns for r in records), default=0)
    if records and max_delay_ns > longest:
        raise ConfigError(f"max_delay_ns {max_delay_ns} exceeds the record length {longest}")
    ensure_sorted(stream)

    channel_mode = ChannelMode(channel_mode)
    times, channels, record_of = valid_record_tags(stream, records)
    n_bins = axis_length(max_delay_ns, bin_width_ns)
    offsets, successors = successor_table(
        times, record_of, max_delay_ns, channels, cross_only=channel_mode == ChannelMode.cross_only
    )

    starts = np.arange(len(times))
    chunks = [starts[i : i + CHUNK_STARTS] for i in range(0, len(starts), CHUNK_STARTS)]
    size = n_bins ** (order - 1)
    total = np.zeros(size, dtype=np.int64)

    def run(chunk: np.ndarray) -> np.ndarray:
        return _bin_chunk(chunk, times, offsets, successors, order, bin_width_ns, n_bins)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(run, chunks):
                total += part
    else:
        for chunk in chunks:
            total += run(chunk)

    counts = _compact(total.reshape((n_bins,) * (order - 1)))
    logger.info(
        f"[Correlator] order {order}: {int(total.sum())} tuples from {len(times)} tags, "
        f"{n_bins} bins/axis of {bin_width_ns} ns ({channel_mode.value})"
    )
    return CoincidenceHistogram(
        order=order,
        bin_width_ns=bin_width_ns,
        max_delay_ns=max_delay_ns,
        counts=counts,
        total_tags_used=len(times),
        channel_mode=channel_mode,
        metadata={k: v for k, v in stream.metadata.items() if k in ("side", "seed", "generator")},
    )


def plateau_normalize(hist: CoincidenceHistogram, A: float) -> np.ndarray:
    """counts / A as a real array."""
    if not A > 0:
        raise ConfigError(f"plateau A must be positive, got {A}")
    return hist.counts.astype(float) / A


def far_bin_plateau(hist: CoincidenceHistogram, gamma_bar: float) -> float:
    """
    Mean count over bins whose every lower edge lies beyond 10 / gamma_bar.

    Cross-check for the fitted plateau.
    """
    if gamma_bar <= 0:
        raise ConfigError("gamma_bar must be positive")
    cutoff_ns = PLATEAU_GAMMA_MULTIPLE / gamma_bar * 1e9
    first = int(np.searchsorted(hist.lower_edges_ns, cutoff_ns, side="left"))
    if first >= hist.n_bins:
        raise DataError(f"no bins beyond {cutoff_ns:.0f} ns; extend max_delay_ns")
    region = hist.counts[(slice(first, None),) * (hist.order - 1)]
    return float(region.mean())


def collapse_axis(hist: CoincidenceHistogram, axis: int, start_bin: int = 0) -> CoincidenceHistogram:
    """
    Sum one delay axis over bins >= start_bin, giving a histogram one order lower.

    With start_bin beyond 10 / gamma_bar this is the factorization slice
    used to compare orders.
    """
    if hist.order == 2:
        raise ConfigError("an order-2 histogram has no axis to collapse")
    if not 0 <= axis < hist.order - 1:
        raise ConfigError(f"axis {axis} outside 0..{hist.order - 2}")
    if not 0 <= start_bin < hist.n_bins:
        raise ConfigError(f"start_bin {start_bin} outside 0..{hist.n_bins - 1}")
    kept = np.take(hist.counts, np.arange(start_bin, hist.n_bins), axis=axis).astype(np.int64)
    return CoincidenceHistogram(
        order=hist.order - 1,
        bin_width_ns=hist.bin_width_ns,
        max_delay_ns=hist.max_delay_ns,
        counts=_compact(kept.sum(axis=axis)),
        total_tags_used=hist.total_tags_used,
        channel_mode=hist.channel_mode,
        metadata={**hist.metadata, "collapsed_axis": axis, "collapsed_from_bin": start_bin},
    )


def slice_axis(coherence: np.ndarray, axis: int, index: int) -> np.ndarray:
    """Coherence values at one bin of the given axis."""
    if not 0 <= axis < coherence.ndim:
        raise ConfigError(f"axis {axis} outside 0..{coherence.ndim - 1}")
    if not 0 <= index < coherence.shape[axis]:
        raise ConfigError(f"bin {index} outside 0..{coherence.shape[axis] - 1}")
    return np.take(coherence, index, axis=axis)
