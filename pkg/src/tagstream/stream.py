"""
Click-stream data model: TagStream, DaqRecord and record segmentation.
"""

from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ConfigError, DataError
from ..schemas import RejectionReason


DEFAULT_CHANNEL_COUNT = 2
DEFAULT_RECORD_NS = 90_000_000


def unsorted_index(times: np.ndarray, channels: np.ndarray) -> Optional[int]:
    """
    Index of the first tag that breaks (timestamp, channel) ordering.

    Returns:
        None when the tags are sorted
    """
    if len(times) < 2:
        return None
    dt = np.diff(times)
    bad = (dt < 0) | ((dt == 0) & (np.diff(channels.astype(np.int16)) < 0))
    hits = np.flatnonzero(bad)
    return int(hits[0]) + 1 if len(hits) else None


class TagStream(BaseModel):
    """
    Time-ordered detector clicks with channel labels.

    Timestamps are integer nanoseconds since acquisition start. The arrays
    are frozen on construction so a stream can be shared across threads.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    timestamps: np.ndarray = Field(..., description="Click times, int64 ns, sorted")
    channels: np.ndarray = Field(..., description="Detector index per click, uint8")
    duration_ns: int = Field(..., ge=0, description="Acquisition length in ns")
    channel_count: int = Field(default=DEFAULT_CHANNEL_COUNT, ge=1, le=255, description="Size of the declared channel set")
    metadata: dict[str, Any] = Field(default_factory=dict, description="Provenance: seed, drive side, generator version")

    @field_validator("timestamps", mode="before")
    @classmethod
    def _coerce_times(cls, value: Any) -> np.ndarray:
        return np.ascontiguousarray(np.asarray(value, dtype=np.int64))

    @field_validator("channels", mode="before")
    @classmethod
    def _coerce_channels(cls, value: Any) -> np.ndarray:
        return np.ascontiguousarray(np.asarray(value, dtype=np.uint8))

    @model_validator(mode="after")
    def _check_invariants(self) -> "TagStream":
        times, chans = self.timestamps, self.channels
        if times.ndim != 1 or chans.shape != times.shape:
            raise ValueError("timestamps and channels must be 1-D arrays of equal length")
        if len(times):
            if times[0] < 0 or times[-1] >= self.duration_ns:
                raise ValueError(f"timestamps must lie in [0, {self.duration_ns})")
            if int(chans.max()) >= self.channel_count:
                raise ValueError(f"channel index outside declared set of {self.channel_count}")
        bad = unsorted_index(times, chans)
        if bad is not None:
            raise ValueError(f"non-monotone timestamps at index {bad}")
        times.setflags(write=False)
        chans.setflags(write=False)
        return self

    @classmethod
    def from_unsorted(
        cls,
        timestamps: np.ndarray,
        channels: np.ndarray,
        duration_ns: int,
        channel_count: int = DEFAULT_CHANNEL_COUNT,
        metadata: Optional[dict[str, Any]] = None,
    ) -> "TagStream":
        """Build a stream from raw tags, sorting by timestamp then channel."""
        times = np.asarray(timestamps, dtype=np.int64)
        chans = np.asarray(channels, dtype=np.uint8)
        order = np.lexsort((chans, times))
        return cls(
            timestamps=times[order],
            channels=chans[order],
            duration_ns=duration_ns,
            channel_count=channel_count,
            metadata=metadata or {},
        )

    @classmethod
    def empty(cls, duration_ns: int = 0, channel_count: int = DEFAULT_CHANNEL_COUNT, **metadata: Any) -> "TagStream":
        return cls(
            timestamps=np.empty(0, np.int64),
            channels=np.empty(0, np.uint8),
            duration_ns=duration_ns,
            channel_count=channel_count,
            metadata=metadata,
        )

    def __len__(self) -> int:
        return len(self.timestamps)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            self.duration_ns == other.duration_ns
            and self.channel_count == other.channel_count
            and self.metadata == other.metadata
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.channels, other.channels)
        )

    def select(self, mask: np.ndarray, **metadata_updates: Any) -> "TagStream":
        """Sub-stream of the tags where mask is true; order is preserved."""
        return TagStream(
            timestamps=self.timestamps[mask],
            channels=self.channels[mask],
            duration_ns=self.duration_ns,
            channel_count=self.channel_count,
            metadata={**self.metadata, **metadata_updates},
        )

    def with_metadata(self, **updates: Any) -> "TagStream":
        return self.model_copy(update={"metadata": {**self.metadata, **updates}})

    def channel_view(self, channel: int) -> np.ndarray:
        """Timestamps of one channel."""
        return self.timestamps[self.channels == channel]

    def mean_rate(self) -> float:
        """Mean click rate in counts/s."""
        if self.duration_ns == 0:
            return 0.0
        return len(self) / (self.duration_ns * 1e-9)


class DaqRecord(BaseModel):
    """One contiguous acquisition window."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(..., ge=0, description="Position of the record in the tiling")
    start_ns: int = Field(..., ge=0, description="Record start, inclusive")
    end_ns: int = Field(..., description="Record end, exclusive")
    valid: bool = Field(default=True, description="False once rejected")
    rejection_reason: Optional[RejectionReason] = Field(default=None, description="Why the record was rejected")
    partial: bool = Field(default=False, description="Trailing record shorter than the configured length")

    @model_validator(mode="after")
    def _check_bounds(self) -> "DaqRecord":
        if self.end_ns <= self.start_ns:
            raise ValueError("record end must follow its start")
        return self

    @property
    def length_ns(self) -> int:
        return self.end_ns - self.start_ns

    def reject(self, reason: RejectionReason) -> "DaqRecord":
        if not self.valid:
            return self
        return self.model_copy(update={"valid": False, "rejection_reason": reason})


def segment_records(stream: TagStream, record_ns: int = DEFAULT_RECORD_NS) -> list[DaqRecord]:
    """
    Tile [0, duration) with consecutive records.

    Args:
        stream: Stream to segment
        record_ns: Configured record length

    Returns:
        Records in time order; the last one is flagged partial when it is short
    """
    if record_ns <= 0:
        raise ConfigError(f"record_ns must be positive, got {record_ns}")
    records = []
    start = 0
    while start < stream.duration_ns:
        end = min(start + record_ns, stream.duration_ns)
        records.append(
            DaqRecord(
                index=len(records),
                start_ns=start,
                end_ns=end,
                partial=(end - start) < record_ns,
            )
        )
        start = end
    return records


def records_from_metadata(stream: TagStream, record_ns: Optional[int] = None) -> list[DaqRecord]:
    """
    Rebuild a record list from the bookkeeping written by the conditioning stage.

    Streams that were never conditioned come back fully valid.
    """
    length = record_ns or int(stream.metadata.get("record_ns", DEFAULT_RECORD_NS))
    rejected = stream.metadata.get("rejected_records", {})
    records = segment_records(stream, length)
    for key, reason in rejected.items():
        idx = int(key)
        if idx >= len(records):
            raise DataError(f"rejected record {idx} outside the {len(records)}-record tiling")
        records[idx] = records[idx].reject(RejectionReason(reason))
    return records


def ensure_sorted(stream: TagStream) -> None:
    """Re-check the ordering invariant at a module boundary."""
    bad = unsorted_index(stream.timestamps, stream.channels)
    if bad is not None:
        raise DataError(f"non-monotone timestamps at index {bad}")


def holdoff_mask(times: np.ndarray, window_ns: int) -> np.ndarray:
    """
    Keep-mask for one channel: a tag survives only if it comes at least
    window_ns after the previously kept tag.

    Tags outside runs of sub-window gaps are always kept, so the scan only
    walks the runs themselves.
    """
    n = len(times)
    keep = np.ones(n, dtype=bool)
    if n < 2 or window_ns <= 0:
        return keep
    close = np.flatnonzero(np.diff(times) < window_ns)
    if len(close) == 0:
        return keep
    breaks = np.flatnonzero(np.diff(close) > 1)
    run_starts = np.concatenate(([close[0]], close[breaks + 1]))
    run_ends = np.concatenate((close[breaks], [close[-1]])) + 1
    for first, last in zip(run_starts.tolist(), run_ends.tolist()):
        kept = times[first]
        for j in range(first + 1, last + 1):
            if times[j] - kept < window_ns:
                keep[j] = False
            else:
                kept = times[j]
    return keep


def per_channel_holdoff(stream: TagStream, window_ns: int) -> np.ndarray:
    """Apply holdoff_mask independently on every channel; returns a stream-wide mask."""
    keep = np.ones(len(stream), dtype=bool)
    for channel in range(stream.channel_count):
        idx = np.flatnonzero(stream.channels == channel)
        if len(idx):
            keep[idx] = holdoff_mask(stream.timestamps[idx], window_ns)
    return keep
