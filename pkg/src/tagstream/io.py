"""
Binary and CSV serialization of tag streams.

File layout (little-endian):
    header   "PTG1" | version u16 | channel count u8 | duration u64 ns
    records  one 9-byte record per tag: timestamp u64 ns | channel u8
    metadata u32 length | UTF-8 JSON | u32 length

The metadata length is written on both sides of the JSON block so a reader
can find the block from the end of the file and still detect a cut-off
record section.
"""

import json
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np
import pandas as pd

from ..errors import DataError
from ..utils import get_logger
from .stream import TagStream, ensure_sorted, unsorted_index


logger = get_logger("tagstream")

MAGIC = b"PTG1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHBQ")
LENGTH = struct.Struct("<I")
TAG_DTYPE = np.dtype([("t", "<u8"), ("c", "u1")])  # packed, itemsize 9


def write_tags(stream: TagStream, destination: BinaryIO) -> int:
    """
    Serialize a stream to a binary sink.

    Args:
        stream: Stream to write
        destination: Writable binary file object

    Returns:
        Number of bytes written
    """
    # Checked before the first byte goes out
    ensure_sorted(stream)

    records = np.empty(len(stream), dtype=TAG_DTYPE)
    records["t"] = stream.timestamps
    records["c"] = stream.channels
    meta = json.dumps(stream.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")

    chunks = [
        HEADER.pack(MAGIC, FORMAT_VERSION, stream.channel_count, stream.duration_ns),
        records.tobytes(),
        LENGTH.pack(len(meta)),
        meta,
        LENGTH.pack(len(meta)),
    ]
    written = 0
    for chunk in chunks:
        destination.write(chunk)
        written += len(chunk)
    return written


def read_tags(source: BinaryIO) -> TagStream:
    """
    Parse a stream written by write_tags.

    Raises:
        DataError: bad magic, truncated data or non-monotone timestamps
    """
    data = source.read()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise DataError("bad magic: not a PTG1 tag file")
    if len(data) < HEADER.size + 2 * LENGTH.size:
        raise DataError("truncated header")

    _, version, channel_count, duration = HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format version {version}")

    (meta_len,) = LENGTH.unpack_from(data, len(data) - LENGTH.size)
    meta_start = len(data) - LENGTH.size - meta_len
    prefix_at = meta_start - LENGTH.size
    if prefix_at < HEADER.size or LENGTH.unpack_from(data, prefix_at)[0] != meta_len:
        raise DataError("truncated file: metadata block not found")

    body = memoryview(data)[HEADER.size:prefix_at]
    if len(body) % TAG_DTYPE.itemsize:
        raise DataError(f"truncated record: {len(body) % TAG_DTYPE.itemsize} trailing bytes")

    try:
        metadata = json.loads(bytes(data[meta_start: meta_start + meta_len]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt metadata block: {exc}") from exc

    records = np.frombuffer(body, dtype=TAG_DTYPE)
    times = records["t"].astype(np.int64)
    chans = records["c"].astype(np.uint8)
    bad = unsorted_index(times, chans)
    if bad is not None:
        raise DataError(f"non-monotone timestamps at record {bad}")
    if len(times) and (times[-1] >= duration or int(chans.max()) >= channel_count):
        raise DataError("tag outside declared duration or channel set")

    return TagStream(
        timestamps=times,
        channels=chans,
        duration_ns=duration,
        channel_count=channel_count,
        metadata=metadata,
    )


def save_tags(stream: TagStream, path: str | Path) -> int:
    """Write a stream to a file path."""
    with open(path, "wb") as handle:
        size = write_tags(stream, handle)
    logger.info(f"[TagStream] wrote {len(stream)} tags ({size} bytes) to {path}")
    return size


def load_tags(path: str | Path) -> TagStream:
    """Read a stream from a file path."""
    with open(path, "rb") as handle:
        return read_tags(handle)


def export_csv(stream: TagStream, path: str | Path) -> Path:
    """One line per tag: "timestamp_ns,channel"."""
    frame = pd.DataFrame({"timestamp_ns": stream.timestamps, "channel": stream.channels})
    frame.to_csv(path, index=False)
    return Path(path)
