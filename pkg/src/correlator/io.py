"""
Histogram export: compact binary and long-format tables.

Binary layout (little-endian):
    header   "PCH1" | version u16 | order u8 | channel mode u8 | count width u8
             | bin width u64 | max delay u64 | tags used u64 | plateau A f64 (NaN if unset)
    counts   raw C-order counts, u32 or i64
    metadata u32 length | UTF-8 JSON | u32 length
"""

import json
import math
import struct
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import DataError
from ..schemas import ChannelMode
from ..utils import get_logger
from .schemas import CoincidenceHistogram, axis_length


logger = get_logger("correlator")

MAGIC = b"PCH1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHBBBQQQd")
LENGTH = struct.Struct("<I")

_MODES = [ChannelMode.all_pairs, ChannelMode.cross_only]
_COUNT_TYPES = [np.dtype("<u4"), np.dtype("<i8")]


def write_histogram(hist: CoincidenceHistogram, path: str | Path) -> int:
    """Write a histogram to the binary format; returns bytes written."""
    width = 0 if hist.counts.dtype.itemsize <= 4 and hist.counts.dtype.kind == "u" else 1
    counts = np.ascontiguousarray(hist.counts, dtype=_COUNT_TYPES[width])
    meta = json.dumps(hist.metadata, sort_keys=True, separators=(",", ":"), default=str).encode("utf-8")
    plateau = math.nan if hist.normalization is None else hist.normalization
    chunks = [
        HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            hist.order,
            _MODES.index(hist.channel_mode),
            width,
            hist.bin_width_ns,
            hist.max_delay_ns,
            hist.total_tags_used,
            plateau,
        ),
        counts.tobytes(),
        LENGTH.pack(len(meta)),
        meta,
        LENGTH.pack(len(meta)),
    ]
    with open(path, "wb") as handle:
        for chunk in chunks:
            handle.write(chunk)
    size = sum(len(c) for c in chunks)
    logger.info(f"[Correlator] wrote order-{hist.order} histogram ({size} bytes) to {path}")
    return size


def read_histogram(path: str | Path) -> CoincidenceHistogram:
    """
    Read a histogram written by write_histogram.

    Raises:
        DataError: bad magic or truncated data
    """
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise DataError("bad magic: not a PCH1 histogram file")
    if len(data) < HEADER.size + 2 * LENGTH.size:
        raise DataError("truncated header")
    _, version, order, mode, width, bin_width, max_delay, tags_used, plateau = HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format version {version}")
    if order not in (2, 3, 4) or mode >= len(_MODES) or width >= len(_COUNT_TYPES) or bin_width == 0:
        raise DataError("corrupt histogram header")

    dtype = _COUNT_TYPES[width]
    shape = (axis_length(max_delay, bin_width),) * (order - 1)
    body_len = int(np.prod(shape)) * dtype.itemsize
    meta_at = HEADER.size + body_len
    if len(data) < meta_at + 2 * LENGTH.size:
        raise DataError("truncated counts")
    (meta_len,) = LENGTH.unpack_from(data, meta_at)
    if len(data) != meta_at + 2 * LENGTH.size + meta_len:
        raise DataError("truncated metadata block")
    try:
        metadata = json.loads(data[meta_at + LENGTH.size : meta_at + LENGTH.size + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt metadata block: {exc}") from exc

    counts = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)), offset=HEADER.size).reshape(shape)
    return CoincidenceHistogram(
        order=order,
        bin_width_ns=bin_width,
        max_delay_ns=max_delay,
        counts=counts.astype(np.uint32 if width == 0 else np.int64),
        total_tags_used=tags_used,
        channel_mode=_MODES[mode],
        normalization=None if math.isnan(plateau) else plateau,
        metadata=metadata,
    )


def histogram_frame(hist: CoincidenceHistogram, coherence: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    Long-format table: one row per bin with tau<k>_ns lower-edge columns,
    the count, and the coherence value when given.
    """
    grids = np.meshgrid(*([hist.lower_edges_ns] * (hist.order - 1)), indexing="ij")
    columns = {f"tau{k + 1}_ns": g.ravel() for k, g in enumerate(grids)}
    columns["count"] = hist.counts.ravel().astype(np.int64)
    if coherence is not None:
        if coherence.shape != hist.counts.shape:
            raise DataError(f"coherence shape {coherence.shape} does not match counts {hist.counts.shape}")
        columns["coherence"] = np.asarray(coherence, dtype=float).ravel()
    return pd.DataFrame(columns)
