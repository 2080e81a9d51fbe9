"""
Tag streams, acquisition records and the PTG1 file format.
"""

from .stream import (
    DEFAULT_CHANNEL_COUNT,
    DEFAULT_RECORD_NS,
    DaqRecord,
    TagStream,
    ensure_sorted,
    holdoff_mask,
    per_channel_holdoff,
    records_from_metadata,
    segment_records,
)
from .io import export_csv, load_tags, read_tags, save_tags, write_tags

__all__ = [
    "DEFAULT_CHANNEL_COUNT",
    "DEFAULT_RECORD_NS",
    "DaqRecord",
    "TagStream",
    "ensure_sorted",
    "export_csv",
    "holdoff_mask",
    "load_tags",
    "per_channel_holdoff",
    "read_tags",
    "records_from_metadata",
    "save_tags",
    "segment_records",
    "write_tags",
]
