"""
Fixed cleaning order: afterpulse filter, record segmentation, burst rejection.
"""

from typing import Optional

from ..tagstream import DEFAULT_RECORD_NS, DaqRecord, TagStream, segment_records
from ..utils import get_logger
from .afterpulse import AFTERPULSE_WINDOW_NS, filter_afterpulses
from .bursts import reject_bursts
from .schemas import BurstPolicy, ConditioningReport


logger = get_logger("conditioning")


def condition_stream(
    stream: TagStream,
    record_ns: int = DEFAULT_RECORD_NS,
    policy: Optional[BurstPolicy] = None,
    afterpulse_window_ns: int = AFTERPULSE_WINDOW_NS,
) -> tuple[TagStream, list[DaqRecord], ConditioningReport]:
    """
    Clean a raw stream and record which DAq records survived.

    The returned stream carries record_ns and rejected_records in its
    metadata so later stages can rebuild the record list.
    """
    policy = policy or BurstPolicy()
    filtered, removed = filter_afterpulses(stream, afterpulse_window_ns)
    records = segment_records(filtered, record_ns)
    records, report = reject_bursts(filtered, records, policy, afterpulses_removed=removed)

    rejected = {str(r.index): r.rejection_reason.value for r in records if not r.valid}
    cleaned = filtered.with_metadata(record_ns=record_ns, rejected_records=rejected)
    logger.info(
        f"[Conditioning] {report.records_rejected}/{report.total_records} records rejected, "
        f"{removed} afterpulses removed"
    )
    return cleaned, records, report
