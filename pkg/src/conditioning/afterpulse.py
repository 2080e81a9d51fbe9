"""
Afterpulse removal.
"""

from ..tagstream import TagStream, ensure_sorted, per_channel_holdoff
from ..utils import get_logger


logger = get_logger("conditioning")

AFTERPULSE_WINDOW_NS = 50


def filter_afterpulses(stream: TagStream, window_ns: int = AFTERPULSE_WINDOW_NS) -> tuple[TagStream, int]:
    """
    Drop any tag within window_ns of the previously kept tag on its channel.

    Returns:
        (filtered stream, number of tags removed)
    """
    ensure_sorted(stream)
    keep = per_channel_holdoff(stream, window_ns)
    removed = int(len(stream) - keep.sum())
    if removed:
        logger.info(f"[Conditioning] removed {removed} afterpulse candidate(s) with a {window_ns} ns window")
    return stream.select(keep, afterpulse_window_ns=window_ns), removed
