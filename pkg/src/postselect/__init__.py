"""
Heralded phonon-subtracted and phonon-added state statistics.
"""

from .schemas import MAX_HERALDS, HeraldCurve, HeraldSpec
from .herald import (
    LOW_COUNT_LIMIT,
    conditioned_g2_curve,
    conditioned_rate_curve,
    herald_events,
    rate_theory,
)

__all__ = [
    "LOW_COUNT_LIMIT",
    "MAX_HERALDS",
    "HeraldCurve",
    "HeraldSpec",
    "conditioned_g2_curve",
    "conditioned_rate_curve",
    "herald_events",
    "rate_theory",
]
