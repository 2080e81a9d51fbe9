"""
Pydantic schemas and enumerations shared across the phononcounts modules.
"""

from enum import Enum


class DriveSide(str, Enum):
    """Which optomechanical sideband a stream records."""
    anti_stokes = "anti_stokes"  # red-detuned drive, normally ordered moments
    stokes = "stokes"  # blue-detuned drive, anti-normally ordered moments


class Ordering(str, Enum):
    """Operator ordering of a phonon coherence."""
    normal = "normal"
    antinormal = "antinormal"


class ChannelMode(str, Enum):
    """Which detector pairings enter a coincidence histogram."""
    all_pairs = "all_pairs"
    cross_only = "cross_only"


class CountModel(str, Enum):
    """Null statistical model for counts per interval."""
    thermal = "thermal"  # Bose-Einstein P_th(k, lambda)
    poisson = "poisson"


class RejectionReason(str, Enum):
    """Why a DAq record was discarded."""
    burst = "burst"
    manual = "manual"


class HeraldSide(str, Enum):
    """Heralded-state flavour."""
    subtracted = "subtracted"
    added = "added"


def ordering_for(side: DriveSide) -> Ordering:
    """Ordering of the coherences a given drive side measures."""
    return Ordering.normal if side == DriveSide.anti_stokes else Ordering.antinormal


def herald_side_for(side: DriveSide) -> HeraldSide:
    """Anti-Stokes clicks herald phonon subtraction, Stokes clicks addition."""
    return HeraldSide.subtracted if side == DriveSide.anti_stokes else HeraldSide.added
