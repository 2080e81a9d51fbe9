"""
Synthetic click streams from a thermally driven mode: OU amplitude,
Cox-process thinning, background and detector artifacts.
"""

from .schemas import BurstInjection, DetectorModel, OscillatorParams, OscState, SimPlan
from .ou import circular_gaussian, ou_sample_path, ou_step, stationary_state
from .detector import apply_detector_artifacts
from .cox import simulate_stream, simulate_streams
from .plans import plan_from_backaction

__all__ = [
    "BurstInjection",
    "DetectorModel",
    "OscState",
    "OscillatorParams",
    "SimPlan",
    "apply_detector_artifacts",
    "circular_gaussian",
    "ou_sample_path",
    "ou_step",
    "plan_from_backaction",
    "simulate_stream",
    "simulate_streams",
    "stationary_state",
]
