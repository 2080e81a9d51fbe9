"""
Pydantic schemas for the click-stream simulator.
"""

import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..schemas import DriveSide


OMEGA_AC_DEFAULT = 2 * math.pi * 315.3e6
MAX_DT_GAMMA = 0.1
# Interior segment joins discard tags within this many 1/gamma_bar
SEGMENT_GUARD_DECAYS = 10.0


class OscillatorParams(BaseModel):
    """Thermal acoustic mode seen by the drive."""
    model_config = ConfigDict(extra="forbid")

    n_ac: float = Field(..., ge=0.0, description="Mean phonon occupancy")
    gamma_ac_bar: float = Field(..., gt=0.0, description="Total damping rate (rad/s)")
    omega_ac: float = Field(default=OMEGA_AC_DEFAULT, gt=0.0, description="Mode angular frequency (rad/s); not used by the rotating-frame dynamics")


class OscState(BaseModel):
    """Rotating-frame amplitude of the oscillator at a point in time."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    beta: complex = Field(..., description="Complex amplitude, |beta|^2 in phonons")
    t_ns: float = Field(default=0.0, description="Time of this state (ns)")

    @model_validator(mode="after")
    def _finite(self) -> "OscState":
        if not (math.isfinite(self.beta.real) and math.isfinite(self.beta.imag)):
            raise ValueError("oscillator amplitude must be finite")
        return self


class BurstInjection(BaseModel):
    """Periodic click trains injected at Poisson-distributed start times."""
    model_config = ConfigDict(extra="forbid")

    rate_per_s: float = Field(..., ge=0.0, description="Mean number of bursts per second")
    duration_ns: int = Field(..., gt=0, description="Length of each burst")
    intra_rate: float = Field(..., gt=0.0, description="Click rate inside a burst (counts/s)")


class DetectorModel(BaseModel):
    """Single-photon detector artifacts and channel routing."""
    model_config = ConfigDict(extra="forbid")

    dead_time_ns: int = Field(default=50, ge=0, description="Per-channel dead time")
    afterpulse_delay_ns: int = Field(default=24, ge=0, description="Afterpulse delay after a click")
    afterpulse_prob: float = Field(default=0.0, ge=0.0, le=1.0, description="Afterpulse probability per accepted click")
    dark_and_stray_rate: float = Field(default=0.0, ge=0.0, description="Dark and stray-light counts/s")
    burst_injection: Optional[BurstInjection] = Field(default=None, description="Optional burst trains")
    split_ratio: float = Field(default=0.5, ge=0.0, le=1.0, description="Fraction of light routed to channel 0")
    channel_count: int = Field(default=2, ge=1, le=255, description="Number of detectors")


class SimPlan(BaseModel):
    """Everything needed to reproduce one simulated stream."""
    model_config = ConfigDict(extra="forbid")

    side: DriveSide = Field(default=DriveSide.anti_stokes, description="Recorded sideband")
    osc: OscillatorParams = Field(..., description="Oscillator parameters")
    detected_sideband_rate: float = Field(..., ge=0.0, description="Mean detected sideband counts/s")
    background_rate: float = Field(default=0.0, ge=0.0, description="Uncorrelated background counts/s")
    detector: DetectorModel = Field(default_factory=DetectorModel, description="Detector artifacts")
    duration_ns: int = Field(..., ge=0, description="Stream length")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Root seed")
    dt_ns: Optional[float] = Field(default=None, gt=0.0, description="Intensity-update step; default min(0.01/gamma, 1 us)")
    segment_ns: Optional[int] = Field(default=None, gt=0, description="Split the run into independently seeded segments")
    bound_factor: float = Field(default=32.0, gt=1.0, description="Initial thinning bound in units of the mean intensity")

    @property
    def effective_occupancy(self) -> float:
        """Occupancy whose normally ordered moments the click intensity follows."""
        if self.side == DriveSide.stokes:
            return self.osc.n_ac + 1.0
        return self.osc.n_ac

    def resolved_dt_ns(self) -> float:
        if self.dt_ns is not None:
            return self.dt_ns
        return min(0.01 / self.osc.gamma_ac_bar * 1e9, 1000.0)

    def segment_bounds(self) -> list[tuple[int, int]]:
        if not self.segment_ns:
            return [(0, self.duration_ns)] if self.duration_ns else []
        edges = list(range(0, self.duration_ns, self.segment_ns)) + [self.duration_ns]
        return list(zip(edges[:-1], edges[1:]))

    def segment_guard_ns(self) -> int:
        """Half-width of the span discarded around each interior segment join."""
        return math.ceil(SEGMENT_GUARD_DECAYS / self.osc.gamma_ac_bar * 1e9)

    def guard_spans(self) -> list[tuple[int, int]]:
        """[lo, hi) spans around interior joins whose tags are discarded."""
        guard = self.segment_guard_ns()
        joins = [lo for lo, _ in self.segment_bounds()[1:]]
        return [(max(0, join - guard), min(self.duration_ns, join + guard)) for join in joins]

    @classmethod
    def for_sideband(
        cls,
        side: DriveSide,
        osc: OscillatorParams,
        rate_per_quantum: float,
        duration_ns: int,
        **kwargs,
    ) -> "SimPlan":
        """
        Plan whose sideband rate carries the sideband asymmetry: the anti-Stokes
        rate scales with n_ac, the Stokes rate with n_ac + 1.
        """
        quanta = osc.n_ac + 1.0 if side == DriveSide.stokes else osc.n_ac
        return cls(
            side=side,
            osc=osc,
            detected_sideband_rate=rate_per_quantum * quanta,
            duration_ns=duration_ns,
            **kwargs,
        )
