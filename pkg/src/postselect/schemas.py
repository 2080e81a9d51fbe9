"""
Pydantic schemas for heralded-state analysis.
"""

import math
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..schemas import HeraldSide


MAX_HERALDS = 3
NORMALIZATION_GAMMA_MULTIPLE = 10.0


class HeraldSpec(BaseModel):
    """How heralds are picked and how the post-herald clicks are binned."""
    model_config = ConfigDict(extra="forbid")

    k: int = Field(default=1, ge=1, le=MAX_HERALDS, description="Heralding clicks")
    herald_window_ns: int = Field(default=10_000, gt=0, description="Width of the 0+ bin: every herald gap is below it")
    bin_width_ns: int = Field(default=5_000, gt=0, description="Delay bin width after the herald")
    max_delay_ns: int = Field(default=1_000_000, gt=0, description="Analysis window after the last herald click")
    normalization_delay_ns: Optional[int] = Field(default=None, gt=0, description="Start of the infinity region; default 10/gamma_bar")
    gamma_bar: Optional[float] = Field(default=None, gt=0.0, description="Total damping (rad/s) for defaults and theory")

    @model_validator(mode="after")
    def _check_windows(self) -> "HeraldSpec":
        if self.normalization_delay_ns is None and self.gamma_bar is None:
            raise ValueError("set normalization_delay_ns or gamma_bar")
        if self.resolved_normalization_ns() >= self.max_delay_ns:
            raise ValueError("normalization delay must lie inside the analysis window")
        return self

    def resolved_normalization_ns(self) -> int:
        if self.normalization_delay_ns is not None:
            return self.normalization_delay_ns
        return math.ceil(NORMALIZATION_GAMMA_MULTIPLE / self.gamma_bar * 1e9)

    @property
    def n_bins(self) -> int:
        return math.ceil(self.max_delay_ns / self.bin_width_ns)

    @property
    def lower_edges_ns(self) -> np.ndarray:
        return np.arange(self.n_bins, dtype=float) * self.bin_width_ns


class HeraldCurve(BaseModel):
    """Normalized post-herald statistic on a delay grid."""
    kind: str = Field(..., description="occupancy_ratio or conditional_g2")
    k: int = Field(..., description="Heralding clicks")
    side: HeraldSide = Field(..., description="subtracted (anti-Stokes) or added (Stokes)")
    tau_ns: list[float] = Field(..., description="Bin lower edges")
    bin_width_ns: int = Field(..., description="Bin width")
    value: list[float] = Field(..., description="Estimated curve")
    sigma: list[float] = Field(..., description="One-sigma counting uncertainty")
    theory: Optional[list[float]] = Field(default=None, description="Bin-averaged closed form, when gamma_bar is known")
    herald_count: int = Field(..., ge=0, description="Herald events used")
    conditioned_counts: list[int] = Field(..., description="Post-herald clicks per bin (numerator statistic)")
    normalization_delay_ns: int = Field(..., description="Start of the infinity region")
    flags: list[str] = Field(default_factory=list, description="Quality advisories")

    def occupancy(self, n_ac: float) -> np.ndarray:
        """Heralded occupancy from the ratio curve and the steady-state occupancy."""
        ratio = np.asarray(self.value)
        if self.side == HeraldSide.subtracted:
            return n_ac * ratio
        return (n_ac + 1.0) * ratio - 1.0

    @property
    def initial_value(self) -> float:
        return self.value[0]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "tau_ns": self.tau_ns,
                "value": self.value,
                "sigma": self.sigma,
                "conditioned_counts": self.conditioned_counts,
            }
        )
        if self.theory is not None:
            frame["theory"] = self.theory
        return frame
