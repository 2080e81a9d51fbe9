"""
Pydantic schemas for coincidence histograms.
"""

import math
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..schemas import ChannelMode


SUPPORTED_ORDERS = (2, 3, 4)


def axis_length(max_delay_ns: int, bin_width_ns: int) -> int:
    return math.ceil(max_delay_ns / bin_width_ns)


class CoincidenceHistogram(BaseModel):
    """
    n-fold coincidence counts over the n-1 consecutive delays.

    counts[i, j, ...] holds the tuples with floor(tau_1 / w) = i,
    floor(tau_2 / w) = j and so on.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    order: int = Field(..., description="Number of clicks per tuple")
    bin_width_ns: int = Field(..., gt=0, description="Delay bin width")
    max_delay_ns: int = Field(..., gt=0, description="Upper bound on every consecutive delay")
    counts: np.ndarray = Field(..., description="(order-1)-dimensional non-negative integer counts")
    total_tags_used: int = Field(default=0, ge=0, description="Tags inside valid records")
    channel_mode: ChannelMode = Field(default=ChannelMode.all_pairs, description="Detector pairing rule")
    normalization: Optional[float] = Field(default=None, description="Plateau A, set after fitting")
    metadata: dict[str, Any] = Field(default_factory=dict, description="Provenance of the input stream")

    @field_validator("order")
    @classmethod
    def _supported(cls, value: int) -> int:
        if value not in SUPPORTED_ORDERS:
            raise ValueError(f"order must be one of {SUPPORTED_ORDERS}, got {value}")
        return value

    @model_validator(mode="after")
    def _check_shape(self) -> "CoincidenceHistogram":
        length = axis_length(self.max_delay_ns, self.bin_width_ns)
        expected = (length,) * (self.order - 1)
        if self.counts.shape != expected:
            raise ValueError(f"counts shape {self.counts.shape} does not match {expected}")
        if not np.issubdtype(self.counts.dtype, np.integer):
            raise ValueError("counts must be integers")
        if self.counts.size and self.counts.min() < 0:
            raise ValueError("counts must be non-negative")
        return self

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    @property
    def lower_edges_ns(self) -> np.ndarray:
        return np.arange(self.n_bins, dtype=float) * self.bin_width_ns

    @property
    def centres_ns(self) -> np.ndarray:
        return self.lower_edges_ns + 0.5 * self.bin_width_ns

    @property
    def total(self) -> int:
        return int(self.counts.sum())


class BackgroundRatio(BaseModel):
    """Mean background rate over mean sideband rate."""
    epsilon: float = Field(..., ge=0.0, allow_inf_nan=False, description="Background/sideband ratio")
    in_operating_band: bool = Field(default=True, description="Inside the 0.04-0.2 band seen at working powers")
