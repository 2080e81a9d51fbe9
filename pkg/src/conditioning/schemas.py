"""
Pydantic schemas for the data-cleaning stage.
"""

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..schemas import CountModel


DEFAULT_WINDOWS_NS = [3_000, 10_000, 30_000, 100_000, 300_000]


class BurstPolicy(BaseModel):
    """Statistical burst rejection settings."""
    model_config = ConfigDict(extra="forbid")

    windows_ns: list[int] = Field(default_factory=lambda: list(DEFAULT_WINDOWS_NS), description="Interval widths scanned, ascending")
    epsilon: float = Field(default=0.1, gt=0.0, lt=1.0, description="Expected false rejections per window")
    model: CountModel = Field(default=CountModel.thermal, description="Null model for counts per interval")

    @field_validator("windows_ns")
    @classmethod
    def _ascending(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("at least one window is required")
        if any(w <= 0 for w in value):
            raise ValueError("windows must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("windows must be strictly ascending")
        return value


class WindowThreshold(BaseModel):
    """Threshold bookkeeping for one interval width."""
    window_ns: int = Field(..., description="Interval width")
    lam: float = Field(..., ge=0.0, description="Mean counts per interval")
    n_intervals: int = Field(..., ge=0, description="Intervals scanned")
    k_thr: int = Field(..., ge=1, description="Rejection threshold")
    records_rejected: int = Field(default=0, ge=0, description="Records newly rejected at this width")


class ConditioningReport(BaseModel):
    """Summary of afterpulse removal and burst rejection."""
    afterpulses_removed: int = Field(default=0, ge=0, description="Tags removed by the afterpulse filter")
    records_rejected: int = Field(default=0, ge=0, description="Records invalidated by burst rejection")
    total_records: int = Field(default=0, ge=0, description="Records in the tiling")
    rejected_record_indices: list[int] = Field(default_factory=list, description="Indices of rejected records")
    windows: list[WindowThreshold] = Field(default_factory=list, description="Per-window thresholds")

    @property
    def k_thr(self) -> dict[int, int]:
        return {w.window_ns: w.k_thr for w in self.windows}


class CountDistribution(BaseModel):
    """Occupancy histogram of consecutive disjoint intervals."""
    window_ns: int = Field(..., gt=0, description="Interval width")
    n_intervals: int = Field(..., ge=0, description="Complete intervals in the analysis span")
    occupancy: list[int] = Field(..., description="occupancy[k] = number of intervals holding k counts")

    @property
    def mean(self) -> float:
        if self.n_intervals == 0:
            return 0.0
        return sum(k * n for k, n in enumerate(self.occupancy)) / self.n_intervals
