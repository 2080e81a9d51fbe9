"""
Pipeline configuration: environment defaults plus a validated JSON config.
"""

import json
import logging
import os
from pathlib import Path
from typing import Literal, Optional

from dotenv import load_dotenv
load_dotenv()  # Load .env file

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .conditioning import BurstPolicy
from .correlator import SUPPORTED_ORDERS
from .errors import ConfigError
from .fitting import SpectrumMode
from .models import ETA_DET_REFERENCE, CavityParams, FilterChain, GawbsModel, ThermalLink, khz
from .postselect import HeraldSpec
from .schemas import ChannelMode, DriveSide
from .simulator import DetectorModel, OscillatorParams, SimPlan
from .tagstream import DEFAULT_RECORD_NS


def env_threads() -> int:
    """Worker cap from PHONONCOUNTS_THREADS, default 1."""
    raw = os.getenv("PHONONCOUNTS_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"PHONONCOUNTS_THREADS must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigError(f"PHONONCOUNTS_THREADS must be positive, got {threads}")
    return threads


def env_log_level() -> int:
    """Logging level from PHONONCOUNTS_LOG_LEVEL, default INFO."""
    name = os.getenv("PHONONCOUNTS_LOG_LEVEL", "INFO").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def default_plan() -> SimPlan:
    return SimPlan(
        side=DriveSide.anti_stokes,
        osc=OscillatorParams(n_ac=2.0, gamma_ac_bar=khz(3.5)),
        detected_sideband_rate=2000.0,
        duration_ns=10_000_000_000,
        seed=0,
    )


class PowerSweepPlan(StrictModel):
    """Streams at several input powers, rates taken from the backaction model."""
    P_in_w: list[float] = Field(..., min_length=1, description="Input powers (W)")
    sides: list[DriveSide] = Field(
        default_factory=lambda: [DriveSide.anti_stokes, DriveSide.stokes], description="Drive sides simulated per power"
    )
    eta_det: float = Field(default=ETA_DET_REFERENCE, gt=0.0, le=1.0, description="Detection efficiency")
    duration_ns: int = Field(default=10_000_000_000, gt=0, description="Length of every stream")
    background_rate: float = Field(default=0.0, ge=0.0, description="Uncorrelated background counts/s")
    cavity: CavityParams = Field(default_factory=CavityParams, description="Cavity and drive")
    link: ThermalLink = Field(default_factory=ThermalLink, description="Heating and damping")
    detector: DetectorModel = Field(default_factory=DetectorModel, description="Detector artifacts")

    @field_validator("P_in_w")
    @classmethod
    def _positive(cls, value: list[float]) -> list[float]:
        if any(p <= 0 for p in value):
            raise ValueError("input powers must be positive")
        return value


class SimulationSection(StrictModel):
    plan: SimPlan = Field(default_factory=default_plan, description="Single-stream plan")
    power_sweep: Optional[PowerSweepPlan] = Field(default=None, description="Replaces the single plan when set")


class ConditioningSection(StrictModel):
    record_ns: int = Field(default=DEFAULT_RECORD_NS, gt=0, description="DAq record length")
    afterpulse_window_ns: int = Field(default=50, ge=0, description="Same-channel holdoff")
    policy: BurstPolicy = Field(default_factory=BurstPolicy, description="Burst rejection")


class CorrelationSection(StrictModel):
    orders: list[int] = Field(default_factory=lambda: [2], description="Coherence orders to histogram")
    bin_width_ns: dict[int, int] = Field(
        default_factory=lambda: {2: 2_000, 3: 5_000, 4: 10_000}, description="Bin width per order"
    )
    max_delay_ns: dict[int, int] = Field(
        default_factory=lambda: {2: 1_000_000, 3: 1_000_000, 4: 1_000_000}, description="Delay range per order"
    )
    channel_mode: ChannelMode = Field(default=ChannelMode.all_pairs, description="Detector pairings")
    epsilon: Optional[float] = Field(default=None, ge=0.0, description="Background ratio; None or 0 skips correction")
    plateau: Literal["fit", "far_bin"] = Field(default="fit", description="How A is obtained")
    gamma_bar: Optional[float] = Field(default=None, gt=0.0, description="Total damping (rad/s) for far-bin plateaus")
    slice_tau1_bins: list[int] = Field(default_factory=lambda: [0], description="Order-4 slices along the first delay")

    @model_validator(mode="after")
    def _check_orders(self) -> "CorrelationSection":
        for order in self.orders:
            if order not in SUPPORTED_ORDERS:
                raise ValueError(f"order must be one of {SUPPORTED_ORDERS}, got {order}")
            if order not in self.bin_width_ns or order not in self.max_delay_ns:
                raise ValueError(f"order {order} needs a bin width and a max delay")
        if self.plateau == "far_bin" and self.gamma_bar is None:
            raise ValueError("far_bin plateaus need gamma_bar")
        if any(b < 0 for b in self.slice_tau1_bins):
            raise ValueError("slice bins must be non-negative")
        return self


class FittingSection(StrictModel):
    spectrum_mode: SpectrumMode = Field(default=SpectrumMode.five_point, description="Spectrum fit recipe")
    n_gawbs_peaks: int = Field(default=1, ge=0, description="GAWBS Lorentzians in full spectrum fits")
    filters: FilterChain = Field(default_factory=FilterChain, description="Filter cavities")
    cavity: CavityParams = Field(default_factory=CavityParams, description="Cavity parameters for power sweeps")
    link: ThermalLink = Field(default_factory=ThermalLink, description="Starting thermal parameters")
    eta_det_init: float = Field(default=ETA_DET_REFERENCE, gt=0.0, le=1.0, description="Starting detection efficiency")
    shared_eta: bool = Field(default=False, description="One efficiency for every sweep")
    fixed: dict[str, float] = Field(default_factory=dict, description="Power-sweep parameters held fixed")


class PostselectSection(StrictModel):
    herald: HeraldSpec = Field(
        default_factory=lambda: HeraldSpec(normalization_delay_ns=500_000), description="Herald selection and binning"
    )
    side: DriveSide = Field(default=DriveSide.anti_stokes, description="Sideband of the analysed stream")
    gamma_bar: Optional[float] = Field(default=None, gt=0.0, description="Total damping (rad/s) for the theory column")
    conditional_g2: bool = Field(default=True, description="Also emit the conditional g2 curve when k <= 2")


class ModesSection(StrictModel):
    gawbs: GawbsModel = Field(default_factory=GawbsModel, description="Fiber geometry")
    m_max: int = Field(default=30, ge=1, description="Modes solved")


class PipelineConfig(StrictModel):
    """Every stage's settings; unknown keys are rejected at any depth."""
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    conditioning: ConditioningSection = Field(default_factory=ConditioningSection)
    correlation: CorrelationSection = Field(default_factory=CorrelationSection)
    fitting: FittingSection = Field(default_factory=FittingSection)
    postselect: PostselectSection = Field(default_factory=PostselectSection)
    modes: ModesSection = Field(default_factory=ModesSection)


def parse_config(payload: dict) -> PipelineConfig:
    """Validate a config mapping, wrapping failures in ConfigError."""
    try:
        return PipelineConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: Optional[str | Path] = None) -> PipelineConfig:
    """
    Load a JSON pipeline config; None gives all defaults.

    Raises:
        ConfigError: unreadable file, malformed JSON or schema violation
    """
    if path is None:
        return PipelineConfig()
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(payload)
