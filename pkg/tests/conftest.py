"""
Shared fixtures: simulated streams are generated once per session.
"""

import os

import numpy as np
import pytest

from src.models import khz
from src.schemas import DriveSide
from src.simulator import DetectorModel, OscillatorParams, SimPlan, simulate_stream
from src.tagstream import TagStream, segment_records


SLOW = bool(os.getenv("PHONONCOUNTS_SLOW"))
slow = pytest.mark.skipif(not SLOW, reason="PHONONCOUNTS_SLOW not set - skipping long Monte Carlo runs")

GAMMA_BAR = khz(3.5)
RECORD_NS = 90_000_000


def thermal_plan(side: DriveSide = DriveSide.anti_stokes, seconds: float = 20.0, seed: int = 7, **kwargs) -> SimPlan:
    """n_ac = 2, gamma_bar / 2 pi = 3.5 kHz, 2000 counts/s."""
    return SimPlan(
        side=side,
        osc=OscillatorParams(n_ac=2.0, gamma_ac_bar=kwargs.pop("gamma_bar", GAMMA_BAR)),
        detected_sideband_rate=kwargs.pop("rate", 2000.0),
        duration_ns=int(seconds * 1e9),
        seed=seed,
        **kwargs,
    )


@pytest.fixture(scope="session")
def thermal_stream() -> TagStream:
    """20 s anti-Stokes stream, no background, ideal-ish detectors."""
    return simulate_stream(thermal_plan())


@pytest.fixture(scope="session")
def thermal_records(thermal_stream):
    return segment_records(thermal_stream, RECORD_NS)


@pytest.fixture(scope="session")
def poisson_stream() -> TagStream:
    """Constant-intensity stream: 4000 counts/s of pure background for 10 s."""
    plan = SimPlan(
        osc=OscillatorParams(n_ac=0.0, gamma_ac_bar=GAMMA_BAR),
        detected_sideband_rate=0.0,
        background_rate=4000.0,
        duration_ns=10_000_000_000,
        seed=11,
    )
    return simulate_stream(plan)


@pytest.fixture(scope="session")
def afterpulse_stream() -> TagStream:
    """Constant-intensity stream with 10% afterpulsing at 24 ns, 20 ns dead time."""
    plan = SimPlan(
        osc=OscillatorParams(n_ac=0.0, gamma_ac_bar=GAMMA_BAR),
        detected_sideband_rate=0.0,
        background_rate=4000.0,
        detector=DetectorModel(dead_time_ns=20, afterpulse_prob=0.1, afterpulse_delay_ns=24),
        duration_ns=10_000_000_000,
        seed=13,
    )
    return simulate_stream(plan)


@pytest.fixture
def tiny_stream() -> TagStream:
    """Hand-built stream with known delays, two channels."""
    return TagStream(
        timestamps=np.array([100, 1_100, 1_600, 5_000, 5_050, 9_000], dtype=np.int64),
        channels=np.array([0, 1, 0, 1, 0, 1], dtype=np.uint8),
        duration_ns=10_000,
        channel_count=2,
        metadata={"seed": 0},
    )
