"""
Simulation plans derived from the backaction model, e.g. for power sweeps.
"""

from ..models import CavityParams, ThermalLink, backaction_occupancy
from ..schemas import DriveSide
from .schemas import DetectorModel, OscillatorParams, SimPlan


def plan_from_backaction(
    P_in: float,
    cavity: CavityParams,
    link: ThermalLink,
    side: DriveSide,
    eta_det: float,
    duration_ns: int,
    seed: int = 0,
    background_rate: float = 0.0,
    detector: DetectorModel | None = None,
) -> SimPlan:
    """Plan whose occupancy, damping and sideband rate follow backaction_occupancy at P_in."""
    state = backaction_occupancy(P_in, cavity, link, side)
    return SimPlan(
        side=side,
        osc=OscillatorParams(n_ac=state.n_ac, gamma_ac_bar=state.gamma_bar, omega_ac=cavity.omega_ac),
        detected_sideband_rate=eta_det * state.rate_per_eta_det,
        background_rate=background_rate,
        detector=detector or DetectorModel(),
        duration_ns=duration_ns,
        seed=seed,
    )
