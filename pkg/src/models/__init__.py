"""
Closed-form physics: thermal and heralded coherences, the Wick oracle,
the spectrum model, the GAWBS mode solver and backaction with heating.
"""

from .schemas import (
    ETA_DET_REFERENCE,
    FIVE_POINT_GRID_MHZ,
    G0_COHERENCE_FIT,
    G0_POWER_SWEEP,
    KAPPA_C,
    KAPPA_FC1,
    KAPPA_FC2,
    OMEGA_AC,
    OMEGA_GAWBS,
    BackactionResult,
    CavityParams,
    FilterChain,
    GawbsModel,
    GawbsPeak,
    RateModel,
    ThermalLink,
    khz,
    mhz,
)
from .thermal import (
    binned_thermal_coherence,
    coherence_terms,
    conditional_coherence,
    conditional_g2,
    conditional_g2_from_coherences,
    conditional_occupancy,
    occupancy_ratio,
    occupancy_ratio_from_coherences,
    permanent,
    thermal_coherence,
    wick_oracle,
)
from .spectrum import (
    GawbsMode,
    filter_transmission,
    gawbs_lorentzian,
    gawbs_mode_freqs,
    gawbs_mode_roots,
    mode_equation,
    spectrum_rate,
)
from .backaction import (
    backaction_floor,
    backaction_occupancy,
    bose_occupancy,
    drive_detuning,
    equipartition_occupancy,
    fiber_temperature,
    intracavity_photons,
    sideband_rates_vs_temperature,
    steady_state,
    thermal_bath_occupancy,
)

__all__ = [
    "ETA_DET_REFERENCE",
    "FIVE_POINT_GRID_MHZ",
    "G0_COHERENCE_FIT",
    "G0_POWER_SWEEP",
    "KAPPA_C",
    "KAPPA_FC1",
    "KAPPA_FC2",
    "OMEGA_AC",
    "OMEGA_GAWBS",
    "BackactionResult",
    "CavityParams",
    "FilterChain",
    "GawbsMode",
    "GawbsModel",
    "GawbsPeak",
    "RateModel",
    "ThermalLink",
    "backaction_floor",
    "backaction_occupancy",
    "binned_thermal_coherence",
    "bose_occupancy",
    "coherence_terms",
    "conditional_coherence",
    "conditional_g2",
    "conditional_g2_from_coherences",
    "conditional_occupancy",
    "drive_detuning",
    "equipartition_occupancy",
    "fiber_temperature",
    "filter_transmission",
    "gawbs_lorentzian",
    "gawbs_mode_freqs",
    "gawbs_mode_roots",
    "intracavity_photons",
    "khz",
    "mhz",
    "mode_equation",
    "occupancy_ratio",
    "occupancy_ratio_from_coherences",
    "permanent",
    "sideband_rates_vs_temperature",
    "spectrum_rate",
    "steady_state",
    "thermal_bath_occupancy",
    "thermal_coherence",
    "wick_oracle",
]
