"""
Least-squares engine and the coherence, spectrum and sideband-rate fits.
"""

from .schemas import FitResult, PowerSweep, SpectrumMode, format_uncertainty
from .solver import nlls_solve, numeric_jacobian, require_converged
from .coherence import coherence_model, fit_coherence, seed_coherence
from .spectrum import fit_background_power, fit_spectrum
from .thermal import fit_power_sweep, fit_temperature_sweep

__all__ = [
    "FitResult",
    "PowerSweep",
    "SpectrumMode",
    "coherence_model",
    "fit_background_power",
    "fit_coherence",
    "fit_power_sweep",
    "fit_spectrum",
    "fit_temperature_sweep",
    "format_uncertainty",
    "nlls_solve",
    "numeric_jacobian",
    "require_converged",
    "seed_coherence",
]
