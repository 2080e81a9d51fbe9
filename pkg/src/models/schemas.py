"""
Physical parameter sets for the closed-form models.

All angular quantities are in rad/s; helpers convert from the Hz/MHz
values quoted for the device.
"""

import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


TWO_PI = 2 * math.pi


def mhz(value: float) -> float:
    """Angular frequency (rad/s) of a value given in MHz."""
    return TWO_PI * value * 1e6


def khz(value: float) -> float:
    """Angular frequency (rad/s) of a value given in kHz."""
    return TWO_PI * value * 1e3


# Reference values for the device
OMEGA_AC = mhz(315.3)
OMEGA_GAWBS = mhz(322.3)
KAPPA_C = mhz(47.2)
KAPPA_FC1 = mhz(1.71)
KAPPA_FC2 = mhz(1.21)
VACUUM_WAVELENGTH_M = 1548.3e-9
GAMMA_AC0 = khz(3.2)
GAMMA_BALL_COEFF = TWO_PI * 2.7e6  # rad/s/K^4
# Two coupling calibrations coexist: coherence-decay fits and power-sweep fits
G0_COHERENCE_FIT = khz(4.70)
G0_POWER_SWEEP = khz(4.58)
ETA_DET_REFERENCE = 0.18
FIVE_POINT_GRID_MHZ = (310.0, 312.0, 314.9, 315.4, 315.9)


class CavityParams(BaseModel):
    """Optical cavity and drive."""
    model_config = ConfigDict(extra="forbid")

    kappa_c: float = Field(default=KAPPA_C, gt=0.0, description="Optical linewidth (rad/s)")
    kappa_in: float = Field(default=0.5 * KAPPA_C, ge=0.0, description="Input coupling rate (rad/s)")
    g0: float = Field(default=G0_POWER_SWEEP, ge=0.0, description="Single-photon coupling (rad/s)")
    omega_c: float = Field(
        default=TWO_PI * 299_792_458.0 / VACUUM_WAVELENGTH_M, gt=0.0, description="Optical resonance (rad/s)"
    )
    omega_ac: float = Field(default=OMEGA_AC, gt=0.0, description="Acoustic mode frequency (rad/s)")
    Delta: Optional[float] = Field(default=None, description="Drive detuning (rad/s); default -/+ omega_ac per side")
    n_c: Optional[float] = Field(default=None, ge=0.0, description="Intracavity photons; derived from power when unset")

    @model_validator(mode="after")
    def _check_coupling(self) -> "CavityParams":
        if self.kappa_in > self.kappa_c:
            raise ValueError("kappa_in cannot exceed kappa_c")
        return self

    @property
    def eta_kappa(self) -> float:
        return self.kappa_in / self.kappa_c


class FilterChain(BaseModel):
    """Two cascaded Lorentzian filter cavities."""
    model_config = ConfigDict(extra="forbid")

    kappa_FC1: float = Field(default=KAPPA_FC1, gt=0.0, description="First filter linewidth (rad/s)")
    kappa_FC2: float = Field(default=KAPPA_FC2, gt=0.0, description="Second filter linewidth (rad/s)")
    center: float = Field(default=OMEGA_AC, gt=0.0, description="Filter centre, nominally omega_ac (rad/s)")


class GawbsPeak(BaseModel):
    """One Lorentzian GAWBS feature in the spectrum."""
    model_config = ConfigDict(extra="forbid")

    omega_G: float = Field(default=OMEGA_GAWBS, gt=0.0, description="Peak centre (rad/s)")
    kappa_G: float = Field(default=mhz(2.0), gt=0.0, description="Peak FWHM (rad/s)")
    Gamma_G: float = Field(default=0.0, ge=0.0, description="Peak count rate (counts/s)")


class GawbsModel(BaseModel):
    """Fiber geometry for the transverse-mode equation plus spectral peaks."""
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(default=0.624, ge=0.0, lt=1.0, description="Transverse/longitudinal velocity ratio")
    V_d: float = Field(default=5996.0, gt=0.0, description="Longitudinal sound velocity (m/s)")
    a: float = Field(default=62.5e-6, gt=0.0, description="Fiber radius (m)")
    peaks: list[GawbsPeak] = Field(default_factory=list, description="Spectral Lorentzians")


class ThermalLink(BaseModel):
    """Fridge bath, drive heating of the fiber and the two damping channels."""
    model_config = ConfigDict(extra="forbid")

    T_MC: float = Field(default=0.0244, gt=0.0, description="Mixing-chamber temperature (K)")
    beta_heat: float = Field(default=0.54, ge=0.0, description="Heating coefficient (K per power-unit^(1/(k+1)))")
    k_exp: float = Field(default=1.09, gt=-1.0, description="Conductance exponent")
    gamma_ac0: float = Field(default=GAMMA_AC0, gt=0.0, description="Intrinsic damping (rad/s)")
    gamma_ball_coeff: float = Field(default=GAMMA_BALL_COEFF, ge=0.0, description="Ballistic loss coefficient (rad/s/K^4)")
    heat_power_unit_w: float = Field(default=1e-3, gt=0.0, description="Power unit in which beta_heat is expressed (W)")


class RateModel(BaseModel):
    """Linear background decomposition and detection efficiency."""
    Gamma_bkg0: float = Field(default=12.4, ge=0.0, description="Power-independent background (counts/s)")
    Gamma_bkg1_red: float = Field(default=9.1, ge=0.0, description="Background slope, red drive (counts/s/uW)")
    Gamma_bkg1_blue: float = Field(default=12.0, ge=0.0, description="Background slope, blue drive (counts/s/uW)")
    Gamma_G1: float = Field(default=28.5, ge=0.0, description="GAWBS rate slope (counts/s/uW)")
    eta_det: float = Field(default=ETA_DET_REFERENCE, ge=0.0, le=1.0, description="Detection efficiency")


class BackactionResult(BaseModel):
    """Steady state of the driven mode at one input power."""
    n_ac: float = Field(..., description="Mean phonon occupancy")
    gamma_bar: float = Field(..., description="Total damping (rad/s)")
    rate_per_eta_det: float = Field(..., description="Sideband scattering rate divided by eta_det (counts/s)")
    n_th: float = Field(..., description="Bath occupancy after mixing fiber and fridge baths")
    T_fib: float = Field(..., description="Fiber temperature (K)")
    gamma_opt: float = Field(..., description="Optical damping magnitude (rad/s)")
    gamma_ac: float = Field(..., description="Intrinsic plus ballistic damping (rad/s)")
    n_c: float = Field(..., description="Intracavity photons")
