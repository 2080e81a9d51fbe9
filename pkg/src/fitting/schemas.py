"""
Pydantic schemas for fit inputs and results.
"""

import math
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, Field, model_validator


class SpectrumMode(str, Enum):
    """Which spectrum fit recipe to run."""
    full = "full"  # sideband plus GAWBS peaks, centres and widths free
    five_point = "five_point"  # background and on-resonance rate only


def format_uncertainty(value: float, sigma: float) -> str:
    """Compact notation with the uncertainty on the last digit, e.g. 1.980(2)."""
    if not (math.isfinite(sigma) and sigma > 0):
        return f"{value:g}"
    exponent = math.floor(math.log10(sigma))
    decimals = max(0, -exponent)
    digit = round(sigma * 10**decimals)
    if digit >= 10 and decimals > 0:
        decimals -= 1
        digit = round(sigma * 10**decimals)
    return f"{value:.{decimals}f}({digit})"


class FitResult(BaseModel):
    """Best-fit parameters with one-sigma uncertainties."""
    names: list[str] = Field(..., description="Parameter names")
    values: list[float] = Field(..., description="Best-fit values")
    uncertainties: list[float] = Field(..., description="One-sigma uncertainties")
    covariance: list[list[float]] = Field(default_factory=list, description="Parameter covariance")
    residuals: list[float] = Field(default_factory=list, description="Weighted residuals, one per data point")
    cost: float = Field(..., description="Weighted sum of squared residuals")
    converged: bool = Field(..., description="Convergence criteria met")
    iterations: int = Field(default=0, ge=0, description="Accepted and rejected LM iterations")
    message: str = Field(default="", description="Stopping reason")
    condition_number: float = Field(default=1.0, description="Condition number of the normal matrix")
    identifiable: bool = Field(default=True, description="False when the normal matrix was singular")
    extras: dict[str, Any] = Field(default_factory=dict, description="Derived quantities")

    @model_validator(mode="after")
    def _lengths(self) -> "FitResult":
        if not len(self.names) == len(self.values) == len(self.uncertainties):
            raise ValueError("names, values and uncertainties must have equal length")
        return self

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    @property
    def sigmas(self) -> dict[str, float]:
        return dict(zip(self.names, self.uncertainties))

    def value(self, name: str) -> float:
        return self.params[name]

    def sigma(self, name: str) -> float:
        return self.sigmas[name]

    def formatted(self, name: str) -> str:
        return format_uncertainty(self.value(name), self.sigma(name))


class PowerSweep(BaseModel):
    """Sideband rates for both drive sides across input powers."""
    label: str = Field(default="sweep", description="Identifier, used to name the per-sweep efficiency")
    P_in: list[float] = Field(..., description="Input powers (W)")
    R_AS: list[float] = Field(..., description="Anti-Stokes rates, red drive (counts/s)")
    R_S: list[float] = Field(..., description="Stokes rates, blue drive (counts/s)")
    sigma_AS: Optional[list[float]] = Field(default=None, description="One-sigma errors on R_AS")
    sigma_S: Optional[list[float]] = Field(default=None, description="One-sigma errors on R_S")

    @model_validator(mode="after")
    def _aligned(self) -> "PowerSweep":
        n = len(self.P_in)
        if n == 0:
            raise ValueError("a sweep needs at least one power")
        for name in ("R_AS", "R_S", "sigma_AS", "sigma_S"):
            column = getattr(self, name)
            if column is not None and len(column) != n:
                raise ValueError(f"{name} must have one entry per power")
        return self
