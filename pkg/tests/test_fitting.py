"""
Tests for the least-squares engine and the coherence, spectrum and
sideband-rate fits.
"""

import math

import numpy as np
import pytest

from src.correlator import CoincidenceHistogram
from src.errors import ConfigError, ConvergenceError, DataError
from src.fitting import (
    FitResult,
    PowerSweep,
    SpectrumMode,
    fit_background_power,
    fit_coherence,
    fit_power_sweep,
    fit_spectrum,
    fit_temperature_sweep,
    format_uncertainty,
    nlls_solve,
    numeric_jacobian,
    require_converged,
)
from src.models import (
    OMEGA_AC,
    FilterChain,
    GawbsModel,
    GawbsPeak,
    CavityParams,
    ThermalLink,
    backaction_occupancy,
    binned_thermal_coherence,
    mhz,
    sideband_rates_vs_temperature,
    spectrum_rate,
)
from src.schemas import DriveSide

from .conftest import GAMMA_BAR


def _noiseless_histogram(order: int, n_bins: int, bin_width_ns: int, scale: float):
    hist = CoincidenceHistogram(
        order=order,
        bin_width_ns=bin_width_ns,
        max_delay_ns=n_bins * bin_width_ns,
        counts=np.zeros((n_bins,) * (order - 1), dtype=np.uint32),
    )
    edges = np.arange(n_bins) * bin_width_ns * 1e-9
    axes = np.meshgrid(*([edges] * (order - 1)), indexing="ij")
    g = binned_thermal_coherence(order, axes, [bin_width_ns * 1e-9] * (order - 1), GAMMA_BAR)
    return hist, scale * np.asarray(g)


def _sweep(label: str, powers, link: ThermalLink, cavity: CavityParams, eta: float) -> PowerSweep:
    red = [eta * backaction_occupancy(p, cavity, link, DriveSide.anti_stokes).rate_per_eta_det for p in powers]
    blue = [eta * backaction_occupancy(p, cavity, link, DriveSide.stokes).rate_per_eta_det for p in powers]
    return PowerSweep(label=label, P_in=list(powers), R_AS=red, R_S=blue)


class TestSolver:
    """Tests for the Levenberg-Marquardt engine."""

    def test_exponential(self):
        """Recovers amplitude and rate of a noiseless decay."""
        x = np.linspace(0.0, 5.0, 50)
        y = 3.0 * np.exp(-0.7 * x)
        result = nlls_solve(lambda x, p: p[0] * np.exp(-p[1] * x), x, y, [1.0, 1.0], names=["a", "k"])
        assert result.converged
        assert result.value("a") == pytest.approx(3.0, rel=1e-6)
        assert result.value("k") == pytest.approx(0.7, rel=1e-6)
        assert len(result.residuals) == 50

    def test_bounds_respected(self):
        """Parameters never leave their bounds."""
        x = np.linspace(0.0, 1.0, 20)
        y = -2.0 * x
        result = nlls_solve(lambda x, p: p[0] * x, x, y, [1.0], bounds=([0.0], [10.0]))
        assert result.values[0] >= 0.0

    def test_initial_outside_bounds(self):
        """A start outside the bounds is a configuration error."""
        with pytest.raises(ConfigError):
            nlls_solve(lambda x, p: p[0] * x, np.ones(3), np.ones(3), [5.0], bounds=([0.0], [1.0]))

    def test_bad_weights(self):
        """Weights must be positive and shaped like the data."""
        with pytest.raises(ConfigError):
            nlls_solve(lambda x, p: p[0] * x, np.ones(3), np.ones(3), [1.0], weights=np.array([1.0, 0.0, 1.0]))

    def test_non_identifiable(self):
        """Two parameters entering only as a sum are flagged."""
        x = np.linspace(0.0, 1.0, 10)
        result = nlls_solve(lambda x, p: (p[0] + p[1]) * x, x, 2.0 * x, [0.5, 0.5])
        assert not result.identifiable

    def test_numeric_jacobian(self):
        """Central differences match the analytic derivative."""
        jac = numeric_jacobian(lambda p: np.array([p[0] ** 2, p[0] * p[1]]), [2.0, 3.0])
        np.testing.assert_allclose(jac, [[4.0, 0.0], [3.0, 2.0]], rtol=1e-6)

    def test_require_converged(self):
        """A non-converged result raises and carries the last iterate."""
        result = FitResult(names=["a"], values=[1.0], uncertainties=[0.1], cost=1.0, converged=False, message="stuck")
        with pytest.raises(ConvergenceError) as excinfo:
            require_converged(result, "test")
        assert excinfo.value.result is result
        assert require_converged(result.model_copy(update={"converged": True}), "test").converged


class TestFormatting:
    """Tests for compact uncertainty notation."""

    def test_last_digit(self):
        """The uncertainty sits on the last printed digit."""
        assert format_uncertainty(1.9803, 0.0021) == "1.980(2)"
        assert format_uncertainty(12.34, 0.56) == "12.3(6)"

    def test_rounding_up_a_decade(self):
        """0.096 rounds to one unit in the first decimal."""
        assert format_uncertainty(2.345, 0.096) == "2.3(1)"

    def test_missing_sigma(self):
        """Without a usable sigma only the value is printed."""
        assert format_uncertainty(2.5, math.nan) == "2.5"


class TestCoherenceFit:
    """Tests for A + B f_n(gamma_bar tau) histogram fits."""

    @pytest.mark.parametrize(("order", "n_bins", "width", "g_zero"), [(2, 200, 2_000, 2.0), (3, 40, 5_000, 6.0)])
    def test_noiseless(self, order, n_bins, width, g_zero):
        """Exact bin-averaged data returns the generating parameters."""
        hist, values = _noiseless_histogram(order, n_bins, width, 1e6)
        fit = fit_coherence(hist, values=values)
        assert fit.converged
        assert fit.value("A") == pytest.approx(1e6, rel=1e-4)
        assert fit.value("gamma_bar") == pytest.approx(GAMMA_BAR, rel=1e-4)
        assert fit.extras["g_zero"] == pytest.approx(g_zero, rel=1e-4)
        assert fit.extras["gamma_bar_over_2pi_hz"] == pytest.approx(3500.0, rel=1e-4)

    def test_flat_histogram(self):
        """A flat histogram leaves B and gamma_bar unidentifiable."""
        hist = CoincidenceHistogram(order=2, bin_width_ns=10, max_delay_ns=100, counts=np.full(10, 7, dtype=np.uint32))
        fit = fit_coherence(hist)
        assert not fit.identifiable
        assert not fit.converged
        assert fit.value("A") == 7.0
        assert fit.extras["g_zero"] == 1.0

    def test_empty_histogram(self):
        """All-zero counts cannot be fitted."""
        hist = CoincidenceHistogram(order=2, bin_width_ns=10, max_delay_ns=100, counts=np.zeros(10, dtype=np.uint32))
        with pytest.raises(DataError):
            fit_coherence(hist)

    def test_values_shape_checked(self):
        """Replacement values must match the histogram grid."""
        hist, values = _noiseless_histogram(2, 20, 2_000, 1e6)
        with pytest.raises(DataError):
            fit_coherence(hist, values=values[:10])


class TestSpectrumFit:
    """Tests for the detuning-dependence fits."""

    def test_five_point(self):
        """Background and resonant rate from five detunings."""
        Delta = -np.array([mhz(f) for f in (310.0, 312.0, 314.9, 315.4, 315.9)])
        rate = spectrum_rate(Delta, 20.0, 100.0, GawbsModel(), FilterChain(), OMEGA_AC)
        fit = fit_spectrum(Delta, rate, mode=SpectrumMode.five_point)
        assert fit.value("Gamma_bkg") == pytest.approx(20.0, rel=1e-6)
        assert fit.value("Gamma_res") == pytest.approx(100.0, rel=1e-6)

    def test_five_point_needs_five(self):
        """Fewer than five points is a data error."""
        with pytest.raises(DataError):
            fit_spectrum([mhz(315.0)] * 4, [1.0] * 4)

    def test_full_with_gawbs_peak(self):
        """The full fit recovers sideband and GAWBS parameters."""
        Delta = -mhz(1.0) * np.arange(305.0, 330.0, 0.1)
        peak = GawbsPeak(omega_G=mhz(322.3), kappa_G=mhz(2.0), Gamma_G=40.0)
        rate = spectrum_rate(Delta, 20.0, 100.0, GawbsModel(peaks=[peak]), FilterChain(), OMEGA_AC)
        fit = fit_spectrum(Delta, rate, mode=SpectrumMode.full, n_gawbs_peaks=1)
        assert fit.value("omega_ac") == pytest.approx(OMEGA_AC, rel=1e-5)
        assert fit.value("Gamma_res") == pytest.approx(100.0, rel=1e-3)
        assert fit.value("Gamma_bkg") == pytest.approx(20.0, rel=1e-3)
        assert fit.value("omega_G0") == pytest.approx(mhz(322.3), rel=1e-5)
        assert fit.value("kappa_G0") == pytest.approx(mhz(2.0), rel=1e-3)

    def test_background_power(self):
        """Gamma_bkg(P) = Gamma_0 + Gamma_1 P."""
        powers = [0.0, 1.0, 2.0, 3.0]
        fit = fit_background_power(powers, [12.4 + 5.0 * p for p in powers])
        assert fit.value("Gamma_0") == pytest.approx(12.4, rel=1e-8)
        assert fit.value("Gamma_1") == pytest.approx(5.0, rel=1e-8)

    def test_background_power_needs_two_points(self):
        """A single point does not define a line."""
        with pytest.raises(DataError):
            fit_background_power([1.0], [2.0])


class TestSidebandFits:
    """Tests for the power and temperature sweeps."""

    POWERS = [2e-7, 5e-7, 1e-6, 2e-6, 3e-6, 4e-6, 5e-6]

    def test_power_sweep(self):
        """Noiseless sweeps return the bath temperature, heat load and efficiency."""
        cavity, link = CavityParams(), ThermalLink()
        sweep = _sweep("a", self.POWERS, link, cavity, 0.18)
        start = link.model_copy(update={"T_MC": 1.1 * link.T_MC, "beta_heat": 0.9 * link.beta_heat})
        fit = fit_power_sweep(
            [sweep], cavity=cavity, link=start, eta_det_init=0.2, fixed={"k_exp": link.k_exp, "g0": cavity.g0}
        )
        assert fit.value("T_MC") == pytest.approx(link.T_MC, rel=1e-3)
        assert fit.value("eta_det_a") == pytest.approx(0.18, rel=1e-3)
        assert fit.extras["beta_heat"] == pytest.approx(link.beta_heat, rel=1e-3)
        assert fit.extras["n_th_zero_power"] == pytest.approx(1.164, abs=0.01)

    def test_power_sweep_without_heating(self):
        """With the heat load pinned at zero the bath stays at T_MC."""
        cavity = CavityParams()
        link = ThermalLink(beta_heat=0.0)
        sweep = _sweep("cold", self.POWERS, link, cavity, 0.18)
        start = link.model_copy(update={"T_MC": 1.1 * link.T_MC})
        fit = fit_power_sweep(
            [sweep],
            cavity=cavity,
            link=start,
            fixed={"heat_load": 0.0, "k_exp": link.k_exp, "g0": cavity.g0},
        )
        assert fit.value("T_MC") == pytest.approx(link.T_MC, rel=1e-3)
        assert fit.extras["beta_heat"] == 0.0
        assert fit.extras["beta_heat_sigma"] == 0.0

    def test_shared_efficiency(self):
        """Two sweeps can share one efficiency."""
        cavity, link = CavityParams(), ThermalLink()
        sweeps = [_sweep("a", self.POWERS[:4], link, cavity, 0.18), _sweep("b", self.POWERS[3:], link, cavity, 0.18)]
        fit = fit_power_sweep(sweeps, cavity=cavity, link=link, shared_eta=True, fixed={"k_exp": link.k_exp, "g0": cavity.g0})
        assert "eta_det" in fit.names
        assert fit.value("eta_det") == pytest.approx(0.18, rel=1e-3)

    def test_unknown_fixed_parameter(self):
        """Only global parameters can be pinned."""
        sweep = PowerSweep(P_in=[1e-6], R_AS=[10.0], R_S=[20.0])
        with pytest.raises(ConfigError):
            fit_power_sweep([sweep], fixed={"eta_det": 0.2})

    def test_sweep_columns_aligned(self):
        """Every rate column needs one entry per power."""
        with pytest.raises(ValueError):
            PowerSweep(P_in=[1e-6, 2e-6], R_AS=[1.0], R_S=[1.0, 2.0])

    def test_temperature_sweep(self):
        """Rates a n(T) and a (n(T) + 1) give back a; cold points are dropped."""
        T = np.array([0.03, 0.06, 0.1, 0.2, 0.4, 0.8])
        red, blue = sideband_rates_vs_temperature(T, 3.0, OMEGA_AC)
        fit = fit_temperature_sweep(T, red, blue, OMEGA_AC)
        assert fit.value("a") == pytest.approx(3.0, rel=1e-6)
        assert fit.extras["points_used"] == 5

    def test_temperature_sweep_too_cold(self):
        """At least two points above 50 mK are needed."""
        with pytest.raises(DataError):
            fit_temperature_sweep([0.02, 0.03, 0.06], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0], OMEGA_AC)
