"""
Tests for coincidence histograms, plateau helpers, the PCH1 format and
background correction.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from src.correlator import (
    CoincidenceHistogram,
    coincidence_histogram,
    collapse_axis,
    correct_background,
    correct_g2,
    estimate_epsilon,
    far_bin_plateau,
    forward_mix,
    forward_mix_g2,
    histogram_frame,
    plateau_normalize,
    read_histogram,
    slice_axis,
    write_histogram,
)
from src.errors import ConfigError, DataError
from src.fitting import fit_coherence
from src.models import binned_thermal_coherence
from src.schemas import ChannelMode, RejectionReason
from src.simulator import simulate_stream
from src.tagstream import segment_records

from .conftest import GAMMA_BAR, RECORD_NS, slow, thermal_plan


def _grid(order: int, n_bins: int, width_s: float) -> np.ndarray:
    edges = np.arange(n_bins) * width_s
    axes = np.meshgrid(*([edges] * (order - 1)), indexing="ij")
    return binned_thermal_coherence(order, axes, [width_s] * (order - 1), GAMMA_BAR)


class TestCoincidenceHistogram:
    """Tests for n-fold histogramming on hand-built and simulated streams."""

    def test_order2_known_delays(self, tiny_stream):
        """Every ordered pair below max_delay lands in its delay bin."""
        records = segment_records(tiny_stream, 10_000)
        hist = coincidence_histogram(tiny_stream, records, 2, 1_000, 4_000)
        assert hist.counts.tolist() == [2, 2, 0, 5]
        assert hist.total_tags_used == 6

    def test_cross_only(self, tiny_stream):
        """Cross-only mode drops same-channel pairs."""
        records = segment_records(tiny_stream, 10_000)
        hist = coincidence_histogram(tiny_stream, records, 2, 1_000, 4_000, channel_mode=ChannelMode.cross_only)
        assert hist.counts.tolist() == [2, 1, 0, 3]
        assert hist.channel_mode == ChannelMode.cross_only

    def test_order3_known_delays(self, tiny_stream):
        """Triples are binned on both consecutive delays."""
        records = segment_records(tiny_stream, 10_000)
        hist = coincidence_histogram(tiny_stream, records, 3, 1_000, 4_000)
        expected = np.zeros((4, 4), dtype=int)
        expected[1, 0] = 1
        expected[1, 3] = 4
        expected[0, 3] = 3
        expected[3, 0] = 2
        expected[3, 3] = 2
        np.testing.assert_array_equal(hist.counts, expected)

    def test_order4_known_delays(self, tiny_stream):
        """Quadruples are binned on all three consecutive delays."""
        records = segment_records(tiny_stream, 10_000)
        hist = coincidence_histogram(tiny_stream, records, 4, 1_000, 4_000)
        expected = np.zeros((4, 4, 4), dtype=int)
        expected[1, 0, 3] = 2
        expected[1, 3, 0] = 2
        expected[1, 3, 3] = 2
        expected[0, 3, 0] = 1
        expected[0, 3, 3] = 1
        expected[3, 0, 3] = 2
        np.testing.assert_array_equal(hist.counts, expected)

    def test_order4_cross_only(self, tiny_stream):
        """Cross-only quadruples alternate detectors at every step."""
        records = segment_records(tiny_stream, 10_000)
        hist = coincidence_histogram(tiny_stream, records, 4, 1_000, 4_000, channel_mode=ChannelMode.cross_only)
        expected = np.zeros((4, 4, 4), dtype=int)
        expected[1, 0, 3] = 1
        expected[0, 3, 0] = 1
        expected[1, 3, 3] = 1
        expected[3, 0, 3] = 1
        np.testing.assert_array_equal(hist.counts, expected)

    def test_tuples_stay_in_one_record(self, tiny_stream):
        """Pairs straddling a record boundary are not counted."""
        records = segment_records(tiny_stream, 5_000)
        hist = coincidence_histogram(tiny_stream, records, 2, 1_000, 4_000)
        assert hist.counts.tolist() == [2, 2, 0, 1]

    def test_invalid_records_skipped(self, tiny_stream):
        """Tags inside rejected records contribute nothing."""
        records = [r.reject(RejectionReason.burst) for r in segment_records(tiny_stream, 10_000)]
        hist = coincidence_histogram(tiny_stream, records, 2, 1_000, 4_000)
        assert hist.total == 0
        assert hist.total_tags_used == 0

    def test_bad_arguments(self, tiny_stream):
        """Unsupported order, zero bin width or too long a delay are rejected."""
        records = segment_records(tiny_stream, 5_000)
        with pytest.raises(ConfigError):
            coincidence_histogram(tiny_stream, records, 5, 1_000, 4_000)
        with pytest.raises(ConfigError):
            coincidence_histogram(tiny_stream, records, 2, 0, 4_000)
        with pytest.raises(ConfigError):
            coincidence_histogram(tiny_stream, records, 2, 1_000, 6_000)

    def test_workers_do_not_change_counts(self, thermal_stream, thermal_records, monkeypatch):
        """Chunked threaded histogramming equals the serial result."""
        monkeypatch.setattr("src.correlator.histogram.CHUNK_STARTS", 5_000)
        serial = coincidence_histogram(thermal_stream, thermal_records, 3, 10_000, 200_000, workers=1)
        threaded = coincidence_histogram(thermal_stream, thermal_records, 3, 10_000, 200_000, workers=4)
        np.testing.assert_array_equal(serial.counts, threaded.counts)

    def test_thermal_bunching(self, thermal_stream, thermal_records):
        """A thermal stream gives g2(0) close to 2 and the simulated linewidth."""
        hist = coincidence_histogram(thermal_stream, thermal_records, 2, 2_000, 1_000_000)
        fit = fit_coherence(hist)
        assert fit.converged
        assert fit.extras["g_zero"] == pytest.approx(2.0, abs=0.2)
        assert fit.value("gamma_bar") == pytest.approx(GAMMA_BAR, rel=0.3)

    def test_poisson_is_flat(self, poisson_stream):
        """Constant intensity gives g2 = 1 near zero delay."""
        records = segment_records(poisson_stream, RECORD_NS)
        hist = coincidence_histogram(poisson_stream, records, 2, 10_000, 500_000)
        g2 = plateau_normalize(hist, hist.counts.mean())
        assert g2[:5].mean() == pytest.approx(1.0, abs=0.05)

    def test_shape_validated(self):
        """Counts must match the bin grid and be non-negative integers."""
        with pytest.raises(ValidationError):
            CoincidenceHistogram(order=2, bin_width_ns=10, max_delay_ns=100, counts=np.zeros(9, dtype=np.uint32))
        with pytest.raises(ValidationError):
            CoincidenceHistogram(order=2, bin_width_ns=10, max_delay_ns=100, counts=np.zeros(10))


@pytest.fixture(scope="module")
def long_thermal():
    """150 s at 3000 counts/s in a single record."""
    stream = simulate_stream(thermal_plan(seconds=150.0, seed=31, rate=3000.0))
    return stream, segment_records(stream, stream.duration_ns)


def _far_normalized(counts: np.ndarray, first: int) -> np.ndarray:
    counts = counts.astype(float)
    return counts / counts[(slice(first, None),) * counts.ndim].mean()


class TestSimulatedHigherOrders:
    """Order-4 structure and background correction on long simulated runs."""

    WIDTH_NS = 20_000
    FAR_BIN = 23  # first 20 us bin beyond 10 / gamma_bar

    @slow
    def test_order4_factorizes_at_long_middle_delay(self, long_thermal):
        """With tau2 beyond 10 / gamma_bar, g4(tau1, tau2, tau3) = g2(tau1) g2(tau3)."""
        stream, records = long_thermal
        hist = coincidence_histogram(stream, records, 4, self.WIDTH_NS, 600_000)
        assert hist.lower_edges_ns[self.FAR_BIN] * 1e-9 > 10.0 / GAMMA_BAR
        pairs = collapse_axis(hist, axis=1, start_bin=self.FAR_BIN)
        measured = _far_normalized(pairs.counts, self.FAR_BIN)
        g2 = _grid(2, hist.n_bins, self.WIDTH_NS * 1e-9)
        expected = _far_normalized(np.outer(g2, g2), self.FAR_BIN)
        assert measured[0, 0] == pytest.approx(expected[0, 0], rel=0.1)
        np.testing.assert_allclose(measured[:3, :3], expected[:3, :3], rtol=0.1)
        row = slice_axis(measured, 0, 0)
        assert row[self.FAR_BIN:].mean() == pytest.approx(g2[0], rel=0.06)

    @slow
    def test_order4_marginal_is_order3(self, long_thermal):
        """Collapsing tau3 beyond 10 / gamma_bar leaves the g3 shape."""
        stream, records = long_thermal
        hist = coincidence_histogram(stream, records, 4, self.WIDTH_NS, 600_000)
        triples = collapse_axis(hist, axis=2, start_bin=self.FAR_BIN)
        assert triples.order == 3
        measured = _far_normalized(triples.counts, self.FAR_BIN)
        expected = _far_normalized(_grid(3, hist.n_bins, self.WIDTH_NS * 1e-9), self.FAR_BIN)
        np.testing.assert_allclose(measured[:2, :2], expected[:2, :2], rtol=0.1)

    @slow
    def test_background_corrected_bunching(self):
        """Thermal signal plus 10% Poisson background corrects back to g2(0) = 2."""
        stream = simulate_stream(thermal_plan(seconds=600.0, seed=43, background_rate=200.0))
        records = segment_records(stream, stream.duration_ns)
        hist = coincidence_histogram(stream, records, 2, 2_000, 1_000_000, channel_mode=ChannelMode.cross_only)
        fit = fit_coherence(hist)
        mixed = fit.extras["g_zero"]
        assert mixed == pytest.approx((2.0 + 2 * 0.1 + 0.1**2) / 1.1**2, abs=0.04)
        assert float(correct_g2(mixed, 0.1)) == pytest.approx(2.0, abs=0.05)
        coherence = plateau_normalize(hist, fit.value("A"))
        corrected = correct_background({2: coherence}, 0.1)[2]
        assert corrected[0] > coherence[0]


class TestPlateauHelpers:
    """Tests for normalization, far-bin plateau and axis slicing."""

    def test_plateau_normalize(self):
        """counts / A, with A > 0 enforced."""
        hist = CoincidenceHistogram(
            order=2, bin_width_ns=10, max_delay_ns=40, counts=np.array([8, 4, 4, 4], dtype=np.uint32)
        )
        np.testing.assert_allclose(plateau_normalize(hist, 4.0), [2.0, 1.0, 1.0, 1.0])
        with pytest.raises(ConfigError):
            plateau_normalize(hist, 0.0)

    def test_far_bin_plateau(self):
        """Mean over bins starting beyond 10 / gamma_bar."""
        hist = CoincidenceHistogram(
            order=2, bin_width_ns=10_000, max_delay_ns=1_000_000, counts=np.arange(100, dtype=np.uint32)
        )
        assert far_bin_plateau(hist, GAMMA_BAR) == pytest.approx(72.5)

    def test_far_bin_plateau_needs_range(self):
        """Too short a delay range leaves no far bins."""
        hist = CoincidenceHistogram(
            order=2, bin_width_ns=1_000, max_delay_ns=100_000, counts=np.ones(100, dtype=np.uint32)
        )
        with pytest.raises(DataError):
            far_bin_plateau(hist, GAMMA_BAR)

    def test_collapse_axis(self):
        """Summing one axis of an order-3 histogram gives an order-2 one."""
        counts = np.arange(16, dtype=np.uint32).reshape(4, 4)
        hist = CoincidenceHistogram(order=3, bin_width_ns=10, max_delay_ns=40, counts=counts)
        collapsed = collapse_axis(hist, axis=0, start_bin=1)
        assert collapsed.order == 2
        assert collapsed.counts.tolist() == counts[1:].sum(axis=0).tolist()
        assert collapsed.metadata["collapsed_from_bin"] == 1

    def test_collapse_order2_rejected(self):
        """Order 2 has nothing to collapse."""
        hist = CoincidenceHistogram(order=2, bin_width_ns=10, max_delay_ns=40, counts=np.ones(4, dtype=np.uint32))
        with pytest.raises(ConfigError):
            collapse_axis(hist, axis=0)

    def test_slice_axis(self):
        """One bin of one axis of a coherence grid."""
        grid = np.arange(27.0).reshape(3, 3, 3)
        np.testing.assert_array_equal(slice_axis(grid, 0, 2), grid[2])
        with pytest.raises(ConfigError):
            slice_axis(grid, 3, 0)


class TestHistogramFiles:
    """Tests for the PCH1 binary format and table export."""

    @pytest.fixture
    def hist(self, tiny_stream):
        records = segment_records(tiny_stream, 10_000)
        hist = coincidence_histogram(tiny_stream, records, 3, 1_000, 4_000)
        return hist.model_copy(update={"normalization": 1.5})

    def test_roundtrip(self, hist, tmp_path):
        """Counts, header fields and metadata survive a write/read cycle."""
        path = tmp_path / "g3.pch"
        size = write_histogram(hist, path)
        assert size == path.stat().st_size
        loaded = read_histogram(path)
        np.testing.assert_array_equal(loaded.counts, hist.counts)
        assert loaded.order == 3
        assert loaded.bin_width_ns == 1_000
        assert loaded.normalization == 1.5
        assert loaded.metadata == hist.metadata

    def test_bad_magic(self, tmp_path):
        """Files without the PCH1 magic are rejected."""
        path = tmp_path / "bad.pch"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(DataError, match="bad magic"):
            read_histogram(path)

    def test_truncated(self, hist, tmp_path):
        """A file missing its last bytes is rejected."""
        path = tmp_path / "g3.pch"
        write_histogram(hist, path)
        path.write_bytes(path.read_bytes()[:-6])
        with pytest.raises(DataError, match="truncated"):
            read_histogram(path)

    def test_histogram_frame(self, hist):
        """One row per bin with delay columns, count and coherence."""
        frame = histogram_frame(hist, hist.counts / 2.0)
        assert list(frame.columns) == ["tau1_ns", "tau2_ns", "count", "coherence"]
        assert len(frame) == 16
        assert frame["count"].sum() == hist.total


class TestBackground:
    """Tests for epsilon and the background mixing relations."""

    def test_estimate_epsilon(self):
        """epsilon is the rate ratio, flagged outside the working band."""
        assert estimate_epsilon(100.0, 1000.0).epsilon == pytest.approx(0.1)
        assert estimate_epsilon(100.0, 1000.0).in_operating_band
        assert not estimate_epsilon(500.0, 1000.0).in_operating_band
        with pytest.raises(ConfigError):
            estimate_epsilon(1.0, 0.0)

    def test_g2_mixing_value(self):
        """g2 = 2 with epsilon = 0.1 is measured as 2.21 / 1.21."""
        assert forward_mix_g2(2.0, 0.1) == pytest.approx(2.21 / 1.21)
        assert correct_g2(2.21 / 1.21, 0.1) == pytest.approx(2.0)

    def test_zero_epsilon_is_identity(self):
        """No background leaves coherences unchanged."""
        g2 = _grid(2, 8, 5e-6)
        np.testing.assert_allclose(correct_background({2: g2}, 0.0)[2], g2)

    def test_negative_epsilon_rejected(self):
        """epsilon must be non-negative."""
        with pytest.raises(ConfigError):
            correct_g2(1.5, -0.1)

    @pytest.mark.parametrize("epsilon", [0.05, 0.2])
    def test_roundtrip_through_order4(self, epsilon):
        """Correcting forward-mixed grids recovers the true coherences of every order."""
        n, width = 5, 10e-6
        true = {2: _grid(2, 4 * n, width), 3: _grid(3, 2 * n, width), 4: _grid(4, n, width)}
        measured = {
            2: forward_mix(2, true[2], {}, epsilon),
            3: forward_mix(3, true[3], {2: true[2]}, epsilon),
            4: forward_mix(4, true[4], {2: true[2], 3: true[3]}, epsilon),
        }
        corrected = correct_background(measured, epsilon)
        for order in (2, 3, 4):
            np.testing.assert_allclose(corrected[order], true[order], rtol=0, atol=1e-12)

    def test_mixing_pulls_towards_one(self):
        """Background lowers the zero-delay bunching."""
        n, width = 4, 10e-6
        g2, g3 = _grid(2, 2 * n, width), _grid(3, n, width)
        mixed = forward_mix(3, g3, {2: g2}, 0.1)
        assert mixed[0, 0] < g3[0, 0]
        assert mixed[0, 0] > 1.0

    def test_missing_lower_order(self):
        """Order 3 without order 2 cannot be corrected."""
        with pytest.raises(DataError, match="missing lower-order"):
            correct_background({3: _grid(3, 4, 1e-5)}, 0.1)

    def test_insufficient_coverage(self):
        """Order 2 must span twice the order-3 delay range."""
        with pytest.raises(DataError, match="missing lower-order"):
            correct_background({2: _grid(2, 4, 1e-5), 3: _grid(3, 4, 1e-5)}, 0.1)
