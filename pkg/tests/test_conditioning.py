"""
Tests for afterpulse removal and statistical burst rejection.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from src.conditioning import (
    BurstPolicy,
    burst_threshold,
    condition_stream,
    count_distribution,
    expected_count_distribution,
    filter_afterpulses,
    log_count_probability,
    reject_bursts,
)
from src.correlator import coincidence_histogram
from src.errors import ConfigError
from src.schemas import CountModel, RejectionReason
from src.simulator import BurstInjection, DetectorModel, OscillatorParams, SimPlan, simulate_stream
from src.tagstream import TagStream, segment_records

from .conftest import GAMMA_BAR, RECORD_NS


@pytest.fixture(scope="module")
def burst_stream():
    """5 s of background with ten-odd 100 us burst trains."""
    plan = SimPlan(
        osc=OscillatorParams(n_ac=0.0, gamma_ac_bar=GAMMA_BAR),
        detected_sideband_rate=0.0,
        background_rate=2000.0,
        detector=DetectorModel(
            burst_injection=BurstInjection(rate_per_s=2.0, duration_ns=100_000, intra_rate=1e7)
        ),
        duration_ns=5_000_000_000,
        seed=21,
    )
    return simulate_stream(plan)


class TestBurstThreshold:
    """Tests for k_thr."""

    def test_worked_example(self):
        """lambda = 1.51e-3, N = 1.6e9, epsilon = 0.1 gives k_thr = 4."""
        assert burst_threshold(1.51e-3, 1_600_000_000, 0.1, CountModel.thermal) == 4

    def test_moderate_lambda(self):
        """lambda = 0.1 over 1e6 intervals gives k_thr = 7."""
        assert burst_threshold(0.1, 1_000_000, 0.1, CountModel.thermal) == 7

    def test_zero_lambda(self):
        """With no counts expected a single count is already a burst."""
        assert burst_threshold(0.0, 1000, 0.1) == 1

    def test_threshold_is_minimal(self):
        """k_thr meets the criterion and k_thr - 1 does not."""
        lam, n, eps = 0.02, 3_000_000, 0.1
        k = burst_threshold(lam, n, eps)
        assert n * np.exp(log_count_probability(k, lam, CountModel.thermal)) < eps
        assert n * np.exp(log_count_probability(k - 1, lam, CountModel.thermal)) >= eps

    def test_poisson_not_above_thermal(self):
        """The lighter Poisson tail never needs a higher threshold."""
        for lam in (1e-3, 0.05, 0.5, 3.0):
            assert burst_threshold(lam, 1_000_000, 0.1, CountModel.poisson) <= burst_threshold(
                lam, 1_000_000, 0.1, CountModel.thermal
            )

    def test_poisson_threshold_above_mean(self):
        """For lambda >= 1 the search starts above the mean."""
        assert burst_threshold(5.0, 10, 0.9, CountModel.poisson) > 5

    @pytest.mark.parametrize("args", [(-1.0, 10, 0.1), (0.1, 0, 0.1), (0.1, 10, 0.0)])
    def test_invalid_arguments(self, args):
        """Negative lambda, no intervals or epsilon <= 0 are rejected."""
        with pytest.raises(ConfigError):
            burst_threshold(*args)


class TestCountDistribution:
    """Tests for per-interval occupancy histograms."""

    def test_tiny_stream(self, tiny_stream):
        """Counts per 1 us window of the hand-built stream."""
        dist = count_distribution(tiny_stream, 1_000)
        assert dist.n_intervals == 10
        assert dist.occupancy == [6, 2, 2]
        assert dist.mean == pytest.approx(0.6)

    def test_partial_window_dropped(self, tiny_stream):
        """Tags in the trailing partial window are ignored."""
        dist = count_distribution(tiny_stream, 3_000)
        assert dist.n_intervals == 3
        assert sum(k * n for k, n in enumerate(dist.occupancy)) == 5

    def test_expected_distribution_total(self):
        """N P(k) sums to N over enough k."""
        expected = expected_count_distribution(0.3, 1000, 60)
        assert expected.sum() == pytest.approx(1000.0, rel=1e-9)

    def test_poisson_stream_matches_poisson_model(self, poisson_stream):
        """Background-only counts follow the Poisson model."""
        window = 100_000
        dist = count_distribution(poisson_stream, window)
        lam = poisson_stream.mean_rate() * window * 1e-9
        expected = expected_count_distribution(lam, dist.n_intervals, 2, CountModel.poisson)
        np.testing.assert_allclose(dist.occupancy[:3], expected, rtol=0.05)


class TestAfterpulses:
    """Tests for the afterpulse filter."""

    def test_echoes_removed(self, afterpulse_stream):
        """No same-channel pair closer than 50 ns survives."""
        cleaned, removed = filter_afterpulses(afterpulse_stream, 50)
        echoes = sum(int(np.sum(np.diff(afterpulse_stream.channel_view(c)) == 24)) for c in range(2))
        assert removed >= echoes > 0
        for c in range(2):
            assert np.diff(cleaned.channel_view(c)).min() >= 50
        assert cleaned.metadata["afterpulse_window_ns"] == 50

    def test_cross_channel_pairs_kept(self, tiny_stream):
        """Close tags on different channels are not afterpulses."""
        cleaned, removed = filter_afterpulses(tiny_stream, 100)
        assert removed == 0
        assert len(cleaned) == len(tiny_stream)

    def test_filtered_constant_stream_is_flat(self, afterpulse_stream):
        """After filtering, a constant-intensity stream has g2 = 1 at tau >= 1 us."""
        cleaned, _ = filter_afterpulses(afterpulse_stream, 50)
        records = segment_records(cleaned, RECORD_NS)
        hist = coincidence_histogram(cleaned, records, 2, 100_000, 1_000_000)
        duration = sum(r.length_ns for r in records)
        plateau = len(cleaned) ** 2 * 100_000 / duration
        np.testing.assert_allclose(hist.counts / plateau, 1.0, atol=0.04)


class TestBurstRejection:
    """Tests for record-level burst rejection."""

    def test_clean_stream_has_no_rejections(self, poisson_stream):
        """Background-only data loses no record."""
        records = segment_records(poisson_stream, RECORD_NS)
        records, report = reject_bursts(poisson_stream, records, BurstPolicy())
        assert report.records_rejected == 0
        assert all(r.valid for r in records)

    def test_false_rejection_rate(self):
        """Over many clean runs, each window rejects at most about epsilon records."""
        epsilon, runs, rate = 0.1, 200, 2000.0
        record_ns, n_records = 10_000_000, 50
        duration = record_ns * n_records
        policy = BurstPolicy(model=CountModel.poisson, epsilon=epsilon)
        rng = np.random.default_rng(17)
        rejected = np.zeros((runs, len(policy.windows_ns)))
        for run in range(runs):
            n = rng.poisson(rate * duration * 1e-9)
            stream = TagStream.from_unsorted(
                rng.integers(0, duration, n), rng.integers(0, 2, n), duration_ns=duration
            )
            _, report = reject_bursts(stream, segment_records(stream, record_ns), policy)
            rejected[run] = [w.records_rejected for w in report.windows]
        assert np.all(rejected.mean(axis=0) <= epsilon + 3 * np.sqrt(epsilon / runs))

    def test_bursts_rejected(self, burst_stream):
        """Every record holding a burst start is rejected as a burst."""
        records = segment_records(burst_stream, RECORD_NS)
        records, report = reject_bursts(burst_stream, records, BurstPolicy())
        starts = burst_stream.metadata["burst_starts_ns"]
        assert starts
        expected = {s // RECORD_NS for s in starts}
        assert expected <= set(report.rejected_record_indices)
        for idx in expected:
            assert records[idx].rejection_reason == RejectionReason.burst
        assert report.records_rejected <= 2 * len(expected)

    def test_report_thresholds_match(self, burst_stream):
        """Report k_thr values equal burst_threshold on the same inputs."""
        policy = BurstPolicy(epsilon=0.05)
        records = segment_records(burst_stream, RECORD_NS)
        _, report = reject_bursts(burst_stream, records, policy)
        assert [w.window_ns for w in report.windows] == policy.windows_ns
        for w in report.windows:
            assert w.k_thr == burst_threshold(w.lam, w.n_intervals, 0.05, policy.model)
        assert report.k_thr == {w.window_ns: w.k_thr for w in report.windows}

    def test_policy_validation(self):
        """Windows must be positive and strictly ascending; epsilon in (0, 1)."""
        with pytest.raises(ValidationError):
            BurstPolicy(windows_ns=[10_000, 3_000])
        with pytest.raises(ValidationError):
            BurstPolicy(windows_ns=[])
        with pytest.raises(ValidationError):
            BurstPolicy(epsilon=1.5)
        with pytest.raises(ValidationError):
            BurstPolicy(unknown=1)


class TestConditionStream:
    """Tests for the fixed cleaning pipeline."""

    def test_metadata_carries_records(self, burst_stream):
        """The cleaned stream records its tiling and rejected records."""
        cleaned, records, report = condition_stream(burst_stream, record_ns=RECORD_NS)
        assert cleaned.metadata["record_ns"] == RECORD_NS
        rejected = cleaned.metadata["rejected_records"]
        assert sorted(int(k) for k in rejected) == report.rejected_record_indices
        assert set(rejected.values()) == {"burst"}
        assert report.total_records == len(records)

    def test_afterpulses_counted(self, afterpulse_stream):
        """Removed afterpulses are reported."""
        _, _, report = condition_stream(afterpulse_stream)
        assert report.afterpulses_removed > 0
