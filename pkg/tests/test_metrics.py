import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evcoord.metrics import (
    ConvergenceSample,
    consensus_disagreement,
    read_trace_csv,
    rel_load,
    rel_obj,
    valley_filling_stats,
    write_trace_csv,
)
from evcoord.network import build_topology


class TestRelObj:
    def test_exact_match(self):
        assert rel_obj(5.0, 5.0) == 0.0

    def test_reported_path_value(self):
        assert rel_obj(1.0028, 1.0) == pytest.approx(0.0028)

    def test_reported_ring_value(self):
        assert rel_obj(1.0012, 1.0) == pytest.approx(0.0012)

    def test_zero_reference_rejected(self):
        with pytest.raises(ZeroDivisionError):
            rel_obj(1.0, 0.0)


class TestRelLoad:
    def test_matching_totals(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert rel_load(x, np.array([4.0, 6.0])) == 0.0

    def test_reported_path_value(self):
        x = np.array([[100.56]])
        assert rel_load(x, np.array([100.0])) == pytest.approx(0.0056)

    def test_reported_ring_value(self):
        x = np.array([[100.46]])
        assert rel_load(x, np.array([100.0])) == pytest.approx(0.0046)

    def test_zero_reference_rejected(self):
        with pytest.raises(ZeroDivisionError):
            rel_load(np.ones((1, 2)), np.zeros(2))


class TestScaleConsistency:
    @given(st.floats(0.01, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_common_factor_cancels(self, factor):
        f, f_star = 42.0, 40.0
        assert rel_obj(f * factor, f_star * factor) == pytest.approx(rel_obj(f, f_star))
        x = np.array([[1.0, 2.0], [0.5, 1.5]])
        star = np.array([1.4, 3.2])
        assert rel_load(x * factor, star * factor) == pytest.approx(rel_load(x, star))


class TestConsensusDisagreement:
    def test_zero_iff_agreed(self):
        topo = build_topology("ring", 4)
        agreed = np.tile(np.array([1.0, 2.0]), (4, 1))
        assert consensus_disagreement(agreed, topo) == 0.0
        rng = np.random.default_rng(0)
        for _ in range(10):
            prices = rng.normal(size=(4, 2))
            if np.ptp(prices, axis=0).max() > 1e-12:
                assert consensus_disagreement(prices, topo) > 0.0


class TestValleyStats:
    def test_no_fleet_load_keeps_variance(self):
        inelastic = np.array([3.0, 1.0, 2.0])
        stats = valley_filling_stats(np.zeros(3), inelastic)
        assert stats.combined_variance == pytest.approx(stats.inelastic_variance)
        assert stats.valley_energy_fraction == 0.0

    def test_filling_the_trough_reduces_variance(self):
        inelastic = np.array([5.0, 1.0, 5.0, 5.0, 5.0, 5.0])
        pev = np.array([0.0, 2.0, 0.0, 0.0, 0.0, 0.0])
        stats = valley_filling_stats(pev, inelastic)
        assert stats.combined_variance < stats.inelastic_variance
        assert stats.combined_peak_kw == stats.inelastic_peak_kw
        assert stats.valley_energy_fraction == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            valley_filling_stats(np.zeros(2), np.zeros(3))


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        samples = [
            ConvergenceSample(1, 0.5, 0.25, 1e-3, 2e-2),
            ConvergenceSample(2, None, None, 9.87e-4, 1.23e-2),
        ]
        path = tmp_path / "trace.csv"
        write_trace_csv(samples, path)
        loaded = read_trace_csv(path)
        assert loaded == samples

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="columns"):
            read_trace_csv(path)
