"""System-level rates, method consistency, and the array-size optimizer."""

import time

import numpy as np
import pytest
from scipy.special import ndtr

from moldetect.covariance import SpatialCorrelation
from moldetect.errors import InclusionExclusionCapError, ParameterError
from moldetect.fusion import (
    AlarmDistribution,
    FusionConfig,
    Method,
    alarm_distribution_independent,
    q_rates,
)
from moldetect.perf import (
    CSV_COLUMNS,
    DesignSpec,
    SystemConfig,
    csv_row,
    evaluate_system,
    fast_rates,
    optimize_concentration,
    system_rates,
)


def q(x):
    return ndtr(-x)


class TestSystemRates:
    def test_noiseless_fusion_channel_passes_tier_one_through(self):
        cfg = FusionConfig(m_snm=2, g=1.0, sigma_mcc=1e-6)
        dist = alarm_distribution_independent(0.7, 0.05, cfg)
        q_d, q_f = q_rates(dist)
        report = system_rates(dist, q_d, q_f, v_thr=0.5, cfg=cfg)
        assert report.p_d == pytest.approx(q_d, abs=1e-9)
        assert report.p_f == pytest.approx(q_f, abs=1e-9)

    def test_single_sensor_scalar_evaluation(self):
        cfg = FusionConfig(m_snm=1, g=1.0, sigma_mcc=0.1)
        dist = alarm_distribution_independent(0.9, 0.1, cfg)
        report = system_rates(dist, 0.9, 0.1, v_thr=0.5, cfg=cfg)
        expected = q(5.0) * 0.1 + q(-5.0) * 0.9
        assert report.p_d == pytest.approx(expected, rel=1e-12)
        assert report.p_d == pytest.approx(0.90000, abs=1e-5)

    def test_certain_detection_point_mass(self):
        cfg = FusionConfig(m_snm=1, g=1.0, sigma_mcc=0.1)
        dist = AlarmDistribution(
            p_prime=np.array([0.0, 1.0]),
            p_doubleprime=np.array([1.0, 0.0]),
            p=np.array([0.5, 0.5]),
            method=Method.INDEPENDENT,
        )
        report = system_rates(dist, 1.0, 0.0, v_thr=0.5, cfg=cfg)
        assert report.p_d == pytest.approx(float(q(-5.0)), rel=1e-9)
        assert report.p_m == pytest.approx(2.87e-7, rel=0.01)

    def test_grouped_form_reduces_to_direct_sum(self):
        # with true count distributions the two-group conditional mixture
        # must equal the plain sum over levels, to near machine precision
        cfg = FusionConfig(m_snm=4, g=1.0, sigma_mcc=0.2)
        dist = alarm_distribution_independent(0.6, 0.02, cfg)
        q_d, q_f = q_rates(dist)
        v_thr = 0.7
        report = system_rates(dist, q_d, q_f, v_thr, cfg)
        levels = np.arange(5) * cfg.g
        direct_d = float(dist.p_prime @ q((v_thr - levels) / cfg.sigma_mcc))
        direct_f = float(dist.p_doubleprime @ q((v_thr - levels) / cfg.sigma_mcc))
        assert abs(report.p_d - direct_d) < 1e-12
        assert abs(report.p_f - direct_f) < 1e-12

    def test_report_identity(self):
        cfg = FusionConfig(m_snm=1)
        dist = alarm_distribution_independent(0.5, 0.1, cfg)
        report = system_rates(dist, 0.5, 0.1, 0.5, cfg)
        assert report.p_m + report.p_d == 1.0


class TestFastRates:
    def test_diagonal_alpha_one_matches_independent_path(self):
        cfg = FusionConfig(m_snm=5, g=1.0, sigma_mcc=0.1)
        spatial = SpatialCorrelation(m=5)
        fast = fast_rates(0.4, 0.01, spatial, cfg, alpha=1.0)
        dist = alarm_distribution_independent(0.4, 0.01, cfg)
        q_d, q_f = q_rates(dist)
        from moldetect.fusion import map_threshold

        exact = system_rates(dist, q_d, q_f, map_threshold(dist, q_d, q_f, cfg), cfg)
        assert fast.p_d == pytest.approx(exact.p_d, abs=1e-9)
        assert fast.p_f == pytest.approx(exact.p_f, abs=1e-9)

    def test_large_array_is_fast(self):
        cfg = FusionConfig(m_snm=30, g=1.0, sigma_mcc=0.1)
        spatial = SpatialCorrelation.from_base(30, 0.25)
        start = time.time()
        report = fast_rates(0.86, 1e-6, spatial, cfg, alpha=1.2)
        assert time.time() - start < 1.0
        assert 0.0 <= report.p_m <= 1.0 and 0.0 <= report.p_f <= 1.0


class TestEvaluateSystem:
    def test_method_policy_by_size(self):
        cfg = SystemConfig(eta1=1e-4)
        assert evaluate_system(cfg, 4).method is Method.EXACT
        assert evaluate_system(cfg, 13).method is Method.APPROX
        indep = SystemConfig(spatial_base=None, eta1=1e-4)
        assert evaluate_system(indep, 4).method is Method.INDEPENDENT

    def test_explicit_exact_above_cap_refused(self):
        cfg = SystemConfig(method=Method.EXACT)
        with pytest.raises(InclusionExclusionCapError):
            evaluate_system(cfg, 21)

    def test_method_consistency_across_paths(self):
        # diagonal spatial correlation: all three analytic routes coincide
        base = dict(n=5, eta1=1e-3, k=2.0, sigma_mcc=0.2)
        exact = evaluate_system(SystemConfig(spatial_base=None, method=Method.EXACT, **base), 4)
        indep = evaluate_system(SystemConfig(spatial_base=None, method=Method.INDEPENDENT, **base), 4)
        approx = evaluate_system(SystemConfig(spatial_base=None, alpha=1.0, method=Method.APPROX, **base), 4)
        for other in (indep, approx):
            assert exact.p_d == pytest.approx(other.p_d, abs=1e-6)
            assert exact.p_f == pytest.approx(other.p_f, abs=1e-6)


class TestOptimizer:
    def test_unattainable_constraints_are_reported_not_raised(self):
        spec = DesignSpec(
            config=SystemConfig(sigma_mcc=2.0, spatial_base=None),
            xi=1.0 - 1e-12,
            gamma=1e-12,
            m_max=8,
        )
        result = optimize_concentration(spec)
        assert not result.feasible
        assert result.m_star is None and result.concentration is None
        assert len(result.history) == 8

    def test_easy_constraints_found_at_first_feasible_size(self):
        spec = DesignSpec(
            config=SystemConfig(spatial_base=None, eta1=1e-4),
            xi=0.9,
            gamma=1e-2,
            m_max=16,
        )
        result = optimize_concentration(spec)
        assert result.feasible
        assert result.concentration == pytest.approx(result.m_star / 1000.0)
        # every earlier size must violate at least one constraint
        for m, report in result.history[:-1]:
            assert report.p_d < spec.xi or report.p_f > spec.gamma

    def test_constraint_ordering_validated(self):
        with pytest.raises(ParameterError):
            DesignSpec(config=SystemConfig(), xi=1e-3, gamma=0.5)


class TestCsvRow:
    def test_row_matches_columns(self):
        cfg = SystemConfig(spatial_base=None, eta1=1e-3)
        report = evaluate_system(cfg, 2)
        row = csv_row(cfg, 2, report)
        assert len(row) == len(CSV_COLUMNS)
        named = dict(zip(CSV_COLUMNS, row))
        assert named["m_snm"] == 2 and named["p_m"] == report.p_m
