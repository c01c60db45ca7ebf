"""Simulation oracle: determinism, calibration, cross-module agreement."""

import numpy as np
import pytest

from moldetect.detector import Decision
from moldetect.errors import ParameterError
from moldetect.montecarlo import SimPlan, run, roc_sweep
from moldetect.perf import SystemConfig, evaluate_system


class TestRun:
    def test_noiseless_detection_is_certain(self):
        cfg = SystemConfig(
            spatial_base=None, sigma_ncc=1e-9, sigma_mcc=1e-9, eta1=1e-3, k=2.0, nh=1.0
        )
        plan = SimPlan(config=cfg, m_snm=2, trials=1000, truth=Decision.H1)
        assert run(plan).rate == 1.0

    def test_null_rate_matches_analytic_false_alarm(self):
        cfg = SystemConfig(spatial_base=None, eta1=1e-2, sigma_mcc=0.1)
        analytic = evaluate_system(cfg, 1)
        plan = SimPlan(config=cfg, m_snm=1, trials=10**6, seed=5, truth=Decision.H0)
        result = run(plan)
        se = max(result.std_error, np.sqrt(analytic.p_f / plan.trials))
        assert abs(result.rate - analytic.p_f) < 3.0 * se

    def test_detection_rate_matches_exact_analytic_path(self):
        cfg = SystemConfig(eta1=1e-6, k=2.0, sigma_mcc=0.1)  # correlated, exact method
        analytic = evaluate_system(cfg, 4)
        plan = SimPlan(config=cfg, m_snm=4, trials=10**6, seed=11, truth=Decision.H1)
        result = run(plan)
        assert abs(result.rate - analytic.p_d) < 3.0 * result.std_error

    def test_deterministic_across_worker_counts(self):
        cfg = SystemConfig(spatial_base=None, eta1=1e-3)
        counts = []
        for workers in (1, 2, 4):
            plan = SimPlan(
                config=cfg, m_snm=3, trials=250_000, seed=42, truth=Decision.H1,
                workers=workers,
            )
            counts.append(run(plan).successes)
        assert counts[0] == counts[1] == counts[2]

    def test_trial_budget_validated(self):
        with pytest.raises(ParameterError):
            SimPlan(config=SystemConfig(), m_snm=1, trials=0)


class TestRocSweep:
    def test_detection_increases_with_budget(self):
        cfg = SystemConfig(spatial_base=None, k=2.0, sigma_mcc=0.1)
        plan = SimPlan(config=cfg, m_snm=1, trials=200_000, seed=3)
        points = roc_sweep(plan, [1e-2, 1e-1])
        assert points[1][1] >= points[0][1]  # p_d monotone in eta1

    def test_common_random_numbers_are_reused(self):
        cfg = SystemConfig(spatial_base=None, k=2.0, sigma_mcc=0.1)
        plan = SimPlan(config=cfg, m_snm=1, trials=100_000, seed=3)
        first = roc_sweep(plan, [1e-2, 1e-1])
        second = roc_sweep(plan, [1e-2, 1e-1])
        assert first == second

    def test_empty_grid_rejected(self):
        plan = SimPlan(config=SystemConfig(), m_snm=1, trials=10)
        with pytest.raises(ParameterError):
            roc_sweep(plan, [])
