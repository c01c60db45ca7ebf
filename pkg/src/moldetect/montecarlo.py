"""End-to-end simulation of the two-tier detector.

Runs the actual pipeline per trial: correlated observation noise, the
per-sensor band test, alarm amplitudes summed over the fusion channel,
and the threshold decision at the fusion node.  Trials are split into
fixed-size chunks, each driven by its own spawned random stream, so the
counts are identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .covariance import NoiseModel, build_temporal, estimator_weights, precision
from .detector import Decision
from .errors import ParameterError
from .perf import SystemConfig, evaluate_system

CHUNK = 1 << 16


def default_workers() -> int:
    value = os.environ.get("MOLDETECT_THREADS")
    if value is None:
        return os.cpu_count() or 1
    workers = int(value)
    if workers < 1:
        raise ParameterError(f"MOLDETECT_THREADS must be >= 1, got {workers}")
    return workers


@dataclass(frozen=True)
class SimPlan:
    """A fully specified simulation: scenario, truth, and sampling budget."""

    config: SystemConfig
    m_snm: int
    trials: int
    seed: int = 0
    truth: Decision = Decision.H1
    v_thr: Optional[float] = None  # derived analytically when omitted
    workers: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if self.m_snm < 1:
            raise ParameterError(f"m_snm must be >= 1, got {self.m_snm}")


@dataclass(frozen=True)
class SimResult:
    trials: int
    successes: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    @property
    def std_error(self) -> float:
        r = self.rate
        return float(np.sqrt(r * (1.0 - r) / self.trials))


def _trial_context(cfg: SystemConfig, m_snm: int, truth: Decision):
    """Precompute everything a chunk needs: weights, band, noise model, mean."""
    det = cfg.detector()
    omega_t = build_temporal(cfg.temporal())
    weights = estimator_weights(precision(omega_t))
    noise = NoiseModel(
        temporal=cfg.temporal(), spatial=cfg.spatial(m_snm), sigma_ncc=cfg.sigma_ncc
    )
    if truth is Decision.H1:
        mean = (1.0 + cfg.sign * cfg.k * cfg.sigma_ncc) * cfg.nh
    else:
        mean = cfg.nh
    return det, weights, noise, mean


def _chunk_successes(seed_seq, count, det, weights, noise, mean, cfg, v_thr):
    """Simulated abnormal-decisions in one chunk of trials."""
    rng = np.random.default_rng(seed_seq)
    # observations are mean + correlated noise; the estimate is the
    # precision-weighted average along the time axis
    l_t = np.linalg.cholesky(build_temporal(noise.temporal))
    l_s = np.linalg.cholesky(noise.spatial.omega_sc)
    z = rng.standard_normal((count, noise.spatial.m, noise.temporal.n))
    eps = noise.sigma_ncc * (l_s @ z @ l_t.T)
    nr_hat = mean + eps @ weights
    alarms = np.abs(nr_hat - det.nh) >= det.tau_prime
    u = cfg.g * alarms.sum(axis=1)
    v = u + cfg.sigma_mcc * rng.standard_normal(count)
    return int(np.count_nonzero(v >= v_thr))


def _resolve_threshold(plan: SimPlan) -> float:
    if plan.v_thr is not None:
        return plan.v_thr
    return evaluate_system(plan.config, plan.m_snm).v_thr


def run(plan: SimPlan) -> SimResult:
    """Empirical abnormal-decision rate with binomial standard error.

    Chunk c always consumes spawned stream c of the plan seed, so the
    result is bit-identical regardless of how many workers execute the
    chunks.
    """
    cfg = plan.config
    v_thr = _resolve_threshold(plan)
    det, weights, noise, mean = _trial_context(cfg, plan.m_snm, plan.truth)
    sizes = [CHUNK] * (plan.trials // CHUNK)
    if plan.trials % CHUNK:
        sizes.append(plan.trials % CHUNK)
    seeds = np.random.SeedSequence(plan.seed).spawn(len(sizes))
    fusion_cfg = cfg.fusion(plan.m_snm)

    def work(item):
        seq, count = item
        return _chunk_successes(seq, count, det, weights, noise, mean, fusion_cfg, v_thr)

    workers = plan.workers or default_workers()
    if workers == 1 or len(sizes) == 1:
        counts = [work(item) for item in zip(seeds, sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(work, zip(seeds, sizes)))
    return SimResult(trials=plan.trials, successes=sum(counts))


def roc_sweep(plan: SimPlan, eta1_grid) -> list:
    """Empirical (eta1, P_D, P_F) along a per-sensor budget grid.

    All grid points share the same sampled noise (common random numbers)
    so adjacent points differ only through the thresholds, giving smooth
    trade-off curves.  Returns one (eta1, p_d, p_f) tuple per grid value.
    """
    eta1_grid = list(eta1_grid)
    if not eta1_grid:
        raise ParameterError("eta1_grid must be non-empty")
    cfg = plan.config

    # per-eta1 calibration: band half-width and fusion threshold
    settings = []
    for eta1 in eta1_grid:
        # eta1 = 1 (alarm always, zero band) enters as the open-interval limit
        cfg_eta = replace(cfg, eta1=min(eta1, 1.0 - 1e-12))
        report = evaluate_system(cfg_eta, plan.m_snm)
        settings.append((eta1, cfg_eta.detector().tau_prime, report.v_thr))

    _, weights, noise, mean_h1 = _trial_context(cfg, plan.m_snm, Decision.H1)
    mean_h0 = cfg.nh
    fusion_cfg = cfg.fusion(plan.m_snm)

    sizes = [CHUNK] * (plan.trials // CHUNK)
    if plan.trials % CHUNK:
        sizes.append(plan.trials % CHUNK)
    seeds = np.random.SeedSequence(plan.seed).spawn(len(sizes))

    l_t = np.linalg.cholesky(build_temporal(noise.temporal))
    l_s = np.linalg.cholesky(noise.spatial.omega_sc)
    hits_d = np.zeros(len(settings), dtype=np.int64)
    hits_f = np.zeros(len(settings), dtype=np.int64)
    for seq, count in zip(seeds, sizes):
        rng = np.random.default_rng(seq)
        z = rng.standard_normal((count, noise.spatial.m, noise.temporal.n))
        deviation = (noise.sigma_ncc * (l_s @ z @ l_t.T)) @ weights
        mcc = cfg.sigma_mcc * rng.standard_normal(count)
        for idx, (_, tau_prime, v_thr) in enumerate(settings):
            for mean, hits in ((mean_h1, hits_d), (mean_h0, hits_f)):
                alarms = np.abs(mean + deviation - cfg.nh) >= tau_prime
                v = fusion_cfg.g * alarms.sum(axis=1) + mcc
                hits[idx] += int(np.count_nonzero(v >= v_thr))

    return [
        (eta1, hits_d[i] / plan.trials, hits_f[i] / plan.trials)
        for i, (eta1, _, _) in enumerate(settings)
    ]
