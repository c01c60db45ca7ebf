"""End-to-end detection and false-alarm rates, and the array-size optimizer.

Combines the per-sensor rates, the alarm-count distribution, and the MAP
threshold into the final system probabilities, with a closed-form fast
path for large arrays.  The optimizer finds the smallest sensor count
meeting a detection floor and a false-alarm ceiling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .channel import AbnormalityModel
from .covariance import (
    SpatialCorrelation,
    TemporalCorrelation,
    build_temporal,
    precision,
    sigma_d,
)
from .detector import SnmDetector, calibrate, p_d_ncc, p_f_ncc
from .errors import ParameterError
from .fusion import (
    AlarmDistribution,
    FusionConfig,
    Method,
    alarm_distribution_approx,
    alarm_distribution_exact,
    alarm_distribution_independent,
    map_threshold,
    q_rates,
)

EXACT_METHOD_MAX_M = 12  # above this the exact subset enumeration is too slow


@dataclass(frozen=True)
class PerformanceReport:
    """Final system rates plus the tier-1 quantities they came from."""

    p_d: float
    p_f: float
    q_d: float
    q_f: float
    v_thr: float
    method: Method
    error_bars: Optional[tuple] = None  # (p_d stderr, p_f stderr), simulation only

    def __post_init__(self):
        for name in ("p_d", "p_f", "q_d", "q_f"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {value}")

    @property
    def p_m(self) -> float:
        return 1.0 - self.p_d


@dataclass(frozen=True)
class SystemConfig:
    """Full analytic model of the two-tier detector, minus the array size.

    The array size M is supplied separately so the optimizer can sweep it
    against one fixed configuration.  spatial_base None means spatially
    independent sensors.
    """

    n: int = 9
    p: int = 1
    rho_profile: tuple = ()
    spatial_base: Optional[float] = 0.25
    sigma_ncc: float = 1.0
    nh: float = 1.0
    k: float = 2.0
    sign: int = +1
    eta1: float = 1e-6
    g: float = 1.0
    sigma_mcc: float = 0.1
    prior_h1: float = 0.5
    vote_m: int = 1
    method: Optional[Method] = None  # None selects automatically by M
    alpha: float = 1.2
    accuracy: float = 1e-8
    seed: int = 0

    def temporal(self) -> TemporalCorrelation:
        return TemporalCorrelation(n=self.n, p=self.p, rho_profile=self.rho_profile)

    def spatial(self, m_snm: int) -> SpatialCorrelation:
        if self.spatial_base is None:
            return SpatialCorrelation(m=m_snm)
        return SpatialCorrelation.from_base(m_snm, self.spatial_base)

    def fusion(self, m_snm: int) -> FusionConfig:
        return FusionConfig(
            m_snm=m_snm,
            g=self.g,
            sigma_mcc=self.sigma_mcc,
            prior_h1=self.prior_h1,
            vote_m=min(self.vote_m, m_snm),
        )

    def detector(self) -> SnmDetector:
        omega_t = build_temporal(self.temporal())
        sd = sigma_d(precision(omega_t), omega_t, self.sigma_ncc)
        return calibrate(nh=self.nh, eta1=self.eta1, sigma_d=sd)

    def abnormality(self) -> AbnormalityModel:
        return AbnormalityModel(
            k=self.k, sign=self.sign, nh=self.nh, sigma_ncc=self.sigma_ncc
        )


@dataclass(frozen=True)
class DesignSpec:
    """Constraints for the smallest-array search.

    xi     detection floor (P_D >= xi)
    gamma  false-alarm ceiling (P_F <= gamma)
    vol    reference volume for the reported sensor concentration
    """

    config: SystemConfig
    xi: float
    gamma: float
    vol: float = 1000.0
    m_max: int = 64

    def __post_init__(self):
        if not 0.0 < self.gamma < self.xi < 1.0:
            raise ParameterError(
                f"constraints must satisfy 0 < gamma < xi < 1, got "
                f"gamma={self.gamma}, xi={self.xi}"
            )
        if self.vol <= 0.0:
            raise ParameterError(f"vol must be > 0, got {self.vol}")
        if self.m_max < 1:
            raise ParameterError(f"m_max must be >= 1, got {self.m_max}")


def system_rates(
    dist: AlarmDistribution, q_d: float, q_f: float, v_thr: float, cfg: FusionConfig
) -> PerformanceReport:
    """Final rates after fusion noise and the MAP threshold.

    Each hypothesis rate is a two-group mixture: the below-vote and
    at-or-above-vote alarm counts carry masses (1-Q, Q), and within each
    group the alarm-count entries act as conditional weights.  When the
    count vectors are true distributions this telescopes to the plain
    sum over l of p_l * Q((v_thr - lG)/sigma); the grouped form stays
    meaningful for the approximate vectors whose total mass drifts.
    """
    sigma = cfg.sigma_mcc
    levels = np.arange(dist.m_snm + 1) * cfg.g
    if np.isinf(v_thr):
        tail = np.full(levels.shape, 0.0 if v_thr > 0 else 1.0)
    else:
        tail = ndtr(-(v_thr - levels) / sigma)  # Q((v_thr - lG)/sigma) per level

    def rate(weights, q):
        m_vote = cfg.vote_m
        low, high = weights[:m_vote], weights[m_vote:]
        low_term = (low @ tail[:m_vote]) / low.sum() if low.sum() > 0.0 else 0.0
        high_term = (high @ tail[m_vote:]) / high.sum() if high.sum() > 0.0 else 0.0
        return float(np.clip((1.0 - q) * low_term + q * high_term, 0.0, 1.0))

    return PerformanceReport(
        p_d=rate(dist.p_prime, q_d),
        p_f=rate(dist.p_doubleprime, q_f),
        q_d=q_d,
        q_f=q_f,
        v_thr=v_thr,
        method=dist.method,
    )


def fast_rates(
    p_ncc_d: float,
    p_ncc_f: float,
    spatial: SpatialCorrelation,
    cfg: FusionConfig,
    alpha: float = 1.2,
) -> PerformanceReport:
    """Closed-form system rates via the exponent approximation.

    Scales to any array size; for diagonal spatial correlation and
    alpha = 1 it coincides with the independent binomial path.
    """
    dist = alarm_distribution_approx(p_ncc_d, p_ncc_f, spatial, cfg, alpha=alpha)
    q_d, q_f = q_rates(dist, cfg.vote_m)
    v_thr = map_threshold(dist, q_d, q_f, cfg)
    return system_rates(dist, q_d, q_f, v_thr, cfg)


def _select_method(cfg: SystemConfig, m_snm: int) -> Method:
    if cfg.method is not None:
        return cfg.method
    if cfg.spatial_base in (None, 0.0):
        return Method.INDEPENDENT
    return Method.EXACT if m_snm <= EXACT_METHOD_MAX_M else Method.APPROX


def evaluate_system(cfg: SystemConfig, m_snm: int) -> PerformanceReport:
    """Analytic end-to-end rates for an array of m_snm sensors."""
    if m_snm < 1:
        raise ParameterError(f"m_snm must be >= 1, got {m_snm}")
    det = cfg.detector()
    pd1 = p_d_ncc(det, cfg.abnormality())
    pf1 = p_f_ncc(det)
    fusion_cfg = cfg.fusion(m_snm)
    spatial = cfg.spatial(m_snm)
    method = _select_method(cfg, m_snm)

    if method is Method.INDEPENDENT or spatial.is_diagonal:
        dist = alarm_distribution_independent(pd1, pf1, fusion_cfg)
    elif method is Method.EXACT:
        dist = alarm_distribution_exact(
            det,
            nr_abnormal=(1.0 + cfg.sign * cfg.k * cfg.sigma_ncc) * cfg.nh,
            spatial=spatial,
            cfg=fusion_cfg,
            accuracy=cfg.accuracy,
            seed=cfg.seed,
        )
    elif method is Method.APPROX:
        dist = alarm_distribution_approx(pd1, pf1, spatial, fusion_cfg, alpha=cfg.alpha)
    else:
        raise ParameterError(f"method {method} is not an analytic path")

    q_d, q_f = q_rates(dist, fusion_cfg.vote_m)
    v_thr = map_threshold(dist, q_d, q_f, fusion_cfg)
    return system_rates(dist, q_d, q_f, v_thr, fusion_cfg)


@dataclass(frozen=True)
class OptimizationResult:
    m_star: Optional[int]  # None when no feasible size exists within m_max
    concentration: Optional[float]  # sensors per reference volume
    report: Optional[PerformanceReport]
    history: tuple  # (m, PerformanceReport) pairs in scan order

    @property
    def feasible(self) -> bool:
        return self.m_star is not None


def optimize_concentration(spec: DesignSpec) -> OptimizationResult:
    """Smallest sensor count meeting both constraints.

    Scans every M from 1 to m_max because the false-alarm rate is not
    monotone in the array size; stops at the first M where both the
    detection floor and the false-alarm ceiling hold.
    """
    history = []
    for m_snm in range(1, spec.m_max + 1):
        report = evaluate_system(spec.config, m_snm)
        history.append((m_snm, report))
        if report.p_d >= spec.xi and report.p_f <= spec.gamma:
            return OptimizationResult(
                m_star=m_snm,
                concentration=m_snm / spec.vol,
                report=report,
                history=tuple(history),
            )
    return OptimizationResult(
        m_star=None, concentration=None, report=None, history=tuple(history)
    )


CSV_COLUMNS = (
    "method",
    "m_snm",
    "n",
    "rho",
    "sigma_mcc",
    "eta1",
    "k",
    "alpha",
    "q_d",
    "q_f",
    "v_thr",
    "p_d",
    "p_f",
    "p_m",
)


def csv_row(cfg: SystemConfig, m_snm: int, report: PerformanceReport) -> tuple:
    """One report as a flat tuple matching CSV_COLUMNS."""
    rho = cfg.rho_profile[0] if cfg.rho_profile else 0.0
    return (
        report.method.value,
        m_snm,
        cfg.n,
        rho,
        cfg.sigma_mcc,
        cfg.eta1,
        cfg.k,
        cfg.alpha,
        report.q_d,
        report.q_f,
        report.v_thr,
        report.p_d,
        report.p_f,
        report.p_m,
    )
