"""Second detection tier: alarm counting, MAP threshold, and voting.

Each sensor alarm contributes an amplitude G to the sum U; the fusion
node observes V = U + N(0, sigma_mcc**2) and compares it against a MAP
threshold.  The alarm-count distribution over the correlated sensors is
computed three ways: exactly (subset sums of multivariate-normal pattern
probabilities), in closed form for independent sensors (binomial), and
by a correlation-adjusted exponent approximation that scales to large
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .covariance import SpatialCorrelation
from .detector import Decision, SnmDetector
from .errors import InclusionExclusionCapError, ParameterError
from .mvn import Box, GaussianVector, box_probability

SUBSET_CAP = 20


class Method(Enum):
    EXACT = "exact"  # subset sums over multivariate-normal boxes
    INDEPENDENT = "independent"  # binomial closed form
    APPROX = "approx"  # correlation-adjusted exponent approximation
    MONTE_CARLO = "montecarlo"


@dataclass(frozen=True)
class FusionConfig:
    """Parameters of the alarm channel and the fusion rule.

    vote_m = 1 is the OR rule; vote_m = M requires unanimity.
    """

    m_snm: int
    g: float = 1.0
    sigma_mcc: float = 0.1
    prior_h1: float = 0.5
    vote_m: int = 1

    def __post_init__(self):
        if self.m_snm < 1:
            raise ParameterError(f"m_snm must be >= 1, got {self.m_snm}")
        if self.g <= 0.0:
            raise ParameterError(f"g must be > 0, got {self.g}")
        if self.sigma_mcc <= 0.0:
            raise ParameterError(f"sigma_mcc must be > 0, got {self.sigma_mcc}")
        if not 0.0 < self.prior_h1 < 1.0:
            raise ParameterError(f"prior_h1 must be in (0, 1), got {self.prior_h1}")
        if not 1 <= self.vote_m <= self.m_snm:
            raise ParameterError(
                f"vote_m must satisfy 1 <= vote_m <= {self.m_snm}, got {self.vote_m}"
            )

    @property
    def prior_h0(self) -> float:
        return 1.0 - self.prior_h1


@dataclass(frozen=True)
class AlarmDistribution:
    """Distribution of the alarm count, under each hypothesis and mixed.

    p_prime[l]       P(l alarms | abnormal)
    p_doubleprime[l] P(l alarms | healthy)
    p[l]             prior mixture of the two
    The exact and independent methods yield true distributions; the
    approximation produces per-entry estimates whose sum can exceed 1,
    so downstream formulas only ever use them as within-group weights.
    """

    p_prime: np.ndarray
    p_doubleprime: np.ndarray
    p: np.ndarray
    method: Method

    def __post_init__(self):
        for name in ("p_prime", "p_doubleprime", "p"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if np.any(vec < -1e-12) or np.any(vec > 1.0 + 1e-12):
                raise ParameterError(f"{name} has entries outside [0, 1]")
            object.__setattr__(self, name, np.clip(vec, 0.0, 1.0))
        if not len(self.p_prime) == len(self.p_doubleprime) == len(self.p):
            raise ParameterError("alarm-count vectors must have equal length")
        if self.method in (Method.EXACT, Method.INDEPENDENT):
            for name in ("p_prime", "p_doubleprime"):
                total = getattr(self, name).sum()
                if abs(total - 1.0) > 1e-6:
                    raise ParameterError(
                        f"{name} sums to {total:.8f}, expected 1 for {self.method.value}"
                    )

    @property
    def m_snm(self) -> int:
        return len(self.p_prime) - 1


def _count_distribution(mean: float, sigma_d: float, spatial, nh, tau_prime, accuracy, seed):
    """Exact alarm-count pmf by inclusion-exclusion over quiet subsets.

    B(S) = P(every estimate in S stays inside the band); unconstrained
    coordinates marginalize out by dropping rows/columns.  With
    S_j = sum of B over size-j subsets, P(exactly q quiet sensors) =
    sum_{j>=q} (-1)^(j-q) C(j, q) S_j.  The box cache keys on the
    spatial submatrix so repeated Toeplitz patterns are computed once.
    """
    m = spatial.m
    omega = spatial.omega_sc
    lo, hi = nh - tau_prime, nh + tau_prime
    cache = {}

    def band_prob(subset):
        if not subset:
            return 1.0
        sub = omega[np.ix_(subset, subset)]
        key = sub.tobytes()
        hit = cache.get(key)
        if hit is not None:
            return hit
        k = len(subset)
        g = GaussianVector(np.full(k, mean), sigma_d**2 * sub)
        value = box_probability(
            g, Box(np.full(k, lo), np.full(k, hi)), accuracy=accuracy, seed=seed
        ).value
        cache[key] = value
        return value

    s_sums = np.zeros(m + 1)
    for j in range(m + 1):
        s_sums[j] = sum(band_prob(list(c)) for c in combinations(range(m), j))

    pmf = np.zeros(m + 1)
    for alarms in range(m + 1):
        quiet = m - alarms
        pmf[alarms] = sum(
            (-1.0) ** (j - quiet) * math.comb(j, quiet) * s_sums[j]
            for j in range(quiet, m + 1)
        )
    # the alternating sums telescope so the pmf sums to S_0 = 1 exactly;
    # per-entry integration noise can still leave tiny negatives, so clip
    # them and rescale the (near-1) total back to 1
    pmf = np.where(pmf > 0.0, pmf, 0.0)
    return pmf / pmf.sum()


def _ordered_count_distribution(mean, sigma_d, spatial, nh, tau_prime, accuracy, seed):
    """Binomial-weighted first-coordinates variant of the exact pmf.

    Treats the correlation as exchangeable: p_l = C(M,l) * P(first M-l
    coordinates quiet, last l alarming).  Coincides with the subset-sum
    pmf only when the spatial correlation is exchangeable; kept for
    comparison against that common simplification.
    """
    from .mvn import pattern_probability

    m = spatial.m
    g = GaussianVector(np.full(m, mean), sigma_d**2 * spatial.omega_sc)
    pmf = np.zeros(m + 1)
    for alarms in range(m + 1):
        inside = list(range(m - alarms))
        pmf[alarms] = math.comb(m, alarms) * pattern_probability(
            g, inside, (nh - tau_prime, nh + tau_prime), accuracy=accuracy, seed=seed
        )
    return pmf


def alarm_distribution_exact(
    det: SnmDetector,
    nr_abnormal: float,
    spatial: SpatialCorrelation,
    cfg: FusionConfig,
    accuracy: float = 1e-8,
    seed: int = 0,
    assume_exchangeable: bool = False,
) -> AlarmDistribution:
    """Exact alarm-count distribution over the correlated sensor array.

    `nr_abnormal` is the feature mean under abnormality; the healthy
    branch uses det.nh.  Cost is 2**M box integrals per hypothesis, so M
    is capped; larger arrays must use alarm_distribution_approx.
    """
    if spatial.m != cfg.m_snm:
        raise ParameterError(
            f"spatial correlation is for {spatial.m} sensors, config says {cfg.m_snm}"
        )
    if spatial.m > SUBSET_CAP:
        raise InclusionExclusionCapError(
            f"exact enumeration over {spatial.m} sensors exceeds the cap of "
            f"{SUBSET_CAP}; use alarm_distribution_approx"
        )
    build = _ordered_count_distribution if assume_exchangeable else _count_distribution
    p_prime = build(nr_abnormal, det.sigma_d, spatial, det.nh, det.tau_prime, accuracy, seed)
    p_doubleprime = build(det.nh, det.sigma_d, spatial, det.nh, det.tau_prime, accuracy, seed)
    p = cfg.prior_h1 * p_prime + cfg.prior_h0 * p_doubleprime
    return AlarmDistribution(p_prime, p_doubleprime, p, Method.EXACT)


def alarm_distribution_independent(
    p_ncc_d: float, p_ncc_f: float, cfg: FusionConfig
) -> AlarmDistribution:
    """Binomial alarm-count distribution for spatially independent sensors."""
    for name, value in (("p_ncc_d", p_ncc_d), ("p_ncc_f", p_ncc_f)):
        if not 0.0 <= value <= 1.0:
            raise ParameterError(f"{name} must be in [0, 1], got {value}")
    m = cfg.m_snm
    l = np.arange(m + 1)
    coeff = np.array([math.comb(m, int(i)) for i in l], dtype=float)
    p_prime = coeff * p_ncc_d**l * (1.0 - p_ncc_d) ** (m - l)
    p_doubleprime = coeff * p_ncc_f**l * (1.0 - p_ncc_f) ** (m - l)
    p = cfg.prior_h1 * p_prime + cfg.prior_h0 * p_doubleprime
    return AlarmDistribution(p_prime, p_doubleprime, p, Method.INDEPENDENT)


def correlation_exponent(spatial: SpatialCorrelation) -> float:
    """Effective number of independent sensors s = 1' inv(Omega_sc) 1."""
    ones = np.ones(spatial.m)
    return float(ones @ np.linalg.solve(spatial.omega_sc, ones))


def alarm_distribution_approx(
    p_ncc_d: float,
    p_ncc_f: float,
    spatial: SpatialCorrelation,
    cfg: FusionConfig,
    alpha: float = 1.2,
) -> AlarmDistribution:
    """Correlation-adjusted closed-form approximation of the alarm pmf.

    Replaces the binomial exponents l and M-l by alpha*s*l/M and
    alpha*s*(M-l)/M, with s = 1' inv(Omega_sc) 1 the effective number of
    independent sensors.  Entries approximate each p_l individually and
    do not sum to 1; callers must treat them as relative weights.
    For a diagonal Omega_sc and alpha = 1 this is exactly the binomial.
    """
    if alpha <= 0.0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    if spatial.m != cfg.m_snm:
        raise ParameterError(
            f"spatial correlation is for {spatial.m} sensors, config says {cfg.m_snm}"
        )
    for name, value in (("p_ncc_d", p_ncc_d), ("p_ncc_f", p_ncc_f)):
        if not 0.0 <= value <= 1.0:
            raise ParameterError(f"{name} must be in [0, 1], got {value}")
    m = cfg.m_snm
    s = correlation_exponent(spatial)
    l = np.arange(m + 1, dtype=float)
    coeff = np.array([math.comb(m, int(i)) for i in range(m + 1)], dtype=float)

    def shaped(p_hit):
        miss = np.power(1.0 - p_hit, alpha * s * (m - l) / m) if p_hit < 1.0 else (l == m)
        hit = np.power(p_hit, alpha * s * l / m) if p_hit > 0.0 else (l == 0)
        return np.minimum(coeff * miss * hit, 1.0)

    p_prime = shaped(p_ncc_d)
    p_doubleprime = shaped(p_ncc_f)
    p = np.minimum(cfg.prior_h1 * p_prime + cfg.prior_h0 * p_doubleprime, 1.0)
    return AlarmDistribution(p_prime, p_doubleprime, p, Method.APPROX)


def q_rates(dist: AlarmDistribution, vote_m: int = 1) -> tuple:
    """Network-level rates before fusion noise: mass at >= vote_m alarms.

    Computed as the complement of the below-vote mass.  The low-count
    entries are the numerically clean ones (p_0 is a single box with a
    controlled error, and for the exact method the high-count tail
    carries the accumulated inclusion-exclusion noise), so for vote_m = 1
    this yields the exact identity Q = 1 - p_0.
    """
    if not 1 <= vote_m <= dist.m_snm:
        raise ParameterError(f"vote_m must be in [1, {dist.m_snm}], got {vote_m}")
    q_d = 1.0 - float(dist.p_prime[:vote_m].sum())
    q_f = 1.0 - float(dist.p_doubleprime[:vote_m].sum())
    return float(np.clip(q_d, 0.0, 1.0)), float(np.clip(q_f, 0.0, 1.0))


def _log_mixture(v, weights, levels, sigma):
    """log of sum_l w_l exp(-(v - level_l)^2 / (2 sigma^2)), or -inf."""
    mask = weights > 0.0
    if not np.any(mask):
        return -np.inf
    exponents = np.log(weights[mask]) - (v - levels[mask]) ** 2 / (2.0 * sigma**2)
    peak = exponents.max()
    return peak + np.log(np.exp(exponents - peak).sum())


def _map_sign(v, dist, q_d, q_f, cfg):
    """Sign of the MAP statistic: +1 decides healthy, -1 abnormal.

    The two groups (fewer than vote_m alarms / at least vote_m) carry
    the group masses (1-Q, Q) under each hypothesis; within a group the
    mixed pmf supplies conditional weights.  Everything is compared in
    log-domain so narrow fusion-noise kernels cannot underflow.
    """
    m_vote = cfg.vote_m
    low, high = dist.p[:m_vote], dist.p[m_vote:]
    levels = np.arange(dist.m_snm + 1) * cfg.g
    c_low = (1.0 - q_f) * cfg.prior_h0 - (1.0 - q_d) * cfg.prior_h1
    c_high = q_f * cfg.prior_h0 - q_d * cfg.prior_h1
    log_low = (
        _log_mixture(v, low / low.sum(), levels[:m_vote], cfg.sigma_mcc)
        if low.sum() > 0.0
        else -np.inf
    )
    log_high = (
        _log_mixture(v, high / high.sum(), levels[m_vote:], cfg.sigma_mcc)
        if high.sum() > 0.0
        else -np.inf
    )
    terms = []
    if np.isfinite(log_low) and c_low != 0.0:
        terms.append((np.sign(c_low), np.log(abs(c_low)) + log_low))
    if np.isfinite(log_high) and c_high != 0.0:
        terms.append((np.sign(c_high), np.log(abs(c_high)) + log_high))
    if not terms:
        return 0
    if len(terms) == 1 or terms[0][0] == terms[1][0]:
        return int(terms[0][0])
    # opposite signs: the larger magnitude wins
    (s0, l0), (s1, l1) = terms
    if l0 == l1:
        return 0
    return int(s0 if l0 > l1 else s1)


def _map_sign_grid(vs, dist, q_d, q_f, cfg):
    """Vectorized _map_sign over a grid of received values."""
    m_vote = cfg.vote_m
    levels = np.arange(dist.m_snm + 1) * cfg.g
    c_low = (1.0 - q_f) * cfg.prior_h0 - (1.0 - q_d) * cfg.prior_h1
    c_high = q_f * cfg.prior_h0 - q_d * cfg.prior_h1

    def log_mix(weights, lv):
        total = weights.sum()
        if total <= 0.0:
            return np.full(vs.size, -np.inf)
        w = weights / total
        mask = w > 0.0
        exponents = np.log(w[mask]) - (vs[:, None] - lv[mask]) ** 2 / (
            2.0 * cfg.sigma_mcc**2
        )
        peak = exponents.max(axis=1)
        return peak + np.log(np.exp(exponents - peak[:, None]).sum(axis=1))

    log_low = log_mix(dist.p[:m_vote], levels[:m_vote])
    log_high = log_mix(dist.p[m_vote:], levels[m_vote:])
    mag_low = (np.log(abs(c_low)) + log_low) if c_low != 0.0 else np.full(vs.size, -np.inf)
    mag_high = (np.log(abs(c_high)) + log_high) if c_high != 0.0 else np.full(vs.size, -np.inf)
    signs = np.zeros(vs.size, dtype=int)
    low_wins = mag_low > mag_high
    signs[low_wins] = int(np.sign(c_low)) if c_low != 0.0 else 0
    signs[~low_wins & (mag_high > -np.inf)] = int(np.sign(c_high)) if c_high != 0.0 else 0
    return signs


def map_threshold(
    dist: AlarmDistribution, q_d: float, q_f: float, cfg: FusionConfig
) -> float:
    """MAP decision threshold on the noisy alarm sum.

    Scans V over [-4 sigma, MG + 4 sigma] at step sigma/100 for the
    first healthy-to-abnormal sign change of the MAP statistic, then
    bisects.  No sign change means the decision never flips: +inf when
    every V decides healthy, -inf when every V decides abnormal.
    """
    sigma = cfg.sigma_mcc
    lo = -4.0 * sigma
    hi = dist.m_snm * cfg.g + 4.0 * sigma
    step = max(sigma / 100.0, (hi - lo) / 400_000.0)
    grid = np.arange(lo, hi + step / 2.0, step)
    signs = _map_sign_grid(grid, dist, q_d, q_f, cfg)
    crossings = np.nonzero((signs[:-1] > 0) & (signs[1:] <= 0))[0]
    if crossings.size == 0:
        return math.inf if signs[0] > 0 else -math.inf
    a, b = grid[crossings[0]], grid[crossings[0] + 1]
    for _ in range(60):
        mid = 0.5 * (a + b)
        if _map_sign(mid, dist, q_d, q_f, cfg) > 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def dgn_decide(v: float, v_thr: float) -> Decision:
    """Final fusion-node decision; the boundary v == v_thr alarms."""
    return Decision.H1 if v >= v_thr else Decision.H0
