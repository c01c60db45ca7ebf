"""Temporal and spatial noise-correlation structure of the sensor network.

Sensor noise is zero-mean Gaussian, separable in space and time: the full
covariance of the M x n observation noise is
sigma_ncc**2 * (spatial (x) temporal), where (x) is the Kronecker product.
The temporal factor is a banded Toeplitz matrix (lag-limited stationary
correlation); the spatial factor is either an explicit matrix or the
generator base**|j-l|.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefiniteError, ParameterError


def _check_correlation(matrix: np.ndarray, name: str) -> None:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"{name} must be square, got shape {m.shape}")
    if not np.array_equal(m, m.T):
        raise ParameterError(f"{name} must be symmetric")
    if not np.allclose(np.diag(m), 1.0, rtol=0.0, atol=1e-12):
        raise ParameterError(f"{name} must have unit diagonal")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        order = _first_nonpositive_minor(m)
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite "
            f"(leading {order}x{order} minor is non-positive)",
            order=order,
        ) from None


def _first_nonpositive_minor(m: np.ndarray) -> int:
    for k in range(1, m.shape[0] + 1):
        if np.linalg.det(m[:k, :k]) <= 0.0:
            return k
    return m.shape[0]


@dataclass(frozen=True)
class TemporalCorrelation:
    """Lag-limited temporal correlation over the observation window.

    n            number of observations
    p            correlation span (observations more than p-1 apart are
                 uncorrelated)
    rho_profile  correlation coefficients for lags 1 .. p-1
    """

    n: int
    p: int = 1
    rho_profile: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.p <= self.n:
            raise ParameterError(f"p must satisfy 1 <= p <= n, got p={self.p}, n={self.n}")
        profile = tuple(float(r) for r in self.rho_profile)
        if len(profile) != self.p - 1:
            raise ParameterError(
                f"rho_profile must have p-1 = {self.p - 1} entries, got {len(profile)}"
            )
        object.__setattr__(self, "rho_profile", profile)


@dataclass(frozen=True)
class SpatialCorrelation:
    """Cross-sensor correlation matrix of the observation noise."""

    m: int
    omega_sc: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if self.omega_sc is None:
            object.__setattr__(self, "omega_sc", np.eye(self.m))
        matrix = np.asarray(self.omega_sc, dtype=float)
        if matrix.shape != (self.m, self.m):
            raise ParameterError(
                f"omega_sc must be {self.m}x{self.m}, got shape {matrix.shape}"
            )
        _check_correlation(matrix, "spatial correlation")
        object.__setattr__(self, "omega_sc", matrix)

    @classmethod
    def from_base(cls, m: int, base: float) -> "SpatialCorrelation":
        """Exponential-decay generator omega[j, l] = base**|j-l|."""
        if not 0.0 <= base < 1.0:
            raise ParameterError(f"spatial base must be in [0, 1), got {base}")
        idx = np.arange(m)
        return cls(m=m, omega_sc=base ** np.abs(idx[:, None] - idx[None, :]))

    @property
    def is_diagonal(self) -> bool:
        return np.count_nonzero(self.omega_sc - np.diag(np.diag(self.omega_sc))) == 0


@dataclass(frozen=True)
class NoiseModel:
    """Separable space-time Gaussian noise for the whole sensor array."""

    temporal: TemporalCorrelation
    spatial: SpatialCorrelation
    sigma_ncc: float = 1.0

    def __post_init__(self):
        if self.sigma_ncc < 0.0:
            raise ParameterError(f"sigma_ncc must be >= 0, got {self.sigma_ncc}")


def build_temporal(spec: TemporalCorrelation) -> np.ndarray:
    """Banded symmetric Toeplitz correlation matrix from a lag profile."""
    n = spec.n
    omega = np.eye(n)
    for lag, rho in enumerate(spec.rho_profile, start=1):
        omega += rho * (np.eye(n, k=lag) + np.eye(n, k=-lag))
    _check_correlation(omega, "temporal correlation")
    return omega


def precision(omega_t: np.ndarray) -> np.ndarray:
    """Inverse of a correlation matrix, symmetrized against round-off."""
    omega_t = np.asarray(omega_t, dtype=float)
    try:
        psi = np.linalg.inv(omega_t)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("correlation matrix is singular") from None
    psi = 0.5 * (psi + psi.T)
    residual = np.max(np.abs(omega_t @ psi - np.eye(omega_t.shape[0])))
    if residual > 1e-10:
        raise NotPositiveDefiniteError(
            f"inverse residual {residual:.2e} exceeds 1e-10; matrix is ill-conditioned"
        )
    return psi


def estimator_weights(psi: np.ndarray) -> np.ndarray:
    """Column-sum weights of the ML feature estimator; they sum to one."""
    psi = np.asarray(psi, dtype=float)
    total = psi.sum()
    if total == 0.0:
        raise ParameterError("precision matrix sums to zero; estimator is degenerate")
    return psi.sum(axis=0) / total


def sigma_d(psi: np.ndarray, omega_t: np.ndarray, sigma_ncc: float) -> float:
    """Standard deviation of the weighted-mean feature estimate.

    Computed as sqrt(w' Omega w) * sigma_ncc with the estimator weights w.
    For the exact inverse this equals sigma_ncc / sqrt(1' Psi 1).
    """
    omega_t = np.asarray(omega_t, dtype=float)
    if psi.shape != omega_t.shape:
        raise ParameterError("psi and omega_t must have matching shapes")
    w = estimator_weights(psi)
    return float(np.sqrt(w @ omega_t @ w)) * sigma_ncc


def sample_noise(model: NoiseModel, count: int, seed) -> np.ndarray:
    """Draw `count` noise realizations of shape (count, M, n).

    Sampling goes through the Cholesky factor of each Kronecker factor:
    eps = sigma * L_sc @ Z @ L_t'.  `seed` may be an int or a numpy
    Generator; results are deterministic for a fixed seed.
    """
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    omega_t = build_temporal(model.temporal)
    l_t = np.linalg.cholesky(omega_t)
    l_s = np.linalg.cholesky(model.spatial.omega_sc)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((count, model.spatial.m, model.temporal.n))
    return model.sigma_ncc * (l_s @ z @ l_t.T)
