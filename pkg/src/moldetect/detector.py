"""Per-sensor two-sided GLRT on the maximum-likelihood feature estimate.

Each sensor forms the weighted mean of its n observations (weights from
the temporal precision matrix), then alarms when the estimate leaves the
symmetric band NH +- tau_prime.  tau_prime is calibrated so the false
alarm rate equals the budget eta1 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm

from .channel import AbnormalityModel
from .covariance import estimator_weights
from .errors import ParameterError


class Decision(Enum):
    H0 = "h0"
    H1 = "h1"


@dataclass(frozen=True)
class SnmDetector:
    """Calibrated single-sensor detector."""

    nh: float
    eta1: float
    sigma_d: float
    tau_prime: float


def calibrate(nh: float, eta1: float, sigma_d: float) -> SnmDetector:
    """Set the decision band half-width tau_prime = sigma_d * Phi^-1(1 - eta1/2)."""
    if not 0.0 < eta1 < 1.0:
        raise ParameterError(f"eta1 must be in (0, 1), got {eta1}")
    if sigma_d <= 0.0:
        raise ParameterError(f"sigma_d must be > 0, got {sigma_d}")
    tau_prime = sigma_d * norm.ppf(1.0 - eta1 / 2.0)
    return SnmDetector(nh=nh, eta1=eta1, sigma_d=sigma_d, tau_prime=tau_prime)


def estimate_feature(y: np.ndarray, psi: np.ndarray) -> float:
    """ML estimate of the feature: precision-weighted mean of the observations."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != psi.shape[0]:
        raise ParameterError(
            f"observation length {y.shape[-1]} does not match precision size {psi.shape[0]}"
        )
    return y @ estimator_weights(psi)


def decide(det: SnmDetector, nr_hat: float) -> Decision:
    """Alarm (H1) iff the estimate is at or beyond either band edge."""
    return Decision.H0 if abs(nr_hat - det.nh) < det.tau_prime else Decision.H1


def p_d_ncc(det: SnmDetector, model: AbnormalityModel) -> float:
    """Single-sensor detection probability under the abnormal feature.

    1 - Q((-tau' - s*k*sigma*NH)/sigma_d) + Q((tau' - s*k*sigma*NH)/sigma_d)
    with s the deviation sign.  For k = 0 this reduces to eta1.
    """
    shift = model.sign * model.k * model.sigma_ncc * det.nh
    value = (
        1.0
        - norm.sf((-det.tau_prime - shift) / det.sigma_d)
        + norm.sf((det.tau_prime - shift) / det.sigma_d)
    )
    return float(min(max(value, 0.0), 1.0))


def p_f_ncc(det: SnmDetector) -> float:
    """Single-sensor false alarm rate; equals eta1 by construction of tau_prime."""
    return det.eta1
