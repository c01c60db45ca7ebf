"""Ligand-binding channel physics and the healthy/abnormal detection feature.

The receiver counts molecules bound to its receptors during one pulse
interval.  The time-integrated bound-receptor concentration during the
current pulse plus the decaying tail of the previous pulse defines the
detection feature NR.  All downstream modules treat NR (and its healthy
value NH) as plain numbers, so this module is an optional front end.

Units are documented on the fields but not enforced at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, ParameterError

BOLTZMANN = 1.380649e-23  # J/K


class TransmissionScenario(Enum):
    """How the transmitter emits the molecular bit."""

    DETERMINISTIC = "deterministic"  # always bit A (or always silent)
    PROBABILISTIC = "probabilistic"  # bit A with probability p_a per slot


@dataclass(frozen=True)
class NccParams:
    """Physical constants of the nano communication channel.

    kappa1              binding rate (umol/L/s)
    kappa_minus1_zero   zero-force release rate (1/s)
    chi                 transmitter-to-sensor distance (m)
    upsilon             molecular energy factor (J/m); chi*upsilon is in J
    k_bc                Boltzmann constant (J/K)
    theta               temperature (K)
    t_tn                pulse duration (s)
    c_a                 transmitted concentration of molecular bit A (umol/L)
    c_r                 receptor concentration (umol/L)
    p_a                 probability of transmitting bit A
    """

    kappa1: float = 1.0
    kappa_minus1_zero: float = 1.0
    chi: float = 0.0
    upsilon: float = 0.0
    k_bc: float = BOLTZMANN
    theta: float = 300.0
    t_tn: float = 1.0
    c_a: float = 1.0
    c_r: float = 1.0
    p_a: float = 1.0

    def __post_init__(self):
        positive = {
            "kappa1": self.kappa1,
            "kappa_minus1_zero": self.kappa_minus1_zero,
            "k_bc": self.k_bc,
            "theta": self.theta,
            "t_tn": self.t_tn,
            "c_r": self.c_r,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ParameterError(f"{name} must be strictly positive, got {value}")
        if self.c_a < 0.0:
            raise ParameterError(f"c_a must be non-negative, got {self.c_a}")
        if self.chi < 0.0 or self.upsilon < 0.0:
            raise ParameterError("chi and upsilon must be non-negative")
        if not 0.0 <= self.p_a <= 1.0:
            raise ParameterError(f"p_a must be in [0, 1], got {self.p_a}")


@dataclass(frozen=True)
class AbnormalityModel:
    """Deviation of the detection feature from its healthy value.

    The abnormal feature is (1 + sign*k*sigma_ncc)*nh; k = 0 recovers the
    healthy setting.  Construction rejects deviations that would push the
    feature below zero.
    """

    k: float
    sign: int = +1
    nh: float = 1.0
    sigma_ncc: float = 1.0

    def __post_init__(self):
        if self.k < 0.0:
            raise ParameterError(f"abnormality level k must be >= 0, got {self.k}")
        if self.sign not in (+1, -1):
            raise ParameterError(f"sign must be +1 or -1, got {self.sign}")
        if self.sigma_ncc <= 0.0:
            raise ParameterError(f"sigma_ncc must be > 0, got {self.sigma_ncc}")
        if 1.0 + self.sign * self.k * self.sigma_ncc < 0.0:
            raise ParameterError(
                "deviation factor 1 + sign*k*sigma_ncc is negative "
                f"(k={self.k}, sign={self.sign:+d}, sigma_ncc={self.sigma_ncc})"
            )


def release_rate(params: NccParams) -> float:
    """Release rate kappa_minus1 = kappa_minus1_zero * exp(chi*upsilon / (k_bc*theta))."""
    try:
        rate = params.kappa_minus1_zero * math.exp(
            params.chi * params.upsilon / (params.k_bc * params.theta)
        )
    except OverflowError:
        rate = math.inf
    if not math.isfinite(rate):
        raise ParameterError(
            "release rate overflowed; chi*upsilon is too large relative to k_bc*theta"
        )
    return rate


def received_molecules_current(params: NccParams) -> float:
    """Molecules received from the current pulse, integrated over one pulse.

    Closed form of the integral of the bound-receptor concentration
    C_B(t) = C_B(inf) * (1 - exp(-t*r)) over [0, t_tn], with
    r = kappa_minus1 + kappa1*c_a and C_B(inf) = kappa1*c_a*c_r / r.
    """
    r = release_rate(params) + params.kappa1 * params.c_a
    if r <= 0.0:
        raise ParameterError(f"total reaction rate must be positive, got {r}")
    cb_inf = params.kappa1 * params.c_a * params.c_r / r
    return cb_inf * (params.t_tn - (1.0 - math.exp(-params.t_tn * r)) / r)


def received_molecules_previous(n_a: float, params: NccParams) -> float:
    """Residual contribution of the previous pulse.

    Integrates n_a * exp(-kappa_minus1 * t) over one pulse interval, with
    n_a held constant under the integral.
    """
    if n_a < 0.0:
        raise ParameterError(f"n_a must be non-negative, got {n_a}")
    km1 = release_rate(params)
    return n_a * (1.0 - math.exp(-km1 * params.t_tn)) / km1


def detection_feature(params: NccParams, scenario: TransmissionScenario) -> float:
    """Noise-free detection feature NR for the given transmission scenario.

    Deterministic: the transmitter either always emits bit A (p_a = 1,
    NR = N_A + N'_A) or never does (p_a = 0, NR = 0).  Probabilistic:
    NR is the per-slot expectation p_a * (N_A + N'_A).
    """
    if scenario is TransmissionScenario.DETERMINISTIC and params.p_a not in (0.0, 1.0):
        raise ConfigError(
            f"deterministic scenario requires p_a in {{0, 1}}, got {params.p_a}"
        )
    n_a = received_molecules_current(params)
    total = n_a + received_molecules_previous(n_a, params)
    if scenario is TransmissionScenario.DETERMINISTIC:
        return total if params.p_a == 1.0 else 0.0
    return params.p_a * total


def abnormal_feature(model: AbnormalityModel) -> float:
    """Feature value in the abnormal setting: (1 + sign*k*sigma_ncc)*nh."""
    return (1.0 + model.sign * model.k * model.sigma_ncc) * model.nh
