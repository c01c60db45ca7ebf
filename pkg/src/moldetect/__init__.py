"""Two-tier abnormality detection over a molecular sensing channel.

Tier 1: an array of sensors, each running a two-sided band test on the
maximum-likelihood estimate of the received-molecule feature under
correlated Gaussian noise.  Tier 2: a fusion node that receives the
noisy sum of alarm amplitudes and applies a MAP threshold.  The package
provides exact and approximate analytic rates, a simulation oracle, and
a design optimizer for the sensor count, plus a CLI front end.
"""

from .channel import AbnormalityModel, NccParams, TransmissionScenario
from .covariance import NoiseModel, SpatialCorrelation, TemporalCorrelation
from .detector import Decision, SnmDetector, calibrate, decide, p_d_ncc, p_f_ncc
from .errors import (
    ConfigError,
    InclusionExclusionCapError,
    NotPositiveDefiniteError,
    ParameterError,
)
from .fusion import AlarmDistribution, FusionConfig, Method
from .montecarlo import SimPlan, SimResult
from .perf import (
    DesignSpec,
    OptimizationResult,
    PerformanceReport,
    SystemConfig,
    evaluate_system,
    fast_rates,
    optimize_concentration,
    system_rates,
)
from .scenario import Scenario, config_hash, load_scenario

__version__ = "1.0.0"

__all__ = [
    "AbnormalityModel",
    "AlarmDistribution",
    "ConfigError",
    "Decision",
    "DesignSpec",
    "FusionConfig",
    "InclusionExclusionCapError",
    "Method",
    "NccParams",
    "NoiseModel",
    "NotPositiveDefiniteError",
    "OptimizationResult",
    "ParameterError",
    "PerformanceReport",
    "Scenario",
    "SimPlan",
    "SimResult",
    "SnmDetector",
    "SpatialCorrelation",
    "SystemConfig",
    "TemporalCorrelation",
    "TransmissionScenario",
    "calibrate",
    "config_hash",
    "decide",
    "evaluate_system",
    "fast_rates",
    "load_scenario",
    "optimize_concentration",
    "p_d_ncc",
    "p_f_ncc",
    "system_rates",
]
