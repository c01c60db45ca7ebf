"""Scenario files: one YAML document describing a full system setup.

A scenario aggregates the noise structure, the feature deviation model,
the per-sensor budget, the fusion channel, the analytic method choice,
and optionally the channel-physics front end and design constraints.
Validation happens before any computation and names the offending field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Optional

import yaml

from .channel import NccParams, TransmissionScenario, detection_feature
from .errors import ConfigError
from .fusion import Method
from .perf import DesignSpec, SystemConfig

_METHODS = {m.value: m for m in Method if m is not Method.MONTE_CARLO}

_TOP_KEYS = {
    "m_snm",
    "noise",
    "feature",
    "detector",
    "fusion",
    "method",
    "alpha",
    "accuracy",
    "seed",
    "ncc",
    "design",
}
_NOISE_KEYS = {"n", "p", "rho_profile", "spatial_base", "sigma_ncc"}
_FEATURE_KEYS = {"nh", "k", "sign"}
_DETECTOR_KEYS = {"eta1"}
_FUSION_KEYS = {"g", "sigma_mcc", "prior_h1", "vote_m"}
_DESIGN_KEYS = {"xi", "gamma", "vol", "m_max"}
_NCC_KEYS = {
    "kappa1",
    "kappa_minus1_zero",
    "chi",
    "upsilon",
    "k_bc",
    "theta",
    "t_tn",
    "c_a",
    "c_r",
    "p_a",
    "scenario",
}


@dataclass(frozen=True)
class DesignConstraints:
    xi: float
    gamma: float
    vol: float = 1000.0
    m_max: int = 64


@dataclass(frozen=True)
class Scenario:
    """A validated scenario: array size plus the full system configuration."""

    m_snm: int
    config: SystemConfig
    ncc: Optional[NccParams] = None
    design: Optional[DesignConstraints] = None

    def design_spec(self) -> DesignSpec:
        if self.design is None:
            raise ConfigError("scenario has no 'design' section")
        return DesignSpec(
            config=self.config,
            xi=self.design.xi,
            gamma=self.design.gamma,
            vol=self.design.vol,
            m_max=self.design.m_max,
        )


def _require_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in '{where}'; allowed: {sorted(allowed)}"
        )


def _number(section: dict, key: str, where: str, default=None):
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"missing required field '{where}.{key}'")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{where}.{key}' must be a number, got {value!r}")
    return value


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError(f"scenario document must be a mapping, got {type(raw).__name__}")
    _require_keys(raw, _TOP_KEYS, "scenario")

    noise = raw.get("noise", {}) or {}
    feature = raw.get("feature", {}) or {}
    detector = raw.get("detector", {}) or {}
    fusion = raw.get("fusion", {}) or {}
    for name, section, allowed in (
        ("noise", noise, _NOISE_KEYS),
        ("feature", feature, _FEATURE_KEYS),
        ("detector", detector, _DETECTOR_KEYS),
        ("fusion", fusion, _FUSION_KEYS),
    ):
        if not isinstance(section, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        _require_keys(section, allowed, name)

    m_snm = raw.get("m_snm", 1)
    if not isinstance(m_snm, int) or m_snm < 1:
        raise ConfigError(f"field 'm_snm' must be a positive integer, got {m_snm!r}")

    ncc = None
    if "ncc" in raw and raw["ncc"] is not None:
        ncc_raw = dict(raw["ncc"])
        _require_keys(ncc_raw, _NCC_KEYS, "ncc")
        try:
            transmission = TransmissionScenario(
                ncc_raw.pop("scenario", TransmissionScenario.DETERMINISTIC.value)
            )
            ncc = NccParams(**ncc_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid 'ncc' section: {exc}") from exc

    # nh comes from the physics front end unless given explicitly
    if "nh" in feature:
        nh = _number(feature, "nh", "feature")
    elif ncc is not None:
        nh = detection_feature(ncc, transmission)
    else:
        nh = 1.0

    method_name = raw.get("method", "auto")
    if method_name in (None, "auto"):
        method = None
    elif method_name in _METHODS:
        method = _METHODS[method_name]
    else:
        raise ConfigError(
            f"field 'method' must be one of {sorted(_METHODS)} or 'auto', "
            f"got {method_name!r}"
        )

    spatial_base = noise.get("spatial_base", 0.25)
    if spatial_base is not None:
        spatial_base = _number(noise, "spatial_base", "noise", default=0.25)

    rho_profile = noise.get("rho_profile", ())
    if not isinstance(rho_profile, (list, tuple)):
        raise ConfigError("field 'noise.rho_profile' must be a list of numbers")

    try:
        config = SystemConfig(
            n=int(_number(noise, "n", "noise", default=9)),
            p=int(_number(noise, "p", "noise", default=len(rho_profile) + 1)),
            rho_profile=tuple(float(r) for r in rho_profile),
            spatial_base=spatial_base,
            sigma_ncc=float(_number(noise, "sigma_ncc", "noise", default=1.0)),
            nh=float(nh),
            k=float(_number(feature, "k", "feature", default=2.0)),
            sign=int(feature.get("sign", +1)),
            eta1=float(_number(detector, "eta1", "detector", default=1e-6)),
            g=float(_number(fusion, "g", "fusion", default=1.0)),
            sigma_mcc=float(_number(fusion, "sigma_mcc", "fusion", default=0.1)),
            prior_h1=float(_number(fusion, "prior_h1", "fusion", default=0.5)),
            vote_m=int(fusion.get("vote_m", 1)),
            method=method,
            alpha=float(raw.get("alpha", 1.2)),
            accuracy=float(raw.get("accuracy", 1e-8)),
            seed=int(raw.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    design = None
    if "design" in raw and raw["design"] is not None:
        section = raw["design"]
        _require_keys(section, _DESIGN_KEYS, "design")
        design = DesignConstraints(
            xi=_number(section, "xi", "design"),
            gamma=_number(section, "gamma", "design"),
            vol=_number(section, "vol", "design", default=1000.0),
            m_max=int(_number(section, "m_max", "design", default=64)),
        )

    scenario = Scenario(m_snm=m_snm, config=config, ncc=ncc, design=design)
    _cross_validate(scenario)
    return scenario


def _cross_validate(scenario: Scenario) -> None:
    cfg = scenario.config
    if cfg.vote_m > scenario.m_snm:
        raise ConfigError(
            f"fusion.vote_m = {cfg.vote_m} exceeds m_snm = {scenario.m_snm}"
        )
    if len(cfg.rho_profile) != cfg.p - 1:
        raise ConfigError(
            f"noise.rho_profile has {len(cfg.rho_profile)} entries but "
            f"noise.p = {cfg.p} requires {cfg.p - 1}"
        )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario file {path} is not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    return scenario_from_dict(raw)


def config_hash(scenario: Scenario, **extra) -> str:
    """Short stable digest of the fully resolved configuration."""
    payload = {
        "m_snm": scenario.m_snm,
        "config": asdict(scenario.config),
        "ncc": asdict(scenario.ncc) if scenario.ncc else None,
        **extra,
    }
    payload["config"]["method"] = (
        scenario.config.method.value if scenario.config.method else "auto"
    )
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
