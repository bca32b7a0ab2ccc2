"""Configuration schema: a strict YAML document covering the scenario,
network constants, mobility, DT model catalog, the accuracy surface, and
training hyperparameters.

Unknown keys are an error; every field has a default so a partial (or
empty) document is valid. `load_config` is pure: identical bytes produce
identical AppConfig values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    """Schema violation: unknown key, wrong type, or bad value."""


@dataclass
class VideoParams:
    duration_s: float = 15.0
    segment_len_s: float = 1.0
    layer_rates_mbps: list[float] = field(default_factory=lambda: [1.0, 0.5, 0.5, 1.0])


@dataclass
class SwipeParams:
    shape: float = 1.2
    scale_s: float = 8.0
    # per-category {"shape": ..., "scale_s": ...} overrides
    category_overrides: dict[str, dict[str, float]] = field(default_factory=dict)


@dataclass
class ScenarioParams:
    group_count: int = 3
    users_per_group: int = 5
    catalog_size: int = 1000
    area_m: float = 1000.0
    avg_versions: list[int] = field(default_factory=lambda: [4, 3, 2])
    recommended_len: int | None = None
    # optional explicit per-group recommended lists (video ids)
    group_recommended: list[list[int]] = field(default_factory=list)


@dataclass
class MobilityConfig:
    pareto_alpha: float = 1.5
    min_step_m: float = 1.0
    max_step_m: float = 500.0
    speed_mps: float = 1.5
    sample_period_s: float = 10.0
    pref_sigma: float = 0.05


@dataclass
class NetworkParams:
    bandwidth_mhz: float = 10.0
    compute_gcps: float = 8.0
    window_s: float = 300.0
    tx_power_dbm: float = 27.0
    noise_psd_dbm_hz: float = -174.0
    kappa_mcycles_per_mb: float = 16.0
    mu_gcycles_per_mb: float = 6.0
    dynamics_weights: list[float] = field(
        default_factory=lambda: [0.125, 0.25, 0.8, 0.1])


@dataclass
class DtModelParams:
    version: int
    conv_layers: list[list[int]]
    dense_layers: list[list[int]]
    centroids: int = 8
    feature_dim: int = 32
    param_size: float = 0.004
    feature_size: float = 0.004


# Layer inventories chosen so the three default models score exactly
# {2000, 5000, 9000} with param_size = feature_size = 0.004 (the K*d term
# contributes 1.024 of each score).
def _default_dt_models() -> list[DtModelParams]:
    return [
        DtModelParams(version=1, conv_layers=[[2304, 16]],
                      dense_layers=[[497000, 424]]),
        DtModelParams(version=2, conv_layers=[[9216, 64]],
                      dense_layers=[[1240000, 464]]),
        DtModelParams(version=3, conv_layers=[[36864, 128]],
                      dense_layers=[[2212000, 752]]),
    ]


@dataclass
class SurfaceParams:
    coefficients: list[float] = field(default_factory=lambda: [
        0.8246, 3.793e-5, -0.2262, -2.044e-9, 3.931e-5, -0.3294])
    m_range: list[float] = field(default_factory=lambda: [0.0, 9278.0])
    psi_range: list[float] = field(default_factory=lambda: [0.0, 1.0])


@dataclass
class TrainingParams:
    episodes: int = 500
    steps_per_episode: int = 100
    batch: int = 128
    gamma: float = 0.95
    tau: float = 0.005
    actor_lr: float = 1e-4
    critic_lr: float = 3e-4
    exploration_sd: float = 0.1
    exploration_decay: float = 0.999
    smoothing_sd: float = 0.2
    smoothing_clip: float = 0.5
    actor_delay: int = 10
    buffer_capacity: int = 100_000
    denoise_steps: int = 5
    beta_start: float = 1e-4
    beta_end: float = 0.05
    hidden_width: int = 64
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay: float = 0.99


@dataclass
class AppConfig:
    seed: int = 0
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    video: VideoParams = field(default_factory=VideoParams)
    swipe: SwipeParams = field(default_factory=SwipeParams)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    network: NetworkParams = field(default_factory=NetworkParams)
    dt_models: list[DtModelParams] = field(default_factory=_default_dt_models)
    surface: SurfaceParams = field(default_factory=SurfaceParams)
    training: TrainingParams = field(default_factory=TrainingParams)


_SCALARS = (int, float, str, bool, type(None))


def _coerce(value: Any, target_type: Any, path: str) -> Any:
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _build_dataclass(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        value = data[name]
        sub_path = f"{path}.{name}" if path else name
        kwargs[name] = _convert_field(f, value, sub_path)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _convert_field(f, value: Any, path: str) -> Any:
    t = f.type if not isinstance(f.type, str) else f.type  # postponed eval strings
    name = f.name
    # nested dataclasses
    nested = {
        "scenario": ScenarioParams, "video": VideoParams, "swipe": SwipeParams,
        "mobility": MobilityConfig, "network": NetworkParams,
        "surface": SurfaceParams, "training": TrainingParams,
    }
    if name in nested:
        return _build_dataclass(nested[name], value, path)
    if name == "dt_models":
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        return [_build_dataclass(DtModelParams, item, f"{path}[{i}]")
                for i, item in enumerate(value)]
    if isinstance(value, list):
        return value
    if isinstance(value, _SCALARS):
        # look up the declared scalar type from the default when available
        default = f.default if f.default is not dataclasses.MISSING else None
        if isinstance(default, float):
            return _coerce(value, float, path)
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            return _coerce(value, int, path)
        return value
    return value


def parse_config(data: dict | None) -> AppConfig:
    """Validate a parsed YAML mapping against the schema (strict)."""
    return _build_dataclass(AppConfig, data or {}, "")


def load_config(path: str | Path | None) -> AppConfig:
    """Load and validate a YAML config file; None means all defaults."""
    if path is None:
        return AppConfig()
    raw = Path(path).read_text()
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)


def config_to_dict(cfg: AppConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_bytes(cfg: AppConfig) -> bytes:
    """Canonical byte serialization used for manifest hashing."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True).encode()
