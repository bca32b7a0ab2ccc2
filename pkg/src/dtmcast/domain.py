"""Immutable world description: video catalog, swipe behavior, multicast
groups, and network constants.

Everything here is frozen after `build_scenario` so workers can read a
Scenario concurrently without locks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .config import AppConfig
    from .dtmodels import AccuracySurface, DtModelSpec
    from .mobility import MobilityParams

CATEGORIES = ("Entertainment", "Games", "Food", "Sports", "Science",
              "Dance", "Travel", "News")


class ScenarioError(ValueError):
    """Raised for invalid scenario configuration or cross-references."""


@dataclass(frozen=True)
class Video:
    """One catalog entry; layer_rates[0] is the base layer in Mb/s."""

    id: int
    category: str
    duration_s: float
    segment_len_s: float
    layer_rates: tuple[float, ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ScenarioError(f"unknown category {self.category!r}")
        if self.duration_s <= 0:
            raise ScenarioError("duration_s must be positive")
        if self.segment_len_s <= 0:
            raise ScenarioError("segment_len_s must be positive")
        ratio = self.duration_s / self.segment_len_s
        if abs(ratio - round(ratio)) > 1e-9:
            raise ScenarioError("segment_len_s must divide duration_s evenly")
        if len(self.layer_rates) < 1 or any(r <= 0 for r in self.layer_rates):
            raise ScenarioError("layer_rates must be non-empty and positive")

    @property
    def n_segments(self) -> int:
        return int(round(self.duration_s / self.segment_len_s))

    def segment_starts(self) -> np.ndarray:
        return np.arange(self.n_segments) * self.segment_len_s


@dataclass(frozen=True)
class SwipeModel:
    """Weibull watch-time distributions keyed by (group, category).

    Lookup order: exact (group, category) override, then category override,
    then the default pair. CDF(x) = 1 - exp(-(x/scale)^shape).
    """

    default: tuple[float, float] = (1.2, 8.0)
    category_params: dict[str, tuple[float, float]] = field(default_factory=dict)
    group_category_params: dict[tuple[int, str], tuple[float, float]] = \
        field(default_factory=dict)

    def __post_init__(self):
        for shape, scale in ([self.default] + list(self.category_params.values())
                             + list(self.group_category_params.values())):
            if shape <= 0 or scale <= 0:
                raise ScenarioError("swipe shape and scale must be positive")

    def params_for(self, group_id: int, category: str) -> tuple[float, float]:
        if (group_id, category) in self.group_category_params:
            return self.group_category_params[(group_id, category)]
        return self.category_params.get(category, self.default)

    def cdf(self, group_id: int, video: "Video", position_s):
        """Probability the group has swiped the video away by position_s."""
        x = np.asarray(position_s, dtype=np.float64)
        if np.any(x < 0):
            raise ValueError("position_s must be non-negative")
        shape, scale = self.params_for(group_id, video.category)
        out = -np.expm1(-((x / scale) ** shape))
        return float(out) if np.isscalar(position_s) else out

    def mean_watch_s(self) -> float:
        shape, scale = self.default
        return scale * math.gamma(1.0 + 1.0 / shape)


def swipe_cdf(model: SwipeModel, group_id: int, video: Video, position_s):
    """Probability the group has swiped video away by playback position."""
    return model.cdf(group_id, video, position_s)


def layer_size(video: Video, layer: int, position_s: float) -> float:
    """Megabits of SVC layer `layer` (1-indexed) in the segment at position_s."""
    if not 1 <= layer <= len(video.layer_rates):
        raise ValueError(f"layer {layer} out of range 1..{len(video.layer_rates)}")
    if not 0 <= position_s < video.duration_s:
        raise ValueError(f"position {position_s} outside [0, {video.duration_s})")
    return video.layer_rates[layer - 1] * video.segment_len_s


@dataclass(frozen=True)
class MulticastGroup:
    id: int
    users: tuple[int, ...]
    recommended_list: tuple[int, ...]
    avg_version: int

    def __post_init__(self):
        if not self.users:
            raise ScenarioError(f"group {self.id} has no users")
        if not self.recommended_list:
            raise ScenarioError(f"group {self.id} has an empty recommended list")
        if self.avg_version < 1:
            raise ScenarioError("avg_version must be >= 1")


@dataclass(frozen=True)
class NetworkConfig:
    bandwidth_mhz: float
    compute_gcps: float
    window_s: float
    tx_power_dbm: float
    noise_psd_dbm_hz: float
    kappa_mcycles_per_mb: float
    mu_gcycles_per_mb: float
    dynamics_weights: tuple[float, float, float, float]
    group_count: int

    def __post_init__(self):
        positives = {
            "bandwidth_mhz": self.bandwidth_mhz,
            "compute_gcps": self.compute_gcps,
            "window_s": self.window_s,
            "kappa_mcycles_per_mb": self.kappa_mcycles_per_mb,
            "mu_gcycles_per_mb": self.mu_gcycles_per_mb,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ScenarioError(f"{name} must be positive, got {value}")
        if self.group_count < 1:
            raise ScenarioError("group_count must be >= 1")
        if len(self.dynamics_weights) != 4 or any(w < 0 for w in self.dynamics_weights):
            raise ScenarioError("dynamics_weights must be four non-negative values")

    @property
    def tx_power_mw(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0)

    @property
    def noise_mw_per_hz(self) -> float:
        return 10.0 ** (self.noise_psd_dbm_hz / 10.0)


@dataclass(frozen=True)
class Scenario:
    catalog: tuple[Video, ...]
    groups: tuple[MulticastGroup, ...]
    net: NetworkConfig
    dt_models: tuple["DtModelSpec", ...]
    surface: "AccuracySurface"
    swipe: SwipeModel
    mobility: "MobilityParams"

    def __post_init__(self):
        if self.net.group_count != len(self.groups):
            raise ScenarioError("group_count does not match number of groups")
        ids = {v.id for v in self.catalog}
        if len(ids) != len(self.catalog):
            raise ScenarioError("duplicate video ids in catalog")
        for g in self.groups:
            for vid in g.recommended_list:
                if vid not in ids:
                    raise ScenarioError(
                        f"group {g.id} references unknown video id {vid}")
            if g.avg_version > max(len(v.layer_rates) for v in self.catalog):
                raise ScenarioError(f"group {g.id} avg_version exceeds layer count")
        versions = [m.version for m in self.dt_models]
        if len(set(versions)) != len(versions) or not versions:
            raise ScenarioError("dt model versions must be unique and non-empty")
        object.__setattr__(self, "_video_index",
                           {v.id: v for v in self.catalog})

    @property
    def area_m(self) -> float:
        return self.mobility.area_m

    @property
    def n_models(self) -> int:
        return len(self.dt_models)

    def video(self, video_id: int) -> Video:
        return self._video_index[video_id]

    def playlist(self, group: MulticastGroup) -> list[Video]:
        return [self._video_index[vid] for vid in group.recommended_list]


def build_scenario(cfg: "AppConfig") -> Scenario:
    """Deterministically expand a validated configuration into a Scenario."""
    from .dtmodels import AccuracySurface, DtModelSpec
    from .mobility import MobilityParams

    sc = cfg.scenario
    if sc.group_count < 1:
        raise ScenarioError("group_count must be >= 1")
    if sc.users_per_group < 1:
        raise ScenarioError("users_per_group must be >= 1")
    if sc.catalog_size < 1:
        raise ScenarioError("catalog_size must be >= 1")

    rng = np.random.default_rng(cfg.seed)
    rates = tuple(float(r) for r in cfg.video.layer_rates_mbps)
    cat_idx = rng.integers(0, len(CATEGORIES), size=sc.catalog_size)
    catalog = tuple(
        Video(id=i, category=CATEGORIES[cat_idx[i]],
              duration_s=cfg.video.duration_s,
              segment_len_s=cfg.video.segment_len_s,
              layer_rates=rates)
        for i in range(sc.catalog_size)
    )

    swipe = SwipeModel(
        default=(cfg.swipe.shape, cfg.swipe.scale_s),
        category_params={k: (v["shape"], v["scale_s"])
                         for k, v in cfg.swipe.category_overrides.items()},
    )

    # Default list length: twice the windows-worth of mean watch time, so the
    # playlist outlasts the window under any swipe realization.
    rec_len = sc.recommended_len
    if rec_len is None:
        rec_len = 2 * math.ceil(cfg.network.window_s / swipe.mean_watch_s())
    rec_len = min(rec_len, sc.catalog_size)

    max_layers = len(rates)
    groups = []
    for g in range(sc.group_count):
        users = tuple(range(g * sc.users_per_group, (g + 1) * sc.users_per_group))
        if sc.group_recommended and g < len(sc.group_recommended):
            recommended = tuple(sc.group_recommended[g])
        else:
            recommended = tuple(
                int(v) for v in rng.choice(sc.catalog_size, size=rec_len,
                                           replace=False))
        avg_version = sc.avg_versions[g % len(sc.avg_versions)]
        if not 1 <= avg_version <= max_layers:
            raise ScenarioError(
                f"avg_version {avg_version} outside [1, {max_layers}]")
        groups.append(MulticastGroup(id=g, users=users,
                                     recommended_list=recommended,
                                     avg_version=avg_version))

    net = NetworkConfig(
        bandwidth_mhz=cfg.network.bandwidth_mhz,
        compute_gcps=cfg.network.compute_gcps,
        window_s=cfg.network.window_s,
        tx_power_dbm=cfg.network.tx_power_dbm,
        noise_psd_dbm_hz=cfg.network.noise_psd_dbm_hz,
        kappa_mcycles_per_mb=cfg.network.kappa_mcycles_per_mb,
        mu_gcycles_per_mb=cfg.network.mu_gcycles_per_mb,
        dynamics_weights=tuple(cfg.network.dynamics_weights),
        group_count=sc.group_count,
    )

    dt_models = tuple(
        DtModelSpec(version=m.version,
                    conv_layers=tuple((w, b) for w, b in m.conv_layers),
                    dense_layers=tuple((w, b) for w, b in m.dense_layers),
                    centroids=m.centroids, feature_dim=m.feature_dim,
                    param_size_mb=m.param_size, feature_size_mb=m.feature_size)
        for m in cfg.dt_models
    )
    surface = AccuracySurface(
        coefficients=tuple(cfg.surface.coefficients),
        m_range=tuple(cfg.surface.m_range),
        psi_range=tuple(cfg.surface.psi_range),
    )
    mobility = MobilityParams(
        pareto_alpha=cfg.mobility.pareto_alpha,
        min_step_m=cfg.mobility.min_step_m,
        max_step_m=cfg.mobility.max_step_m,
        speed_mps=cfg.mobility.speed_mps,
        area_m=sc.area_m,
        sample_period_s=cfg.mobility.sample_period_s,
        pref_sigma=cfg.mobility.pref_sigma,
    )
    return Scenario(catalog=catalog, groups=tuple(groups), net=net,
                    dt_models=dt_models, surface=surface, swipe=swipe,
                    mobility=mobility)
