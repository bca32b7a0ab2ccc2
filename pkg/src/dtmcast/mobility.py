"""Synthetic per-window user status: Levy-flight mobility in a bounded
square, path-loss/Rayleigh channel gains, Weibull swipe intervals, and a
bounded preference walk, plus the scalar user-dynamics metric.

All generation is driven by an explicitly passed numpy Generator; callers
may run windows for different seeds concurrently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .domain import Scenario, SwipeModel


@dataclass(frozen=True)
class MobilityParams:
    pareto_alpha: float
    min_step_m: float
    max_step_m: float
    speed_mps: float
    area_m: float
    sample_period_s: float = 10.0
    pref_sigma: float = 0.05

    def __post_init__(self):
        if not 0 < self.min_step_m <= self.max_step_m:
            raise ValueError("need 0 < min_step_m <= max_step_m")
        if self.pareto_alpha <= 0:
            raise ValueError("pareto_alpha must be positive")
        if self.speed_mps < 0 or self.area_m <= 0:
            raise ValueError("speed_mps must be >= 0 and area_m positive")


@dataclass(frozen=True)
class UserStatusWindow:
    """Per-group window series, stacked as (users, samples[, 2]) arrays."""

    locations_m: np.ndarray   # (K, T, 2)
    gains: np.ndarray         # (K, T) linear power gains
    swipe_ts: np.ndarray      # (K, T) inter-swipe intervals, seconds
    prefs: np.ndarray         # (K, T) in [0, 1]
    sample_period_s: float

    def __post_init__(self):
        t = self.locations_m.shape[1]
        if t < 2:
            raise ValueError("window series need at least 2 samples")
        for name in ("gains", "swipe_ts", "prefs"):
            if getattr(self, name).shape[1] != t:
                raise ValueError(f"{name} length differs from locations")
        if np.any(self.gains <= 0):
            raise ValueError("gains must be positive")
        if np.any((self.prefs < 0) | (self.prefs > 1)):
            raise ValueError("prefs must lie in [0, 1]")

    @property
    def n_users(self) -> int:
        return self.locations_m.shape[0]

    @property
    def n_samples(self) -> int:
        return self.locations_m.shape[1]


def truncated_pareto(rng: np.random.Generator, alpha: float, lo: float,
                     hi: float, size=None) -> np.ndarray | float:
    """Inverse-CDF draw from a Pareto(alpha) tail truncated to [lo, hi]."""
    if lo == hi:
        return lo if size is None else np.full(size, lo)
    u = rng.uniform(0.0, 1.0, size=size)
    tail = 1.0 - (lo / hi) ** alpha
    return lo * (1.0 - u * tail) ** (-1.0 / alpha)


def _reflect(x: np.ndarray, hi: float) -> np.ndarray:
    """Fold positions back into [0, hi] by mirror reflection."""
    period = 2.0 * hi
    x = np.mod(x, period)
    return np.where(x > hi, period - x, x)


def levy_step(rng: np.random.Generator, pos: np.ndarray,
              params: MobilityParams) -> np.ndarray:
    """One heavy-tailed move: step length from a truncated Pareto, uniform
    heading, mirror-reflected at the area boundary.

    `pos` may be a single point (2,) or a stack (N, 2).
    """
    pos = np.asarray(pos, dtype=np.float64)
    single = pos.ndim == 1
    pts = pos[None, :] if single else pos
    n = pts.shape[0]
    steps = truncated_pareto(rng, params.pareto_alpha, params.min_step_m,
                             params.max_step_m, size=n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    moved = pts + np.stack([steps * np.cos(theta), steps * np.sin(theta)], axis=1)
    moved = _reflect(moved, params.area_m)
    return moved[0] if single else moved


def path_loss_db(distance_m) -> np.ndarray | float:
    """Urban macro path loss, 128.1 + 37.6 log10(d_km) dB."""
    return 128.1 + 37.6 * np.log10(np.asarray(distance_m, dtype=np.float64) / 1000.0)


def channel_gain(distance_m, rng: np.random.Generator | None = None,
                 fading=None) -> np.ndarray | float:
    """Linear channel power gain: path loss times unit-mean exponential
    (Rayleigh power) fading. `fading` pins the fading draw for tests."""
    d = np.asarray(distance_m, dtype=np.float64)
    if np.any(d < 1.0):
        raise ValueError("distance below 1 m is outside model validity")
    det = 10.0 ** (-path_loss_db(d) / 10.0)
    if fading is None:
        if rng is None:
            raise ValueError("pass rng or an explicit fading value")
        fading = rng.exponential(1.0, size=d.shape)
    out = det * fading
    return float(out) if np.isscalar(distance_m) else out


def emulate_window(scenario: Scenario, rng: np.random.Generator,
                   window_index: int,
                   prev: Mapping[int, UserStatusWindow] | None = None
                   ) -> dict[int, UserStatusWindow]:
    """Generate one resource-reservation window of user status per group.

    Positions continue from `prev` when given, else users start uniformly
    in the area. The per-sample displacement is a truncated-Pareto draw
    additionally capped by speed * sample_period (a zero speed pins users
    in place). Gains come from the distance to the base station at the
    area center; swipe intervals are Weibull draws for a video sampled
    from the group's recommended list; preferences follow a bounded
    random walk.
    """
    mp = scenario.mobility
    dt = mp.sample_period_s
    n_samples = max(2, int(round(scenario.net.window_s / dt)))
    bs_xy = np.array([mp.area_m / 2.0, mp.area_m / 2.0])
    cap = mp.speed_mps * dt
    step_params = MobilityParams(
        pareto_alpha=mp.pareto_alpha,
        min_step_m=min(mp.min_step_m, cap) if cap > 0 else mp.min_step_m,
        max_step_m=min(mp.max_step_m, cap) if cap > 0 else mp.max_step_m,
        speed_mps=mp.speed_mps, area_m=mp.area_m,
        sample_period_s=dt, pref_sigma=mp.pref_sigma,
    ) if cap < mp.max_step_m and cap > 0 else mp

    out: dict[int, UserStatusWindow] = {}
    for group in scenario.groups:
        k = len(group.users)
        if prev is not None and group.id in prev:
            pos = prev[group.id].locations_m[:, -1, :].copy()
            pref = prev[group.id].prefs[:, -1].copy()
        else:
            pos = rng.uniform(0.0, mp.area_m, size=(k, 2))
            pref = rng.uniform(0.0, 1.0, size=k)

        locations = np.empty((k, n_samples, 2))
        prefs = np.empty((k, n_samples))
        locations[:, 0, :] = pos
        prefs[:, 0] = pref
        # bulk draws, then the same move/reflect recursion as levy_step
        if cap > 0:
            steps = truncated_pareto(rng, step_params.pareto_alpha,
                                     step_params.min_step_m,
                                     step_params.max_step_m,
                                     size=(n_samples - 1, k))
            thetas = rng.uniform(0.0, 2.0 * np.pi, size=(n_samples - 1, k))
            disp_x = steps * np.cos(thetas)
            disp_y = steps * np.sin(thetas)
        pref_noise = rng.normal(0.0, mp.pref_sigma, size=(n_samples - 1, k))
        for t in range(1, n_samples):
            if cap > 0:
                pos = np.column_stack([
                    _reflect(pos[:, 0] + disp_x[t - 1], mp.area_m),
                    _reflect(pos[:, 1] + disp_y[t - 1], mp.area_m)])
            pref = np.clip(pref + pref_noise[t - 1], 0.0, 1.0)
            locations[:, t, :] = pos
            prefs[:, t] = pref
        dist = np.maximum(
            np.hypot(locations[:, :, 0] - bs_xy[0],
                     locations[:, :, 1] - bs_xy[1]), 1.0)
        gains = channel_gain(dist, rng)

        # swipe intervals: Weibull watch times for a random recommended video
        playlist = scenario.playlist(group)
        vid_idx = rng.integers(0, len(playlist), size=(k, n_samples))
        params = [scenario.swipe.params_for(group.id, v.category)
                  for v in playlist]
        shape_arr = np.array([p[0] for p in params])
        scale_arr = np.array([p[1] for p in params])
        shapes = shape_arr[vid_idx]
        scales = scale_arr[vid_idx]
        swipe_ts = rng.weibull(shapes) * scales

        out[group.id] = UserStatusWindow(
            locations_m=locations, gains=gains, swipe_ts=swipe_ts,
            prefs=prefs, sample_period_s=dt)
    return out


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def series_variances(windows: Iterable[UserStatusWindow]
                     ) -> tuple[float, float, float, float]:
    """Population variances of the four pooled, min-max normalized series
    (gains, locations, swipe intervals, preferences). Location variance is
    the sum of the per-coordinate variances."""
    ws = list(windows)
    if not ws:
        raise ValueError("need at least one window")
    gains = np.concatenate([w.gains.ravel() for w in ws])
    sw = np.concatenate([w.swipe_ts.ravel() for w in ws])
    prefs = np.concatenate([w.prefs.ravel() for w in ws])
    locs = np.concatenate([w.locations_m.reshape(-1, 2) for w in ws])
    if gains.size < 2:
        raise ValueError("series too short for a variance")
    var_h = float(np.var(_minmax(gains)))
    var_y = float(np.var(_minmax(locs[:, 0])) + np.var(_minmax(locs[:, 1])))
    var_w = float(np.var(_minmax(sw)))
    var_e = float(np.var(_minmax(prefs)))
    return var_h, var_y, var_w, var_e


def combine_dynamics(variances, weights) -> float:
    """Weighted sum of the four status variances."""
    if len(variances) != 4 or len(weights) != 4:
        raise ValueError("need four variances and four weights")
    return float(np.dot(weights, variances))


def user_dynamics(windows: Iterable[UserStatusWindow] | UserStatusWindow,
                  weights) -> float:
    """Scalar user-dynamics metric for a group or the whole system."""
    if isinstance(windows, UserStatusWindow):
        windows = [windows]
    return combine_dynamics(series_variances(windows), weights)


def export_window_csv(path, windows_by_group: Mapping[int, UserStatusWindow],
                      user_ids_by_group: Mapping[int, Iterable[int]]) -> None:
    """Trace export: one row per (user, sample)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "t_s", "x_m", "y_m", "gain",
                         "swipe_interval_s", "pref"])
        for gid in sorted(windows_by_group):
            w = windows_by_group[gid]
            users = list(user_ids_by_group[gid])
            for ui, uid in enumerate(users):
                for t in range(w.n_samples):
                    writer.writerow([
                        uid, f"{t * w.sample_period_s:.9g}",
                        f"{w.locations_m[ui, t, 0]:.9g}",
                        f"{w.locations_m[ui, t, 1]:.9g}",
                        f"{w.gains[ui, t]:.9g}",
                        f"{w.swipe_ts[ui, t]:.9g}",
                        f"{w.prefs[ui, t]:.9g}",
                    ])
