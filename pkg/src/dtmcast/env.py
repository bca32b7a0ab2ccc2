"""Sequential decision environment over resource-reservation windows.

Window generation is action-independent: the next window's user status is
emulated eagerly after every step, so the pending `WindowContext` can be
inspected (e.g. by the brute-force oracle) before an action is chosen
without disturbing the seed stream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .domain import NetworkConfig, Scenario
from .latency import (GroupWindow, LatencyBreakdown, LatencyError,
                      WindowContext, service_latency)
from .mobility import UserStatusWindow, emulate_window, user_dynamics

# Reward clamp for infeasible corners (DT overrun, starved group): ten
# windows' worth of latency, so learning can recover instead of crashing.
INFEASIBLE_LATENCY_FACTOR = 10.0

RawAction = np.ndarray  # (I + G,) reals in [0, 1]


@dataclass(frozen=True)
class State:
    """Previous-window observations, dimension 3G + 1."""

    workloads_gcycles: np.ndarray
    dt_delay_s: float
    transcode_delays_s: np.ndarray
    tx_delays_s: np.ndarray

    def __post_init__(self):
        if np.any(self.workloads_gcycles < 0) or self.dt_delay_s < 0 \
                or np.any(self.transcode_delays_s < 0) \
                or np.any(self.tx_delays_s < 0):
            raise ValueError("state components must be non-negative")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([
            self.workloads_gcycles, [self.dt_delay_s],
            self.transcode_delays_s, self.tx_delays_s])

    @property
    def dim(self) -> int:
        return 3 * len(self.workloads_gcycles) + 1


@dataclass(frozen=True)
class Action:
    model_choice: np.ndarray    # one-hot over I
    bandwidth_mhz: np.ndarray   # length G

    def validate(self, n_models: int, net: NetworkConfig) -> None:
        mc = np.asarray(self.model_choice)
        bw = np.asarray(self.bandwidth_mhz)
        if mc.shape != (n_models,) or not np.all((mc == 0) | (mc == 1)) \
                or int(mc.sum()) != 1:
            raise ValueError("model_choice must be one-hot")
        if bw.shape != (net.group_count,):
            raise ValueError("bandwidth vector length must equal group count")
        if np.any(bw < 0) or np.any(bw > net.bandwidth_mhz * (1 + 1e-9)) \
                or bw.sum() > net.bandwidth_mhz * (1 + 1e-9):
            raise ValueError("bandwidth allocation violates the budget")

    @property
    def model_index(self) -> int:
        return int(np.argmax(self.model_choice))


def decode_action(raw: RawAction, net: NetworkConfig) -> Action:
    """Map a squashed [0,1]^(I+G) vector onto a feasible Action.

    The first I components select the model by argmax (ties break to the
    lowest index); the rest are normalized to exhaust the bandwidth budget
    exactly (latency is monotone decreasing in bandwidth, so the optimum
    always spends all of it). An all-zero bandwidth block falls back to an
    equal split.
    """
    raw = np.asarray(raw, dtype=np.float64)
    g = net.group_count
    if raw.ndim != 1 or raw.size <= g:
        raise ValueError("raw action must be a vector of length I + G")
    n_models = raw.size - g
    choice = np.zeros(n_models)
    choice[int(np.argmax(raw[:n_models]))] = 1.0
    bw_raw = np.clip(raw[n_models:], 0.0, None)
    total = bw_raw.sum()
    if total <= 0.0:
        bandwidth = np.full(g, net.bandwidth_mhz / g)
    else:
        bandwidth = net.bandwidth_mhz * bw_raw / total
    return Action(model_choice=choice, bandwidth_mhz=bandwidth)


def default_action(scenario: Scenario) -> Action:
    choice = np.zeros(scenario.n_models)
    choice[0] = 1.0
    g = scenario.net.group_count
    return Action(model_choice=choice,
                  bandwidth_mhz=np.full(g, scenario.net.bandwidth_mhz / g))


def build_context(scenario: Scenario, windows: dict[int, UserStatusWindow],
                  tables: dict[int, tuple] | None = None) -> WindowContext:
    """Reduce one window's user status to the latency model's inputs.

    The worst-user SNR term uses each user's window-mean gain (the DT
    predicts the average condition for the window), then the minimum
    across the group. `tables` optionally shares the scenario-static
    playlist prefix sums across windows.
    """
    net = scenario.net
    psi = user_dynamics(windows.values(), net.dynamics_weights)
    snr_scale = net.tx_power_mw / net.noise_mw_per_hz
    groups = []
    for group in scenario.groups:
        w = windows[group.id]
        min_gain = float(w.gains.mean(axis=1).min())
        groups.append(GroupWindow(
            group_id=group.id,
            playlist=scenario.playlist(group),
            swipe=scenario.swipe,
            avg_version=group.avg_version,
            min_snr_hz=min_gain * snr_scale,
            tables=tables.get(group.id) if tables else None,
        ))
    return WindowContext(groups=groups, psi=psi, net=net,
                         models=scenario.dt_models, surface=scenario.surface)


class MsvsEnv:
    """Multicast-streaming environment; one instance per training run."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.n_groups = scenario.net.group_count
        self.n_models = scenario.n_models
        self.state_dim = 3 * self.n_groups + 1
        self.raw_action_dim = self.n_models + self.n_groups
        self._rng: np.random.Generator | None = None
        self._windows: dict[int, UserStatusWindow] | None = None
        self._pending: WindowContext | None = None
        self.window_index = 0
        self.state: State | None = None
        # fixed feature scales keep agent inputs O(1) without running stats
        v = scenario.net.window_s
        mu = scenario.net.mu_gcycles_per_mb
        self.state_scales = np.concatenate([
            np.full(self.n_groups, mu * v), [v],
            np.full(self.n_groups, v), np.full(self.n_groups, v)])
        # playlist prefix sums are scenario-static; share them across windows
        self._tables: dict[int, tuple] = {}
        for group in scenario.groups:
            gw = GroupWindow(group_id=group.id,
                             playlist=scenario.playlist(group),
                             swipe=scenario.swipe,
                             avg_version=group.avg_version, min_snr_hz=1.0)
            self._tables[group.id] = gw.prefix_tables()

    # ---- lifecycle -----------------------------------------------------

    def reset(self, seed) -> State:
        """Generate window 0 under the default action (model 1, equal
        split) and stage window 1."""
        self._rng = np.random.default_rng(seed)
        self._windows = emulate_window(self.scenario, self._rng, 0, prev=None)
        ctx = build_context(self.scenario, self._windows, self._tables)
        bd = service_latency(
            (default_action(self.scenario).model_choice,
             default_action(self.scenario).bandwidth_mhz), ctx, breakdown=True)
        self.state = self._state_from(bd)
        self.window_index = 0
        self._stage_next()
        return self.state

    def _stage_next(self) -> None:
        self._windows = emulate_window(self.scenario, self._rng,
                                       self.window_index + 1,
                                       prev=self._windows)
        self._pending = build_context(self.scenario, self._windows, self._tables)

    @property
    def pending_context(self) -> WindowContext:
        if self._pending is None:
            raise RuntimeError("reset() before reading the pending context")
        return self._pending

    def normalize_state(self, state: State) -> np.ndarray:
        return state.vector / self.state_scales

    def _state_from(self, bd: LatencyBreakdown) -> State:
        return State(workloads_gcycles=bd.workloads_gcycles,
                     dt_delay_s=bd.xi_s,
                     transcode_delays_s=bd.transcode_delays_s,
                     tx_delays_s=bd.tx_delays_s)

    def step(self, action: Action) -> tuple[State, float, dict]:
        """Apply `action` to the staged window; returns (state, -latency,
        info). Infeasible corners clamp the reward instead of raising."""
        if self._pending is None:
            raise RuntimeError("reset() before step()")
        action.validate(self.n_models, self.scenario.net)
        ctx = self._pending
        self.window_index += 1
        t_max = INFEASIBLE_LATENCY_FACTOR * self.scenario.net.window_s
        info: dict = {
            "window": self.window_index,
            "psi": ctx.psi,
            "model_choice": action.model_index + 1,
            "bandwidth_mhz": action.bandwidth_mhz.copy(),
            "infeasible": False,
        }
        try:
            bd = service_latency(
                (action.model_choice, action.bandwidth_mhz), ctx,
                breakdown=True)
        except LatencyError:
            # DT overrun or a starved group: worst-case latency, empty obs
            zeros = np.zeros(self.n_groups)
            bd = LatencyBreakdown(
                xi_s=0.0, workloads_gcycles=zeros,
                transcode_delays_s=zeros, tx_delays_s=zeros,
                rates_mbps=zeros, acc=0.0, total_s=t_max)
            info["infeasible"] = True
        latency = min(bd.total_s, t_max)
        reward = -latency
        self.state = self._state_from(bd)
        info.update({
            "acc": bd.acc,
            "xi_s": bd.xi_s,
            "workloads_gcycles": bd.workloads_gcycles.copy(),
            "transcode_delays_s": bd.transcode_delays_s.copy(),
            "tx_delays_s": bd.tx_delays_s.copy(),
            "rates_mbps": bd.rates_mbps.copy(),
            "latency_s": latency,
            "reward": reward,
        })
        self._stage_next()
        return self.state, reward, info


class FrozenWindowEnv:
    """Bandit-style variant: every step replays one frozen window context.

    Used to study a single window's action landscape (and to train an
    agent against the brute-force optimum on that window).
    """

    def __init__(self, ctx: WindowContext, scenario: Scenario,
                 state: State | None = None):
        self.scenario = scenario
        self.ctx = ctx
        self.n_groups = scenario.net.group_count
        self.n_models = scenario.n_models
        self.state_dim = 3 * self.n_groups + 1
        self.raw_action_dim = self.n_models + self.n_groups
        base = MsvsEnv(scenario)
        self.state_scales = base.state_scales
        if state is None:
            bd = service_latency(
                (default_action(scenario).model_choice,
                 default_action(scenario).bandwidth_mhz), ctx, breakdown=True)
            state = State(workloads_gcycles=bd.workloads_gcycles,
                          dt_delay_s=bd.xi_s,
                          transcode_delays_s=bd.transcode_delays_s,
                          tx_delays_s=bd.tx_delays_s)
        self.state = state

    @property
    def pending_context(self) -> WindowContext:
        return self.ctx

    def normalize_state(self, state: State) -> np.ndarray:
        return state.vector / self.state_scales

    def reset(self, seed) -> State:
        return self.state

    def step(self, action: Action) -> tuple[State, float, dict]:
        action.validate(self.n_models, self.scenario.net)
        t_max = INFEASIBLE_LATENCY_FACTOR * self.scenario.net.window_s
        try:
            latency = min(service_latency(
                (action.model_choice, action.bandwidth_mhz), self.ctx), t_max)
            infeasible = False
        except LatencyError:
            latency = t_max
            infeasible = True
        info = {"latency_s": latency, "reward": -latency,
                "infeasible": infeasible, "psi": self.ctx.psi}
        return self.state, -latency, info


def simplex_grid(n_groups: int, grid_points: int) -> np.ndarray:
    """All fractional splits of 1 into `n_groups` parts on a lattice with
    `grid_points` levels per axis (n_groups = 2 gives exactly grid_points
    rows)."""
    n = grid_points - 1
    rows = [np.array(c) / n
            for c in itertools.product(range(n + 1), repeat=n_groups)
            if sum(c) == n]
    return np.array(rows)


def brute_force_optimum(ctx: WindowContext, grid_points: int = 41
                        ) -> tuple[Action, float]:
    """Exhaustive minimum over model choices and a simplex grid of
    bandwidth splits. Guarded to desk scale (G <= 3, grid <= 50)."""
    g = ctx.net.group_count
    n_models = len(ctx.models)
    if g > 3:
        raise ValueError("brute force is guarded to G <= 3")
    if grid_points > 50 or grid_points < 2:
        raise ValueError("grid_points must lie in [2, 50]")
    best: tuple[float, Action] | None = None
    fractions = simplex_grid(g, grid_points)
    for idx in range(n_models):
        choice = np.zeros(n_models)
        choice[idx] = 1.0
        for frac in fractions:
            bandwidth = ctx.net.bandwidth_mhz * frac
            try:
                latency = service_latency((choice, bandwidth), ctx)
            except LatencyError:
                continue
            if best is None or latency < best[0]:
                best = (latency, Action(model_choice=choice.copy(),
                                        bandwidth_mhz=bandwidth.copy()))
    if best is None:
        raise LatencyError("no feasible action on the grid")
    return best[1], best[0]


def sqrt_allocation(ctx: WindowContext, model_index: int,
                    refinements: int = 2) -> np.ndarray:
    """Closed-form bandwidth split B_g proportional to sqrt(load/efficiency).

    Exact when spectral efficiency is bandwidth-independent; here the noise
    floor scales with B, so the efficiency is re-evaluated at the current
    iterate a couple of times. The grid search is the authority; this is a
    cross-check."""
    from .dtmodels import accuracy, model_size
    net = ctx.net
    g = net.group_count
    choice = np.zeros(len(ctx.models))
    choice[model_index] = 1.0
    bd = service_latency((choice, np.full(g, net.bandwidth_mhz / g)), ctx,
                         breakdown=True)
    acc = bd.acc
    xi = bd.xi_s
    loads = np.zeros(g)
    for i, gw in enumerate(ctx.groups):
        secs, _, tx = gw.prefix_tables()
        n = max(math.ceil(len(gw.playlist) * (net.window_s - xi) / net.window_s), 1)
        loads[i] = tx[n] / max(secs[n], 1e-6)   # Mb per expected segment
    bandwidth = np.full(g, net.bandwidth_mhz / g)
    for _ in range(refinements + 1):
        snr = np.array([gw.min_snr_hz for gw in ctx.groups]) / (bandwidth * 1e6)
        eff = acc * np.log2(1.0 + snr)          # Mb/s per MHz
        weight = np.sqrt(loads / eff)
        bandwidth = net.bandwidth_mhz * weight / weight.sum()
    return bandwidth
