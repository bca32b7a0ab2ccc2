"""Levy mobility, the path-loss/fading channel, window emulation, and the
user-dynamics metric."""

import numpy as np
import pytest

from dtmcast.config import parse_config
from dtmcast.domain import build_scenario
from dtmcast.mobility import (MobilityParams, UserStatusWindow, channel_gain,
                              combine_dynamics, emulate_window, levy_step,
                              series_variances, truncated_pareto,
                              user_dynamics)


def make_params(**kw):
    defaults = dict(pareto_alpha=1.5, min_step_m=1.0, max_step_m=500.0,
                    speed_mps=1.5, area_m=1000.0, sample_period_s=10.0)
    defaults.update(kw)
    return MobilityParams(**defaults)


class TestLevyStep:
    def test_degenerate_pareto_gives_exact_step(self, rng):
        params = make_params(min_step_m=5.0, max_step_m=5.0)
        pos = np.array([500.0, 500.0])
        new = levy_step(rng, pos, params)
        assert np.hypot(*(new - pos)) == pytest.approx(5.0)

    def test_truncated_pareto_mean_matches_closed_form(self, rng):
        # E[X] = alpha a^alpha (b^(1-alpha) - a^(1-alpha))
        #        / ((1-alpha) (1 - (a/b)^alpha)) for alpha != 1
        alpha, a, b = 1.5, 1.0, 500.0
        analytic = alpha * a ** alpha * (b ** (1 - alpha) - a ** (1 - alpha)) \
            / ((1 - alpha) * (1 - (a / b) ** alpha))
        draws = truncated_pareto(rng, alpha, a, b, size=100_000)
        assert np.all((draws >= a) & (draws <= b))
        assert draws.mean() == pytest.approx(analytic, rel=0.02)

    def test_corner_position_stays_in_bounds(self, rng):
        params = make_params(min_step_m=50.0, max_step_m=400.0, area_m=200.0)
        pos = np.array([0.0, 0.0])
        for _ in range(200):
            pos = levy_step(rng, pos, params)
            assert np.all((pos >= 0.0) & (pos <= 200.0))

    def test_vectorized_matches_bounds(self, rng):
        params = make_params(area_m=100.0)
        pts = rng.uniform(0, 100.0, size=(20, 2))
        out = levy_step(rng, pts, params)
        assert out.shape == (20, 2)
        assert np.all((out >= 0.0) & (out <= 100.0))

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            make_params(min_step_m=5.0, max_step_m=1.0)


class TestChannelGain:
    def test_reference_distance_pinned_fading(self):
        # 128.1 dB at 1 km
        assert channel_gain(1000.0, fading=1.0) == pytest.approx(
            1.5488166189e-13, rel=1e-9)

    def test_hundred_meters_pinned_fading(self):
        # 128.1 - 37.6 = 90.5 dB at 100 m
        assert channel_gain(100.0, fading=1.0) == pytest.approx(
            8.9125093813e-10, rel=1e-9)

    def test_unit_mean_fading(self, rng):
        d = 250.0
        det = channel_gain(d, fading=1.0)
        draws = channel_gain(np.full(100_000, d), rng)
        assert draws.mean() == pytest.approx(det, rel=0.02)

    def test_below_one_meter_rejected(self, rng):
        with pytest.raises(ValueError):
            channel_gain(0.5, rng)

    def test_strictly_decreasing_in_distance(self):
        d = np.linspace(1.0, 2000.0, 400)
        gains = channel_gain(d, fading=np.ones_like(d))
        assert np.all(np.diff(gains) < 0)


class TestEmulateWindow:
    def test_series_lengths(self, desk_scenario, rng):
        windows = emulate_window(desk_scenario, rng, 0)
        n = int(desk_scenario.net.window_s
                / desk_scenario.mobility.sample_period_s)
        for w in windows.values():
            assert w.n_samples == n == 30
            assert w.gains.shape == w.swipe_ts.shape == w.prefs.shape

    def test_identical_seed_identical_output(self, desk_scenario):
        a = emulate_window(desk_scenario, np.random.default_rng(7), 0)
        b = emulate_window(desk_scenario, np.random.default_rng(7), 0)
        for gid in a:
            assert np.array_equal(a[gid].locations_m, b[gid].locations_m)
            assert np.array_equal(a[gid].gains, b[gid].gains)
            assert np.array_equal(a[gid].swipe_ts, b[gid].swipe_ts)
            assert np.array_equal(a[gid].prefs, b[gid].prefs)

    def test_stationary_users_when_speed_zero(self):
        cfg = parse_config({"mobility": {"speed_mps": 0.0},
                            "scenario": {"group_count": 1,
                                         "users_per_group": 4,
                                         "catalog_size": 50}})
        scenario = build_scenario(cfg)
        w = emulate_window(scenario, np.random.default_rng(3), 0)[0]
        assert np.all(np.diff(w.locations_m, axis=1) == 0.0)
        assert np.all(np.var(w.locations_m, axis=1) < 1e-20)

    def test_positions_continue_from_previous_window(self, desk_scenario):
        rng = np.random.default_rng(11)
        first = emulate_window(desk_scenario, rng, 0)
        second = emulate_window(desk_scenario, rng, 1, prev=first)
        for gid in first:
            assert np.array_equal(second[gid].locations_m[:, 0, :],
                                  first[gid].locations_m[:, -1, :])

    def test_speed_cap_bounds_displacement(self, desk_scenario):
        rng = np.random.default_rng(13)
        w = emulate_window(desk_scenario, rng, 0)[0]
        cap = desk_scenario.mobility.speed_mps \
            * desk_scenario.mobility.sample_period_s
        steps = np.diff(w.locations_m, axis=1)
        # reflection can only shorten the apparent displacement
        assert np.max(np.hypot(steps[..., 0], steps[..., 1])) <= cap + 1e-9


class TestUserDynamics:
    def window_from(self, locations, gains, swipes, prefs):
        return UserStatusWindow(locations_m=np.asarray(locations, float),
                                gains=np.asarray(gains, float),
                                swipe_ts=np.asarray(swipes, float),
                                prefs=np.asarray(prefs, float),
                                sample_period_s=10.0)

    def constant_window(self, value=1.0, k=2, t=5):
        return self.window_from(np.full((k, t, 2), 3.0),
                                np.full((k, t), value),
                                np.full((k, t), 2.0), np.full((k, t), 0.5))

    def test_constant_series_give_zero(self):
        w = self.constant_window()
        assert user_dynamics(w, (0.125, 0.25, 0.8, 0.1)) == 0.0

    def test_weighted_sum_hand_example(self):
        # table weights against hand-picked variances
        psi = combine_dynamics((0.4, 0.2, 0.1, 0.5), (0.125, 0.25, 0.8, 0.1))
        assert psi == pytest.approx(0.23)

    def test_linear_in_weights(self, desk_scenario, rng):
        windows = emulate_window(desk_scenario, rng, 0)
        w = tuple(desk_scenario.net.dynamics_weights)
        psi = user_dynamics(windows.values(), w)
        doubled = user_dynamics(windows.values(), tuple(2 * x for x in w))
        assert doubled == pytest.approx(2 * psi, rel=1e-12)
        assert psi > 0

    def test_permutation_invariance(self, rng):
        k, t = 3, 8
        w = self.window_from(rng.uniform(0, 10, (k, t, 2)),
                             rng.uniform(1e-12, 1e-9, (k, t)),
                             rng.uniform(0, 20, (k, t)),
                             rng.uniform(0, 1, (k, t)))
        perm = rng.permutation(t)
        w2 = self.window_from(w.locations_m[:, perm], w.gains[:, perm],
                              w.swipe_ts[:, perm], w.prefs[:, perm])
        weights = (0.125, 0.25, 0.8, 0.1)
        assert user_dynamics(w2, weights) == pytest.approx(
            user_dynamics(w, weights), rel=1e-12)

    def test_bounded_by_weight_sum(self, desk_scenario):
        weights = desk_scenario.net.dynamics_weights
        for seed in range(20):
            windows = emulate_window(desk_scenario,
                                     np.random.default_rng(seed), 0)
            psi = user_dynamics(windows.values(), weights)
            assert 0.0 <= psi <= sum(weights)

    def test_zero_iff_all_constant(self, rng):
        w = self.constant_window()
        varied = self.window_from(w.locations_m, w.gains, w.swipe_ts,
                                  rng.uniform(0, 1, w.prefs.shape))
        assert user_dynamics(varied, (0.125, 0.25, 0.8, 0.1)) > 0.0

    def test_series_too_short_rejected(self):
        with pytest.raises(ValueError):
            self.window_from(np.zeros((1, 1, 2)), np.ones((1, 1)),
                             np.zeros((1, 1)), np.zeros((1, 1)))

    def test_normalized_variances_in_quarter_bound(self, desk_scenario, rng):
        windows = emulate_window(desk_scenario, rng, 0)
        var_h, var_y, var_w, var_e = series_variances(windows.values())
        assert 0 <= var_h <= 0.25
        assert 0 <= var_y <= 0.5  # two coordinates
        assert 0 <= var_w <= 0.25
        assert 0 <= var_e <= 0.25
