"""Service-latency model: DT processing delay, per-group transcoding and
multicast transmission delays, and their window aggregate.

Units are megabits, MHz, and Gcycles throughout; every delay comes out in
seconds. A dimensional-audit test recomputes everything in bits/Hz/cycles
to pin the prefix handling.

Integrals over playback position are exact per-segment sums: layer sizes
are piecewise constant per segment and the swipe CDF is evaluated at
segment starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import NetworkConfig, SwipeModel, Video
from .dtmodels import AccuracySurface, DtModelSpec, accuracy, model_size

# Floor for the expected-segments denominator, guarding 0/0 in fully
# swiped corner cases.
SEGMENT_FLOOR = 1e-6


class LatencyError(ValueError):
    """Degenerate latency computation (overrun window, zero rate, ...)."""


@dataclass
class GroupWindow:
    """Action-independent per-group inputs for one window.

    `tables` carries precomputed prefix sums; they depend only on the
    scenario (playlist, swipe model, avg_version), so callers stepping many
    windows compute them once and share them.
    """

    group_id: int
    playlist: list[Video]          # full recommended list, in order
    swipe: SwipeModel
    avg_version: int
    min_snr_hz: float              # min_k mean|h|^2 * P_D / N0, in Hz
    tables: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if not self.playlist:
            raise LatencyError("playlist must be non-empty")
        if self.avg_version < 1:
            raise LatencyError("avg_version must be >= 1")
        if self.min_snr_hz <= 0:
            raise LatencyError("min SNR term must be positive")

    def prefix_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cumulative (expected seconds, transcode Mb, transmit Mb) over
        playlist prefixes; index n covers the first n videos."""
        if self.tables is None:
            secs = np.zeros(len(self.playlist) + 1)
            trans = np.zeros(len(self.playlist) + 1)
            tx = np.zeros(len(self.playlist) + 1)
            for i, video in enumerate(self.playlist):
                w_secs, w_trans, w_tx = _video_terms(self, video)
                secs[i + 1] = secs[i] + w_secs
                trans[i + 1] = trans[i] + w_trans
                tx[i + 1] = tx[i] + w_tx
            self.tables = (secs, trans, tx)
        return self.tables


@dataclass
class WindowContext:
    """Everything the latency model needs for one window, minus the action."""

    groups: list[GroupWindow]
    psi: float
    net: NetworkConfig
    models: Sequence[DtModelSpec]
    surface: AccuracySurface

    def __post_init__(self):
        if self.psi < 0:
            raise LatencyError("psi must be non-negative")
        if len(self.groups) != self.net.group_count:
            raise LatencyError("group count mismatch")


def _video_terms(group: GroupWindow, video: Video) -> tuple[float, float, float]:
    """Per-video sums: expected playback seconds, enhancement-layer megabits
    (layers 2..avg_version), and transmitted megabits (layers 1..avg_version),
    each weighted by the survival probability per segment."""
    starts = video.segment_starts()
    survive = 1.0 - group.swipe.cdf(group.group_id, video, starts)
    w = float(survive.sum()) * video.segment_len_s
    l_bar = min(group.avg_version, len(video.layer_rates))
    trans_rate = float(sum(video.layer_rates[1:l_bar]))
    tx_rate = float(sum(video.layer_rates[:l_bar]))
    return w, trans_rate * w, tx_rate * w


def dt_processing_delay(choice, models: Sequence[DtModelSpec],
                        kappa_mcycles_per_mb: float,
                        compute_gcps: float) -> float:
    """Seconds to run the chosen clustering model on the whole edge server."""
    choice = np.asarray(choice)
    if choice.shape != (len(models),) or int(choice.sum()) != 1 \
            or not np.all((choice == 0) | (choice == 1)):
        raise LatencyError("exactly one model must be selected")
    idx = int(np.argmax(choice))
    m = model_size(models[idx])
    return kappa_mcycles_per_mb * m / (compute_gcps * 1000.0)


def effective_playlist(playlist: Sequence[Video], xi_s: float,
                       window_s: float) -> list[Video]:
    """Truncate the recommended list to the window that remains after DT
    processing: the first ceil(|playlist| * (V - xi) / V) videos, never
    fewer than one."""
    if xi_s < 0:
        raise LatencyError("xi_s must be non-negative")
    if xi_s > window_s:
        raise LatencyError(
            f"DT processing ({xi_s:.3f}s) overruns the window ({window_s:.3f}s)")
    n = math.ceil(len(playlist) * (window_s - xi_s) / window_s)
    return list(playlist[:max(n, 1)])


def transcoding_workload(group: GroupWindow, playlist: Sequence[Video],
                         mu_gcycles_per_mb: float) -> float:
    """Expected enhancement-layer transcoding gigacycles over the playlist.
    The base layer ships as stored, so the layer sum starts at 2."""
    if not playlist:
        raise LatencyError("playlist must be non-empty")
    total_mb = 0.0
    for video in playlist:
        _, trans_mb, _ = _video_terms(group, video)
        total_mb += trans_mb
    return mu_gcycles_per_mb * total_mb


def expected_segments(group: GroupWindow, playlist: Sequence[Video]) -> float:
    """Expected seconds of surviving playback (the Eq.-style denominator)."""
    return sum(_video_terms(group, video)[0] for video in playlist)


def transcoding_delay(group: GroupWindow, playlist: Sequence[Video],
                      ctx: WindowContext) -> float:
    """Average per-segment transcoding seconds with the per-group compute
    share C/G."""
    workload = transcoding_workload(group, playlist, ctx.net.mu_gcycles_per_mb)
    segments = expected_segments(group, playlist)
    return _divide_by_segments(workload, segments) \
        / (ctx.net.compute_gcps / ctx.net.group_count)


def multicast_rate(acc: float, bandwidth_mhz: float,
                   min_snr_linear: float) -> float:
    """Accuracy-scaled multicast capacity in Mb/s (worst-user SNR)."""
    if not 0.0 <= acc <= 1.0:
        raise LatencyError("accuracy must lie in [0, 1]")
    if bandwidth_mhz < 0:
        raise LatencyError("bandwidth must be non-negative")
    if min_snr_linear <= 0:
        raise LatencyError("min SNR must be positive")
    return acc * bandwidth_mhz * math.log2(1.0 + min_snr_linear)


def snr_for_bandwidth(min_snr_hz: float, bandwidth_mhz: float) -> float:
    """Dimensionless worst-user SNR once the noise floor scales with the
    reserved bandwidth."""
    return min_snr_hz / (bandwidth_mhz * 1e6)


def transmission_delay(group: GroupWindow, playlist: Sequence[Video],
                       ctx: WindowContext, rate_mbps: float) -> float:
    """Average per-segment multicast seconds; layers 1..avg_version ship."""
    if rate_mbps <= 0:
        raise LatencyError("rate must be positive")
    total_mb = 0.0
    segments = 0.0
    for video in playlist:
        w, _, tx_mb = _video_terms(group, video)
        total_mb += tx_mb
        segments += w
    return _divide_by_segments(total_mb, segments) / rate_mbps


def _divide_by_segments(numerator: float, segments: float) -> float:
    if numerator == 0.0:
        return 0.0
    if segments <= 0.0:
        raise LatencyError("zero expected segments with positive load")
    return numerator / max(segments, SEGMENT_FLOOR)


@dataclass
class LatencyBreakdown:
    xi_s: float
    workloads_gcycles: np.ndarray
    transcode_delays_s: np.ndarray
    tx_delays_s: np.ndarray
    rates_mbps: np.ndarray
    acc: float
    total_s: float


def service_latency(action, ctx: WindowContext,
                    breakdown: bool = False):
    """Window service latency: DT processing plus the group mean of
    transcoding and transmission delays.

    `action` is (model_choice one-hot, bandwidth_mhz per group). Uses the
    per-group prefix tables, which a test pins against the op-by-op path.
    """
    choice, bandwidth = action
    bandwidth = np.asarray(bandwidth, dtype=np.float64)
    net = ctx.net
    if bandwidth.shape != (net.group_count,):
        raise LatencyError("bandwidth vector length must equal group count")
    if np.any(bandwidth < 0) or bandwidth.sum() > net.bandwidth_mhz * (1 + 1e-9):
        raise LatencyError("bandwidth allocation violates the capacity budget")

    xi = dt_processing_delay(choice, ctx.models, net.kappa_mcycles_per_mb,
                             net.compute_gcps)
    if xi > net.window_s:
        raise LatencyError(
            f"DT processing ({xi:.3f}s) overruns the window ({net.window_s:.3f}s)")
    idx = int(np.argmax(np.asarray(choice)))
    m = model_size(ctx.models[idx])
    acc = accuracy(ctx.surface, m, ctx.psi)

    g = net.group_count
    workloads = np.zeros(g)
    psis = np.zeros(g)
    gammas = np.zeros(g)
    rates = np.zeros(g)
    cbar = net.compute_gcps / g
    for i, gw in enumerate(ctx.groups):
        secs, trans, tx = gw.prefix_tables()
        n = max(math.ceil(len(gw.playlist) * (net.window_s - xi) / net.window_s), 1)
        segments = secs[n]
        workloads[i] = net.mu_gcycles_per_mb * trans[n]
        psis[i] = _divide_by_segments(workloads[i], segments) / cbar
        if tx[n] == 0.0:
            gammas[i] = 0.0
            rates[i] = 0.0
            continue
        if bandwidth[i] <= 0.0:
            raise LatencyError(f"group {gw.group_id} has positive load "
                               "but zero bandwidth")
        snr = snr_for_bandwidth(gw.min_snr_hz, bandwidth[i])
        rates[i] = multicast_rate(acc, bandwidth[i], snr)
        gammas[i] = _divide_by_segments(tx[n], segments) / rates[i]

    total = xi + float(np.mean(psis + gammas))
    if not breakdown:
        return total
    return LatencyBreakdown(xi_s=xi, workloads_gcycles=workloads,
                            transcode_delays_s=psis, tx_delays_s=gammas,
                            rates_mbps=rates, acc=acc, total_s=total)
