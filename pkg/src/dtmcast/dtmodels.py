"""DT measurement model: model-size accounting, the clustering-accuracy
surface, and the quadratic surface-fitting pipeline with a synthetic
measurement generator.

The catalog stores a dimensionless size score (parameter/feature sizes are
configurable so the defaults land on {2000, 5000, 9000}); the latency model
interprets the score as megabits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

# Fitted coefficients of the published clustering-accuracy surface, in basis
# order (1, m, psi, m^2, m*psi, psi^2).
PAPER_COEFFICIENTS = (0.8246, 3.793e-5, -0.2262, -2.044e-9, 3.931e-5, -0.3294)
PAPER_FIT_R2 = 0.9334
PAPER_FIT_RMSE = 0.0326

_out_of_domain_count = 0


def out_of_domain_count() -> int:
    """How many accuracy() evaluations were clamped into the fitted domain."""
    return _out_of_domain_count


def reset_out_of_domain_count() -> None:
    global _out_of_domain_count
    _out_of_domain_count = 0


@dataclass(frozen=True)
class DtModelSpec:
    """Layer inventory of one clustering-model version.

    conv_layers / dense_layers hold (weight_count, bias_count) pairs;
    param_size_mb and feature_size_mb are the per-parameter and per-feature
    sizes used by the size score.
    """

    version: int
    conv_layers: tuple[tuple[int, int], ...]
    dense_layers: tuple[tuple[int, int], ...]
    centroids: int
    feature_dim: int
    param_size_mb: float
    feature_size_mb: float

    def __post_init__(self):
        if self.version < 1:
            raise ValueError("version must be >= 1")
        for w, b in list(self.conv_layers) + list(self.dense_layers):
            if w < 0 or b < 0:
                raise ValueError("layer counts must be non-negative")
        if self.centroids < 0 or self.feature_dim < 0:
            raise ValueError("centroids and feature_dim must be non-negative")
        if self.param_size_mb <= 0 or self.feature_size_mb <= 0:
            raise ValueError("param/feature sizes must be positive")


def model_size(spec: DtModelSpec) -> float:
    """Size score: parameters (conv + dense weights and biases) plus the
    K x d clustering feature block."""
    params = sum(w + b for w, b in spec.conv_layers)
    params += sum(w + b for w, b in spec.dense_layers)
    return (spec.param_size_mb * params
            + spec.centroids * spec.feature_dim * spec.feature_size_mb)


@dataclass(frozen=True)
class AccuracySurface:
    """Quadratic fit of clustering accuracy over (model size, user dynamics)."""

    coefficients: tuple[float, float, float, float, float, float]
    m_range: tuple[float, float] = (0.0, 9278.0)
    psi_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if len(self.coefficients) != 6:
            raise ValueError("surface needs exactly six coefficients")
        for lo, hi in (self.m_range, self.psi_range):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError("domain bounds must be finite with lo < hi")


def _design_matrix(m: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones_like(m), m, psi, m * m, m * psi, psi * psi])


def accuracy(surface: AccuracySurface, m, psi):
    """Evaluate the surface, clamping inputs to its domain and the output
    to [0, 1]. Out-of-domain probes are counted, not rejected (exploration
    is expected to hit the edges)."""
    global _out_of_domain_count
    m_arr = np.asarray(m, dtype=np.float64)
    p_arr = np.asarray(psi, dtype=np.float64)
    m_lo, m_hi = surface.m_range
    p_lo, p_hi = surface.psi_range
    clipped = np.any(m_arr < m_lo) or np.any(m_arr > m_hi) \
        or np.any(p_arr < p_lo) or np.any(p_arr > p_hi)
    if clipped:
        _out_of_domain_count += 1
        logger.debug("accuracy() input clamped to domain (count=%d)",
                     _out_of_domain_count)
    m_arr = np.clip(m_arr, m_lo, m_hi)
    p_arr = np.clip(p_arr, p_lo, p_hi)
    c = surface.coefficients
    value = (c[0] + c[1] * m_arr + c[2] * p_arr + c[3] * m_arr * m_arr
             + c[4] * m_arr * p_arr + c[5] * p_arr * p_arr)
    value = np.clip(value, 0.0, 1.0)
    return float(value) if np.isscalar(m) and np.isscalar(psi) else value


def fit_surface(samples) -> tuple[AccuracySurface, float, float]:
    """Ordinary least squares over the basis {1, m, psi, m^2, m*psi, psi^2}.

    Returns (surface, r_squared, rmse) evaluated on the fitting set. The
    design matrix is column-equilibrated before the solve so the wildly
    different basis scales (m^2 vs 1) do not poison the conditioning.
    """
    data = np.asarray(samples, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("samples must be an (n, 3) array of (m, psi, acc)")
    if data.shape[0] < 6:
        raise ValueError(
            f"insufficient samples: need at least 6, got {data.shape[0]}")
    m, psi, acc = data[:, 0], data[:, 1], data[:, 2]
    design = _design_matrix(m, psi)
    scale = np.linalg.norm(design, axis=0)
    if np.any(scale == 0) or np.linalg.matrix_rank(design / scale) < 6:
        raise ValueError("rank-deficient design matrix; vary both m and psi")
    coef, *_ = np.linalg.lstsq(design / scale, acc, rcond=None)
    coef = coef / scale
    resid = acc - design @ coef
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    ss_tot = float(np.sum((acc - acc.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    surface = AccuracySurface(
        coefficients=tuple(coef),
        m_range=(float(m.min()), float(max(m.max(), m.min() + 1e-9))),
        psi_range=(float(psi.min()), float(max(psi.max(), psi.min() + 1e-9))),
    )
    return surface, r2, rmse


def synth_measurements(surface: AccuracySurface, n: int, noise_sd: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Sample (m, psi, acc) uniformly over the surface domain with additive
    Gaussian noise on acc, clamped to [0, 1]. Stands in for an empirical
    measurement campaign."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = rng.uniform(*surface.m_range, size=n)
    psi = rng.uniform(*surface.psi_range, size=n)
    acc = accuracy(surface, m, psi)
    if noise_sd > 0:
        acc = np.clip(acc + rng.normal(0.0, noise_sd, size=n), 0.0, 1.0)
    return np.column_stack([m, psi, acc])


def paper_surface() -> AccuracySurface:
    return AccuracySurface(coefficients=PAPER_COEFFICIENTS)
