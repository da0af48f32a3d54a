"""
Confidence bounds: scaling-factor schedules, GP intervals and the
Lipschitz lower envelope used as a safety certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .gp import Dataset, GpPosterior, logdet_regularized_gram, predict

__all__ = [
    "ConstantBeta",
    "RkhsNormBeta",
    "ConfidenceInterval",
    "LipschitzSafetyModel",
    "beta_value",
    "gp_confidence_interval",
    "gp_bounds",
    "lipschitz_lower_envelope",
]


@dataclass(frozen=True)
class ConstantBeta:
    """Heuristic schedule returning the same scaling factor at every step."""

    value: float = 2.0

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"beta must be positive, got {self.value}")

    def __call__(self, post: GpPosterior) -> float:
        return float(self.value)


@dataclass(frozen=True)
class RkhsNormBeta:
    """Scaling factor valid for targets with RKHS norm at most ``norm_bound``.

    ``beta = B + R / sqrt(lam) * sqrt(ln det(I + K/lam) - 2 ln delta)`` where
    ``R`` is the sub-Gaussian noise scale and ``lam`` the regularizer of the
    posterior. With probability at least ``1 - delta`` the target lies inside
    ``mu +- beta * sigma`` everywhere and for all steps simultaneously.
    """

    norm_bound: float
    noise_scale: float
    delta: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.norm_bound > 0:
            raise ValueError(f"norm_bound must be positive, got {self.norm_bound}")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be non-negative, got {self.noise_scale}")

    def __call__(self, post: GpPosterior) -> float:
        info = logdet_regularized_gram(post) - 2.0 * np.log(self.delta)
        return float(self.norm_bound + self.noise_scale / np.sqrt(post.lam) * np.sqrt(info))


BetaSchedule = ConstantBeta | RkhsNormBeta


def beta_value(schedule, post: GpPosterior) -> float:
    return schedule(post)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def gp_bounds(post: GpPosterior, beta: float, x):
    """Vectorized ``(lower, upper)`` arrays for a batch of points."""
    mean, std = predict(post, np.atleast_2d(np.asarray(x, dtype=float)))
    return mean - beta * std, mean + beta * std


def gp_confidence_interval(post: GpPosterior, schedule, x) -> ConfidenceInterval:
    beta = beta_value(schedule, post)
    mean, std = predict(post, x)
    return ConfidenceInterval(mean - beta * std, mean + beta * std)


@dataclass(frozen=True)
class LipschitzSafetyModel:
    """Lipschitz bound ``L`` (Euclidean metric) and almost-sure noise bound ``E``."""

    lipschitz: float
    noise_bound: float = 0.0

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ValueError(f"Lipschitz bound must be positive, got {self.lipschitz}")
        if self.noise_bound < 0:
            raise ValueError(f"noise bound must be non-negative, got {self.noise_bound}")


def lipschitz_lower_envelope(data: Dataset, model: LipschitzSafetyModel, x):
    """Certified lower bound ``max_i (y_i - E - L ||x - x_i||)``.

    Returns ``-inf`` when there is no data. Accepts a single point (returns a
    float) or a batch of shape (m, d) (returns an array).
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim <= 1 and pts.size == data.dim
    pts = pts.reshape(-1, data.dim)
    if len(data) == 0:
        env = np.full(pts.shape[0], -np.inf)
    else:
        cones = data.outputs - model.noise_bound - model.lipschitz * cdist(pts, data.inputs)
        env = cones.max(axis=1)
    return float(env[0]) if single else env
