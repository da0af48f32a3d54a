"""
Safe sets on a discrete grid and as a membership predicate on a box.

The grid path serves SafeOpt, Real-beta-SafeOpt and LoSBO. Which bounds feed
the safe set, maximizer and expander computations is the only difference
between them. The continuous path (used by LoS-GP-UCB) never materializes a
set; membership is decided point by point from the Lipschitz envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.spatial.distance import cdist

from .bounds import LipschitzSafetyModel, gp_bounds, lipschitz_lower_envelope
from .gp import Dataset, GpPosterior

__all__ = [
    "InvalidStateError",
    "GridDomain",
    "SafeSetState",
    "ContinuousSafeSet",
    "update_safe_set_gp",
    "update_safe_set_lipschitz",
    "maximizer_set",
    "expander_set",
]

# rows of the (safe x candidate) distance matrix processed at once
_CHUNK = 512


class InvalidStateError(RuntimeError):
    """An algorithm reached a state its contract rules out (e.g. empty safe set)."""


@dataclass(frozen=True)
class GridDomain:
    """Row-major grid over a box; the last dimension varies fastest."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points_per_dim: tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        n = np.atleast_1d(self.points_per_dim).astype(int)
        if n.size == 1 and len(lower) > 1:
            n = np.repeat(n, len(lower))
        if len(lower) != len(upper) or n.size != len(lower):
            raise ValueError("lower, upper and points_per_dim must have equal length")
        if np.any(n < 1) or any(lo > hi for lo, hi in zip(lower, upper)):
            raise ValueError("invalid grid specification")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "points_per_dim", tuple(int(v) for v in n))

    @cached_property
    def points(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(self.lower, self.upper, self.points_per_dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    @property
    def dim(self) -> int:
        return len(self.lower)

    def __len__(self) -> int:
        return int(np.prod(self.points_per_dim))

    def nearest_index(self, x) -> int:
        return int(np.argmin(np.sum((self.points - np.asarray(x, dtype=float)) ** 2, axis=1)))


@dataclass(frozen=True)
class SafeSetState:
    """Current certified-safe grid indicator together with the seed set."""

    grid: GridDomain
    seeds: tuple[int, ...]
    threshold: float
    safe: np.ndarray = None

    def __post_init__(self):
        seeds = tuple(sorted(set(int(i) for i in np.atleast_1d(self.seeds))))
        if not seeds:
            raise ValueError("seed set must be nonempty")
        if seeds[0] < 0 or seeds[-1] >= len(self.grid):
            raise ValueError("seed index outside the grid")
        safe = np.zeros(len(self.grid), dtype=bool) if self.safe is None else np.array(self.safe, dtype=bool)
        safe[list(seeds)] = True
        safe.setflags(write=False)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "safe", safe)

    @property
    def safe_indices(self) -> np.ndarray:
        return np.flatnonzero(self.safe)

    @property
    def size(self) -> int:
        return int(self.safe.sum())

    def with_safe(self, safe: np.ndarray) -> SafeSetState:
        return replace(self, safe=self.safe | safe)


def _require_safe(state: SafeSetState) -> np.ndarray:
    idx = state.safe_indices
    if idx.size == 0:
        raise InvalidStateError("safe set is empty")
    return idx


def _cone_reach(sources: np.ndarray, values: np.ndarray, targets: np.ndarray, lipschitz: float) -> np.ndarray:
    """``max_j values[j] - L ||targets[i] - sources[j]||`` for every target."""
    out = np.full(targets.shape[0], -np.inf)
    for start in range(0, targets.shape[0], _CHUNK):
        block = targets[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.max(values - lipschitz * cdist(block, sources), axis=1)
    return out


def update_safe_set_gp(state: SafeSetState, post: GpPosterior, schedule, lipschitz: float) -> SafeSetState:
    """Grow the safe set from the GP lower bound extrapolated with slope ``L``.

    A grid point becomes safe if some currently safe point ``x'`` satisfies
    ``lower(x') - L ||x - x'|| >= h``.
    """
    if not lipschitz > 0:
        raise ValueError(f"Lipschitz bound must be positive, got {lipschitz}")
    idx = _require_safe(state)
    pts = state.grid.points
    lower, _ = gp_bounds(post, schedule(post), pts[idx])
    reach = _cone_reach(pts[idx], lower, pts, lipschitz)
    return state.with_safe(reach >= state.threshold)


def update_safe_set_lipschitz(state, data: Dataset, model: LipschitzSafetyModel):
    """Safe set from the Lipschitz envelope alone: seeds plus ``env(x) >= h``.

    Works for both the grid state and :class:`ContinuousSafeSet`; the GP
    posterior plays no role.
    """
    if isinstance(state, ContinuousSafeSet):
        return replace(state, data=data, model=model)
    env = lipschitz_lower_envelope(data, model, state.grid.points)
    return state.with_safe(env >= state.threshold)


def maximizer_set(state: SafeSetState, lower, upper) -> np.ndarray:
    """Safe indices whose upper bound reaches the best safe lower bound."""
    idx = _require_safe(state)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return idx[upper[idx] >= lower[idx].max()]


def expander_set(state: SafeSetState, upper, lipschitz: float, noise_bound: float = 0.0) -> np.ndarray:
    """Safe indices that could certify a currently unsafe grid point.

    ``x`` is an expander if ``upper(x) - E' - L ||x - z|| >= h`` for some
    unsafe ``z``; ``noise_bound`` is ``E'`` (zero on the GP-bound path).
    """
    if not lipschitz > 0:
        raise ValueError(f"Lipschitz bound must be positive, got {lipschitz}")
    idx = _require_safe(state)
    unsafe = np.flatnonzero(~state.safe)
    if unsafe.size == 0:
        return unsafe
    pts = state.grid.points
    upper = np.asarray(upper, dtype=float)
    # reach from each safe x to its nearest unsafe z
    nearest = np.empty(idx.size)
    for start in range(0, idx.size, _CHUNK):
        block = idx[start:start + _CHUNK]
        nearest[start:start + _CHUNK] = cdist(pts[block], pts[unsafe]).min(axis=1)
    ok = upper[idx] - noise_bound - lipschitz * nearest >= state.threshold
    return idx[ok]


@dataclass(frozen=True)
class ContinuousSafeSet:
    """Membership predicate ``x in S0`` or ``env(x) >= h`` over a box.

    Seeds are points; ``seed_radius`` turns each into a closed ball (zero
    means the seed points themselves only).
    """

    lower: np.ndarray
    upper: np.ndarray
    seeds: np.ndarray
    threshold: float
    model: LipschitzSafetyModel
    data: Dataset = None
    seed_radius: float = 0.0

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        seeds = np.asarray(self.seeds, dtype=float).reshape(-1, lower.size)
        if seeds.shape[0] == 0:
            raise ValueError("seed set must be nonempty")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "seeds", seeds)
        if self.data is None:
            object.__setattr__(self, "data", Dataset(lower, upper))

    def contains(self, x) -> np.ndarray:
        """Vectorized exact membership test for points of shape (m, d)."""
        pts = np.asarray(x, dtype=float).reshape(-1, self.lower.size)
        in_box = Dataset.contains(pts, self.lower, self.upper)
        near_seed = cdist(pts, self.seeds).min(axis=1) <= self.seed_radius
        env = lipschitz_lower_envelope(self.data, self.model, pts)
        return in_box & (near_seed | (env >= self.threshold))

    def __contains__(self, x) -> bool:
        return bool(self.contains(x)[0])
