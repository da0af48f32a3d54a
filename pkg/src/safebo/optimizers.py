"""
Safe BO loops: SafeOpt with a heuristic or RKHS-based scaling factor, LoSBO
and the grid-free LoS-GP-UCB, plus the multistart local search used for the
latter's acquisition problem.

``RandomSafe`` is a baseline sharing LoSBO's safe sets but picking a uniformly
random safe grid point at each step.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .bounds import ConstantBeta, LipschitzSafetyModel, RkhsNormBeta, gp_bounds, lipschitz_lower_envelope
from .gp import Dataset, GpPosterior, KernelSpec, add_observation, fit_posterior, predict
from .safe_sets import (
    ContinuousSafeSet,
    InvalidStateError,
    SafeSetState,
    expander_set,
    maximizer_set,
    update_safe_set_gp,
    update_safe_set_lipschitz,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Variant",
    "MultistartConfig",
    "AlgorithmConfig",
    "IterationRecord",
    "Step",
    "step_safeopt_family",
    "step_los_gp_ucb",
    "generate_starts",
    "multistart_search",
    "run_optimization",
]


class Variant(str, enum.Enum):
    SAFEOPT_HEURISTIC = "SafeOptHeuristic"
    REAL_BETA_SAFEOPT = "RealBetaSafeOpt"
    LOSBO = "LoSBO"
    LOS_GP_UCB = "LoSGpUcb"
    RANDOM_SAFE = "RandomSafe"

    @property
    def lipschitz_certified(self) -> bool:
        return self in (Variant.LOSBO, Variant.LOS_GP_UCB, Variant.RANDOM_SAFE)

    @property
    def continuous(self) -> bool:
        return self is Variant.LOS_GP_UCB


@dataclass(frozen=True)
class MultistartConfig:
    """Local search settings; ``step_init`` is a fraction of each box side."""

    num_starts: int = 20
    max_iters: int = 50
    step_init: float = 0.1

    def __post_init__(self):
        if self.num_starts < 1 or self.max_iters < 1 or not self.step_init > 0:
            raise ValueError("num_starts, max_iters and step_init must be positive")


@dataclass(frozen=True)
class AlgorithmConfig:
    variant: Variant
    kernel: KernelSpec
    lam: float
    schedule: ConstantBeta | RkhsNormBeta
    safety: LipschitzSafetyModel
    threshold: float
    budget: int
    multistart: MultistartConfig = field(default_factory=MultistartConfig)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if not self.lam > 0:
            raise ValueError("regularizer must be positive")
        if self.safety is None:
            raise ValueError(f"{self.variant.value} needs a Lipschitz bound")
        if self.variant is Variant.REAL_BETA_SAFEOPT and not isinstance(self.schedule, RkhsNormBeta):
            raise ValueError("RealBetaSafeOpt needs an RKHS-norm-based schedule")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    x: np.ndarray
    y: float
    f_true: float
    safe_actual: bool
    safe_set_size: int
    acquisition_value: float
    beta: float


class Step(NamedTuple):
    x: np.ndarray
    state: object
    beta: float
    acquisition: float
    index: int = -1
    degenerate: bool = False


def step_safeopt_family(config: AlgorithmConfig, state: SafeSetState, post: GpPosterior,
                        rng: np.random.Generator | None = None) -> Step:
    """One grid step: update the safe set, then pick the widest interval in M u G.

    SafeOpt variants certify safety with the GP lower bound; LoSBO (and the
    random baseline) with the Lipschitz envelope. Ties go to the lowest grid
    index.
    """
    variant = config.variant
    model = config.safety
    if variant.lipschitz_certified:
        state = update_safe_set_lipschitz(state, post.data, model)
    else:
        state = update_safe_set_gp(state, post, config.schedule, model.lipschitz)
    beta = config.schedule(post)
    safe = state.safe_indices

    if variant is Variant.RANDOM_SAFE:
        if rng is None:
            raise ValueError("RandomSafe needs an rng")
        idx = int(rng.choice(safe))
        return Step(state.grid.points[idx], state, beta, float("nan"), idx)

    lower, upper = gp_bounds(post, beta, state.grid.points)
    noise = model.noise_bound if variant.lipschitz_certified else 0.0
    cand = np.union1d(maximizer_set(state, lower, upper), expander_set(state, upper, model.lipschitz, noise))
    degenerate = cand.size == 0
    if degenerate:
        logger.info("empty maximizer and expander sets; falling back to the whole safe set")
        cand = safe
    width = upper[cand] - lower[cand]
    pos = int(np.argmax(width))
    idx = int(cand[pos])
    return Step(state.grid.points[idx], state, beta, float(width[pos]), idx, degenerate)


def multistart_search(objective: Callable, feasible: Callable, starts, lower, upper,
                      max_iters: int = 50, step_init: float = 0.1, tol: float = 1e-7):
    """Feasibility-preserving coordinate ascent from several starts.

    ``objective`` and ``feasible`` take a batch of points of shape (k, d) and
    return arrays of length k. Every start moves independently: each
    iteration probes ``+-step`` along every axis (clipped to the box), keeps
    the best feasible improvement, and halves the step of starts that did
    not improve. Steps are fractions of the box sides. Infeasible starts are
    dropped; ties between starts go to the earliest one.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    width = upper - lower
    x = np.asarray(starts, dtype=float).reshape(-1, lower.size)
    x = x[np.asarray(feasible(x), dtype=bool)]
    if x.shape[0] == 0:
        raise ValueError("no feasible start")
    x = x.copy()
    vals = np.asarray(objective(x), dtype=float)
    step = np.full(x.shape[0], float(step_init))
    for _ in range(max_iters):
        active = step > tol
        if not active.any():
            break
        improved = np.zeros(x.shape[0], dtype=bool)
        for axis in range(lower.size):
            best_x, best_v = x, vals
            for sign in (1.0, -1.0):
                cand = x.copy()
                cand[:, axis] = np.clip(cand[:, axis] + sign * step * width[axis], lower[axis], upper[axis])
                cv = np.asarray(objective(cand), dtype=float)
                ok = active & (cv > best_v) & np.asarray(feasible(cand), dtype=bool)
                best_x = np.where(ok[:, None], cand, best_x)
                best_v = np.where(ok, cv, best_v)
                improved |= ok
            x, vals = best_x, best_v
        step = np.where(improved, step, step / 2)
    best = int(np.argmax(vals))
    return x[best].copy()


def generate_starts(safe: ContinuousSafeSet, num_starts: int, rng: np.random.Generator,
                    top_k: int = 3, radius_fraction: float = 0.1) -> np.ndarray:
    """Feasible starting points for the local search.

    Seeds first, then random perturbations (radius ``radius_fraction`` of the
    box diagonal) around the ``top_k`` observed inputs with the highest
    envelope, then uniform draws; candidates failing the membership test are
    discarded.
    """
    lower, upper = safe.lower, safe.upper
    d = lower.size
    radius = radius_fraction * float(np.linalg.norm(upper - lower))
    parts = [safe.seeds]
    data = safe.data
    n_perturb = num_starts // 2
    if len(data):
        env = lipschitz_lower_envelope(data, safe.model, data.inputs)
        order = np.argsort(-env, kind="stable")[:top_k]
        centers = data.inputs[order][rng.integers(0, order.size, size=n_perturb)]
        direction = rng.standard_normal((n_perturb, d))
        direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
        r = radius * rng.uniform(0.0, 1.0, size=(n_perturb, 1)) ** (1.0 / d)
        perturbed = np.clip(centers + r * direction, lower, upper)
        parts.append(perturbed[safe.contains(perturbed)])
    have = sum(p.shape[0] for p in parts)
    if have < num_starts:
        uniform = rng.uniform(lower, upper, size=(10 * num_starts, d))
        parts.append(uniform[safe.contains(uniform)][: num_starts - have])
    return np.vstack(parts)


def step_los_gp_ucb(config: AlgorithmConfig, safe: ContinuousSafeSet, post: GpPosterior,
                    rng: np.random.Generator) -> Step:
    """Maximize ``mu + beta sigma`` over the Lipschitz-certified region.

    The returned point is re-checked against the exact membership predicate.
    """
    safe = update_safe_set_lipschitz(safe, post.data, config.safety)
    beta = config.schedule(post)

    def ucb(x):
        mean, std = predict(post, x)
        return mean + beta * std

    starts = generate_starts(safe, config.multistart.num_starts, rng)
    ms = config.multistart
    x = multistart_search(ucb, safe.contains, starts, safe.lower, safe.upper, ms.max_iters, ms.step_init)
    if not safe.contains(x)[0]:
        raise InvalidStateError(f"local search returned an uncertified point {x}")
    return Step(x, safe, beta, float(ucb(x[None, :])[0]))


def run_optimization(config: AlgorithmConfig, initial_state, oracle: Callable,
                     truth: Callable | None = None) -> list[IterationRecord]:
    """Run ``config.budget`` iterations and return the per-iteration trace.

    ``initial_state`` is a :class:`SafeSetState` for grid variants or a
    :class:`ContinuousSafeSet` for LoS-GP-UCB. ``truth`` (noise-free target)
    is only used for bookkeeping; when given, the seeds are checked to be
    actually safe before anything runs.
    """
    continuous = config.variant.continuous
    if continuous != isinstance(initial_state, ContinuousSafeSet):
        raise ValueError(f"{config.variant.value} got the wrong kind of safe-set state")
    h = config.threshold
    if continuous:
        lower, upper, seeds = initial_state.lower, initial_state.upper, initial_state.seeds
    else:
        grid = initial_state.grid
        lower, upper = grid.lower, grid.upper
        seeds = grid.points[list(initial_state.seeds)]
    if truth is not None:
        seed_values = np.array([truth(s) for s in seeds])
        if np.any(seed_values < h):
            raise ValueError("seed set contains points that are not safe under the truth")

    rng = np.random.default_rng(config.rng_seed)
    post = fit_posterior(config.kernel, Dataset(lower, upper), config.lam)
    state = initial_state
    records = []
    for t in range(1, config.budget + 1):
        if continuous:
            step = step_los_gp_ucb(config, state, post, rng)
            size = -1
        else:
            step = step_safeopt_family(config, state, post, rng)
            size = step.state.size
        state = step.state
        x = np.array(step.x, dtype=float)
        y = float(oracle(x))
        f_true = float(truth(x)) if truth is not None else float("nan")
        records.append(IterationRecord(t, x, y, f_true, bool(f_true >= h), size, step.acquisition, step.beta))
        post = add_observation(post, x, y)
    return records
