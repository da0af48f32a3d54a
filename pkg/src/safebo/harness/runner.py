"""
Batch experiments: every (algorithm, function, seed) run with ground-truth
instrumentation, the bound audit, and CSV export.

All randomness is derived from ``(master_seed, purpose, ids...)`` through
:class:`numpy.random.SeedSequence`, so results do not depend on the number
of worker processes or on scheduling order.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..bounds import ConstantBeta, LipschitzSafetyModel, RkhsNormBeta
from ..gp import Dataset, fit_posterior, predict
from ..optimizers import AlgorithmConfig, MultistartConfig, Variant, run_optimization
from ..safe_sets import ContinuousSafeSet, GridDomain, SafeSetState
from ..synth import (
    LIPSCHITZ_SAFETY_FACTOR,
    GaussianNoise,
    RkhsFunction,
    UniformNoise,
    choose_seed,
    lipschitz_oracle,
    noisy_eval,
    safety_threshold,
    sample_rkhs_function,
)
from .config import AlgorithmParams, ExperimentConfig, ExperimentKind, ScheduleParams, dump_config
from .metrics import MetricsSummary, RunTrace, compute_metrics

logger = logging.getLogger(__name__)

__all__ = [
    "InvariantError",
    "Problem",
    "BatchResult",
    "AuditRun",
    "AuditSummary",
    "make_function",
    "make_problem",
    "build_algorithm",
    "run_experiment_batch",
    "bound_audit",
    "write_batch",
    "write_audit",
    "RAW_COLUMNS",
    "AGGREGATE_COLUMNS",
]

RAW_COLUMNS = ["run_id", "algorithm", "function_id", "seed", "t", "x", "y_noisy", "f_true",
               "safe_actual", "safe_set_size", "beta_t", "acquisition_value"]
AGGREGATE_COLUMNS = ["algorithm", "function_id", "t", "mean_simple_regret", "std_simple_regret",
                     "total_violations", "runs"]

# purposes mixed into the seed sequences
_FUNCTION, _NOISE, _ALGORITHM, _AUDIT_DATA, _SEED_SET = range(5)
_MAX_RESAMPLES = 100


class InvariantError(RuntimeError):
    """A run broke a property the harness treats as guaranteed."""


def _seed(*ids) -> int:
    return int(np.random.SeedSequence([int(i) for i in ids]).generate_state(1)[0])


@dataclass(frozen=True)
class Problem:
    function_id: int
    function: RkhsFunction
    grid: GridDomain
    threshold: float
    seed_index: int
    lipschitz: float
    safe_optimum: float

    @property
    def seed_point(self) -> np.ndarray:
        return self.grid.points[self.seed_index]


def _grid(cfg: ExperimentConfig) -> GridDomain:
    fn = cfg.function
    return GridDomain(fn.lower, fn.upper, cfg.grid_points)


def make_function(cfg: ExperimentConfig, function_id: int, attempt: int = 0) -> RkhsFunction:
    """Ground truth with RKHS norm ``misspecification * norm_bound``."""
    fn = cfg.function
    return sample_rkhs_function(fn.kernel_spec(), fn.lower, fn.upper, fn.num_centers, fn.true_norm,
                                _seed(cfg.master_seed, _FUNCTION, function_id, attempt))


def make_problem(cfg: ExperimentConfig, function_id: int, function: RkhsFunction | None = None) -> Problem:
    """Threshold, seed, Lipschitz oracle and safe optimum for one function.

    Without an explicit ``function`` a new one is drawn, resampling while no
    grid point qualifies as a seed.
    """
    fn = cfg.function
    grid = _grid(cfg)
    rng = np.random.default_rng(_seed(cfg.master_seed, _SEED_SET, function_id))
    for attempt in range(_MAX_RESAMPLES):
        f = function if function is not None else make_function(cfg, function_id, attempt)
        values = f(grid.points)
        h = safety_threshold(values, fn.safe_quantile)
        seed = choose_seed(values, h, cfg.noise.bound, rng, fn.seed_margin) if values.max() >= h else None
        if seed is not None:
            break
        if function is not None:
            raise ValueError("no grid point of the given function qualifies as a safe seed")
    else:
        raise RuntimeError(f"function {function_id}: no admissible draw in {_MAX_RESAMPLES} attempts")
    lipschitz = lipschitz_oracle(f, fn.lower, fn.upper, fn.lipschitz_resolution or None)
    return Problem(function_id, f, grid, h, seed, lipschitz, float(values[values >= h].max()))


def _schedule(params: ScheduleParams, cfg: ExperimentConfig):
    if params.is_rkhs:
        scale = cfg.noise.bound if params.noise_scale < 0 else params.noise_scale
        return RkhsNormBeta(cfg.function.norm_bound, scale, params.delta)
    return ConstantBeta(float(params.beta))


def build_algorithm(cfg: ExperimentConfig, name: str, problem: Problem, rng_seed: int) -> AlgorithmConfig:
    p: AlgorithmParams = cfg.algorithms[name]
    lipschitz = problem.lipschitz if p.lipschitz == "oracle" else float(p.lipschitz)
    noise_bound = cfg.noise.bound if p.noise_bound < 0 else p.noise_bound
    return AlgorithmConfig(
        variant=Variant(p.variant),
        kernel=cfg.function.kernel_spec(),
        lam=cfg.lam if p.lam < 0 else p.lam,
        schedule=_schedule(p.schedule(), cfg),
        safety=LipschitzSafetyModel(lipschitz, noise_bound),
        threshold=problem.threshold,
        budget=cfg.budget,
        multistart=MultistartConfig(p.num_starts, p.max_iters, p.step_init),
        rng_seed=rng_seed,
    )


def _guaranteed_safe(cfg: ExperimentConfig, name: str) -> bool:
    """Whether the run's Lipschitz certificate is valid by construction."""
    p = cfg.algorithms[name]
    e = cfg.noise.bound if p.noise_bound < 0 else p.noise_bound
    return (Variant(p.variant).lipschitz_certified and p.lipschitz == "oracle"
            and cfg.noise.kind == "uniform" and e >= cfg.noise.bound)


def _noise(cfg: ExperimentConfig, function_id: int, seed: int):
    rng = np.random.default_rng(_seed(cfg.master_seed, _NOISE, function_id, seed))
    if cfg.noise.kind == "uniform":
        return UniformNoise(cfg.noise.bound, rng)
    return GaussianNoise(cfg.noise.bound, rng)


def _execute_run(job) -> RunTrace:
    cfg, name, alg_index, problem, seed, run_id = job
    algo = build_algorithm(cfg, name, problem, _seed(cfg.master_seed, _ALGORITHM, problem.function_id, seed, alg_index))
    if algo.variant.continuous:
        fn = cfg.function
        state = ContinuousSafeSet(fn.lower, fn.upper, problem.seed_point, problem.threshold, algo.safety)
    else:
        state = SafeSetState(problem.grid, [problem.seed_index], problem.threshold)
    noise = _noise(cfg, problem.function_id, seed)
    f = problem.function
    records = run_optimization(algo, state, lambda x: noisy_eval(f, noise, x), f)
    if _guaranteed_safe(cfg, name):
        bad = [r.t for r in records if not r.safe_actual]
        if bad:
            raise InvariantError(
                f"{name} ({algo.variant.value}) queried an unsafe point at t={bad[0]} "
                f"(function {problem.function_id}, seed {seed})"
            )
    return RunTrace(run_id, name, problem.function_id, seed, tuple(records), problem.safe_optimum, problem.threshold)


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _make_problem_job(job):
    cfg, fid, function = job
    return make_problem(cfg, fid, function)


@dataclass(frozen=True)
class BatchResult:
    config: ExperimentConfig
    problems: tuple[Problem, ...]
    traces: tuple[RunTrace, ...]
    summary: MetricsSummary


def run_experiment_batch(cfg: ExperimentConfig, jobs: int = 1, functions=None) -> BatchResult:
    """Run every (algorithm, function, seed) combination.

    ``functions`` optionally replaces the random draws with given ground
    truths (used by replay). Run ids enumerate algorithms, then functions,
    then seeds.
    """
    if cfg.kind is ExperimentKind.BOUND_AUDIT:
        raise ValueError("use bound_audit for BoundAudit configs")
    fids = range(cfg.num_functions if functions is None else len(functions))
    problems = _map(_make_problem_job,
                    [(cfg, fid, None if functions is None else functions[fid]) for fid in fids], jobs)
    work = []
    for a, name in enumerate(cfg.algorithms):
        for problem in problems:
            for seed in range(cfg.num_seeds):
                run_id = (a * len(problems) + problem.function_id) * cfg.num_seeds + seed
                work.append((cfg, name, a, problem, seed, run_id))
    traces = sorted(_map(_execute_run, work, jobs), key=lambda tr: tr.run_id)
    return BatchResult(cfg, tuple(problems), tuple(traces), compute_metrics(traces))


def _num(v: float) -> str:
    return repr(float(v))


def raw_rows(traces):
    for tr in traces:
        for r in tr.records:
            yield [tr.run_id, tr.algorithm, tr.function_id, tr.seed, r.t,
                   ";".join(f"{v:.17g}" for v in r.x), _num(r.y), _num(r.f_true), int(r.safe_actual),
                   r.safe_set_size, _num(r.beta), _num(r.acquisition_value)]


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def write_batch(result: BatchResult, out: Path, plots: bool = True) -> list[Path]:
    """Write CSVs, function records, normalized config and (optionally) SVG plots."""
    out = Path(out)
    (out / "functions").mkdir(parents=True, exist_ok=True)
    cfg = result.config
    written = [out / "raw_traces.csv", out / "aggregate.csv", out / "functions.csv", out / "config.ini"]
    _write_csv(written[0], RAW_COLUMNS, raw_rows(result.traces))
    _write_csv(written[1], AGGREGATE_COLUMNS, (
        [r.algorithm, r.function_id, r.t, _num(r.mean_simple_regret), _num(r.std_simple_regret),
         r.total_violations, r.runs] for r in result.summary.aggregates))
    _write_csv(written[2], ["function_id", "true_norm", "assumed_norm", "threshold", "lipschitz",
                            "lipschitz_safety_factor", "seed_x", "safe_optimum"], (
        [p.function_id, _num(cfg.function.true_norm), _num(cfg.function.norm_bound), _num(p.threshold),
         _num(p.lipschitz), _num(LIPSCHITZ_SAFETY_FACTOR), ";".join(f"{v:.17g}" for v in p.seed_point),
         _num(p.safe_optimum)] for p in result.problems))
    written[3].write_text(dump_config(cfg))
    for p in result.problems:
        path = out / "functions" / f"function_{p.function_id:03d}.txt"
        path.write_text(p.function.to_record({"function_id": p.function_id, "threshold": _num(p.threshold)}))
        written.append(path)
    if plots:
        from .plots import render_plots

        written += render_plots(result.summary, result.traces, out, result.problems, cfg)
    return written


@dataclass(frozen=True)
class AuditRun:
    schedule: str
    function_id: int
    seed: int
    beta: float
    violation_fraction: float

    @property
    def any_violation(self) -> bool:
        return self.violation_fraction > 0


@dataclass(frozen=True)
class AuditSummary:
    config: ExperimentConfig
    runs: tuple[AuditRun, ...]

    def schedules(self) -> list[str]:
        return list(dict.fromkeys(r.schedule for r in self.runs))

    def run_violation_frequency(self, schedule: str) -> float:
        mine = [r for r in self.runs if r.schedule == schedule]
        return sum(r.any_violation for r in mine) / len(mine)

    def rows(self):
        for name in self.schedules():
            mine = [r for r in self.runs if r.schedule == name]
            frac = np.array([r.violation_fraction for r in mine])
            yield [name, len(mine), sum(r.any_violation for r in mine), _num(self.run_violation_frequency(name)),
                   _num(frac.mean()), _num(frac.std())]


def _audit_job(job):
    cfg, fid, seed = job
    fn = cfg.function
    f = make_function(cfg, fid)
    rng = np.random.default_rng(_seed(cfg.master_seed, _AUDIT_DATA, fid, seed))
    noise = UniformNoise(cfg.noise.bound, rng) if cfg.noise.kind == "uniform" else GaussianNoise(cfg.noise.bound, rng)
    x = rng.uniform(fn.lower, fn.upper, size=(cfg.audit_points, fn.dim))
    y = np.array([noisy_eval(f, noise, xi) for xi in x])
    post = fit_posterior(fn.kernel_spec(), Dataset(fn.lower, fn.upper, x, y), cfg.lam)
    pts = _grid(cfg).points
    mean, std = predict(post, pts)
    err = np.abs(f(pts) - mean)
    runs = []
    for name, params in cfg.schedules.items():
        beta = _schedule(params, cfg)(post)
        runs.append(AuditRun(name, fid, seed, beta, float(np.mean(err > beta * std))))
    return runs


def bound_audit(cfg: ExperimentConfig, jobs: int = 1) -> AuditSummary:
    """Fraction of grid points where ``|f - mu| > beta sigma`` for every schedule.

    One run per (function, seed): a random dataset of ``audit_points`` noisy
    observations is drawn and the GP refit.
    """
    if cfg.kind is not ExperimentKind.BOUND_AUDIT:
        raise ValueError("bound_audit needs a BoundAudit config")
    work = [(cfg, fid, seed) for fid in range(cfg.num_functions) for seed in range(cfg.num_seeds)]
    runs = [r for batch in _map(_audit_job, work, jobs) for r in batch]
    order = {name: i for i, name in enumerate(cfg.schedules)}
    runs.sort(key=lambda r: (order[r.schedule], r.function_id, r.seed))
    return AuditSummary(cfg, tuple(runs))


def write_audit(summary: AuditSummary, out: Path) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "audit_runs.csv", out / "audit_summary.csv", out / "config.ini"]
    _write_csv(paths[0], ["schedule", "function_id", "seed", "beta", "violation_fraction", "any_violation"], (
        [r.schedule, r.function_id, r.seed, _num(r.beta), _num(r.violation_fraction), int(r.any_violation)]
        for r in summary.runs))
    _write_csv(paths[1], ["schedule", "runs", "runs_with_violation", "violation_run_frequency",
                          "mean_violation_fraction", "std_violation_fraction"], summary.rows())
    paths[2].write_text(dump_config(summary.config))
    return paths
