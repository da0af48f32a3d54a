"""Per-run and aggregate safety/regret metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..optimizers import IterationRecord

__all__ = ["RunTrace", "RunMetrics", "AggregateRow", "MetricsSummary", "simple_regret", "compute_metrics"]


@dataclass(frozen=True)
class RunTrace:
    run_id: int
    algorithm: str
    function_id: int
    seed: int
    records: tuple[IterationRecord, ...]
    safe_optimum: float
    threshold: float


@dataclass(frozen=True)
class RunMetrics:
    run_id: int
    algorithm: str
    function_id: int
    seed: int
    violation_count: int
    first_violation_t: int  # -1 when the run never left the safe set
    simple_regret: np.ndarray


@dataclass(frozen=True)
class AggregateRow:
    algorithm: str
    function_id: str
    t: int
    mean_simple_regret: float
    std_simple_regret: float
    total_violations: int
    runs: int


@dataclass(frozen=True)
class MetricsSummary:
    runs: tuple[RunMetrics, ...]
    aggregates: tuple[AggregateRow, ...]

    def overall(self, algorithm: str) -> list[AggregateRow]:
        return [row for row in self.aggregates if row.algorithm == algorithm and row.function_id == "ALL"]


def simple_regret(trace: RunTrace) -> np.ndarray:
    """Safe optimum minus the best truly safe value queried up to each t.

    Before the first safe query the regret is ``safe_optimum - threshold``.
    """
    values = np.array([r.f_true if r.safe_actual else -np.inf for r in trace.records])
    best = np.maximum.accumulate(np.maximum(values, trace.threshold))
    return trace.safe_optimum - best


def compute_metrics(traces) -> MetricsSummary:
    """Per-run metrics plus mean/std (population) per function and over ALL runs."""
    traces = sorted(traces, key=lambda tr: tr.run_id)
    if not traces:
        raise ValueError("no traces")
    runs = []
    for tr in traces:
        unsafe = [r.t for r in tr.records if not r.safe_actual]
        runs.append(RunMetrics(tr.run_id, tr.algorithm, tr.function_id, tr.seed, len(unsafe),
                               unsafe[0] if unsafe else -1, simple_regret(tr)))

    algorithms = list(dict.fromkeys(m.algorithm for m in runs))
    rows = []
    for alg in algorithms:
        mine = [m for m in runs if m.algorithm == alg]
        groups = [(str(fid), [m for m in mine if m.function_id == fid])
                  for fid in sorted({m.function_id for m in mine})]
        groups.append(("ALL", mine))
        for label, group in groups:
            regret = np.vstack([m.simple_regret for m in group])
            mean, std = regret.mean(axis=0), regret.std(axis=0)
            violations = sum(m.violation_count for m in group)
            for t in range(regret.shape[1]):
                rows.append(AggregateRow(alg, label, t + 1, float(mean[t]), float(std[t]), violations, len(group)))
    return MetricsSummary(tuple(runs), tuple(rows))
