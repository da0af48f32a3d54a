"""Experiment orchestration: configs, batch runs, audits, CSV and SVG output."""

from .config import ConfigError, ExperimentConfig, ExperimentKind, dump_config, parse_config, parse_config_text
from .metrics import MetricsSummary, RunTrace, compute_metrics, simple_regret
from .plots import render_plots
from .runner import (
    AuditSummary,
    BatchResult,
    InvariantError,
    bound_audit,
    make_problem,
    run_experiment_batch,
    write_audit,
    write_batch,
)
