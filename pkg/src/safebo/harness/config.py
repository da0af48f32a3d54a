"""
Experiment configuration files.

The format is INI (``key = value`` inside ``[section]`` headers) read with
:mod:`configparser`. Algorithms live in ``[algorithm.<name>]`` sections and
audit schedules in ``[schedule.<name>]`` sections. Unknown sections or keys
are errors.
"""

from __future__ import annotations

import configparser
import enum
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..gp import KernelFamily, KernelSpec
from ..optimizers import Variant

__all__ = [
    "ConfigError",
    "ExperimentKind",
    "FunctionParams",
    "NoiseParams",
    "ScheduleParams",
    "AlgorithmParams",
    "ExperimentConfig",
    "parse_config",
    "parse_config_text",
    "dump_config",
]


class ConfigError(ValueError):
    pass


class ExperimentKind(str, enum.Enum):
    BOUND_AUDIT = "BoundAudit"
    SAFEOPT_COMPARISON = "SafeOptComparison"
    LOS_GP_UCB_BENCH = "LosGpUcbBench"


@dataclass(frozen=True)
class FunctionParams:
    kernel: str = "SquaredExponential"
    lengthscale: float = 0.2
    signal_variance: float = 1.0
    num_centers: int = 30
    norm_bound: float = 2.0
    misspecification: float = 1.0
    lower: tuple[float, ...] = (0.0,)
    upper: tuple[float, ...] = (1.0,)
    safe_quantile: float = 0.3
    seed_margin: float = 0.05
    lipschitz_resolution: int = 0

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def true_norm(self) -> float:
        return self.misspecification * self.norm_bound

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, self.lengthscale, self.signal_variance)


@dataclass(frozen=True)
class NoiseParams:
    kind: str = "uniform"
    bound: float = 0.1


@dataclass(frozen=True)
class ScheduleParams:
    """``beta`` is a positive number (constant schedule) or ``rkhs``."""

    beta: str = "2.0"
    delta: float = 0.05
    noise_scale: float = -1.0  # negative: use the noise bound

    @property
    def is_rkhs(self) -> bool:
        return self.beta == "rkhs"


@dataclass(frozen=True)
class AlgorithmParams:
    variant: str = "LoSBO"
    beta: str = "2.0"
    delta: float = 0.05
    noise_scale: float = -1.0
    lam: float = -1.0  # negative: use [gp] lam
    lipschitz: str = "oracle"
    noise_bound: float = -1.0  # negative: use the noise bound
    num_starts: int = 20
    max_iters: int = 50
    step_init: float = 0.1

    def schedule(self) -> ScheduleParams:
        return ScheduleParams(self.beta, self.delta, self.noise_scale)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind = ExperimentKind.SAFEOPT_COMPARISON
    num_functions: int = 1
    num_seeds: int = 1
    master_seed: int = 0
    budget: int = 30
    output_dir: str = "results"
    function: FunctionParams = field(default_factory=FunctionParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    grid_points: int = 200
    lam: float = 0.01
    audit_points: int = 20
    algorithms: dict = field(default_factory=dict)
    schedules: dict = field(default_factory=dict)


_SECTION_KEYS = {
    "experiment": {"kind", "num_functions", "num_seeds", "master_seed", "budget", "output_dir"},
    "function": set(FunctionParams.__dataclass_fields__),
    "noise": set(NoiseParams.__dataclass_fields__),
    "grid": {"points_per_dim"},
    "gp": {"lam"},
    "audit": {"num_points"},
}
_ALGORITHM_KEYS = set(AlgorithmParams.__dataclass_fields__)
_SCHEDULE_KEYS = set(ScheduleParams.__dataclass_fields__)


def _line_index(text: str) -> dict:
    """Map (section, key) -> 1-based line number."""
    where, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
        where.setdefault((section, key), no)
    return where


class _Reader:
    def __init__(self, parser, lines, source):
        self.parser, self.lines, self.source = parser, lines, source

    def fail(self, section, key, message):
        no = self.lines.get((section, key)) or self.lines.get((section, None))
        at = f"{self.source}, line {no}" if no else self.source
        raise ConfigError(f"{at}: [{section}] {message}")

    def get(self, section, key, conv, default):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        try:
            return conv(raw)
        except (TypeError, ValueError) as err:
            self.fail(section, key, f"bad value for '{key}': {raw!r} ({err})")


def _floats(raw: str) -> tuple[float, ...]:
    values = tuple(float(v) for v in re.split(r"[,\s]+", raw.strip()) if v)
    if not values:
        raise ValueError("empty list")
    return values


def _beta(raw: str) -> str:
    if raw.lower() == "rkhs":
        return "rkhs"
    value = float(raw)
    if not value > 0:
        raise ValueError("constant beta must be positive")
    return repr(value)


def _lipschitz(raw: str) -> str:
    if raw.lower() == "oracle":
        return "oracle"
    value = float(raw)
    if not value > 0:
        raise ValueError("Lipschitz bound must be positive")
    return repr(value)


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"{source}: {err}") from err
    r = _Reader(parser, _line_index(text), source)

    for section in parser.sections():
        allowed = _SECTION_KEYS.get(section)
        if allowed is None:
            if section.startswith("algorithm."):
                allowed = _ALGORITHM_KEYS
            elif section.startswith("schedule."):
                allowed = _SCHEDULE_KEYS
            else:
                r.fail(section, None, f"unknown section '{section}'")
        for key in parser.options(section):
            if key not in allowed:
                r.fail(section, key, f"unknown key '{key}'")

    d = ExperimentConfig()
    e = "experiment"
    kind = r.get(e, "kind", ExperimentKind, d.kind)
    num_functions = r.get(e, "num_functions", int, d.num_functions)
    num_seeds = r.get(e, "num_seeds", int, d.num_seeds)
    budget = r.get(e, "budget", int, d.budget)
    for key, value in (("num_functions", num_functions), ("num_seeds", num_seeds), ("budget", budget)):
        if value < 1:
            r.fail(e, key, f"'{key}' must be at least 1")

    fd = FunctionParams()
    s = "function"
    fn = FunctionParams(
        kernel=r.get(s, "kernel", lambda v: KernelFamily(v).value, fd.kernel),
        lengthscale=r.get(s, "lengthscale", float, fd.lengthscale),
        signal_variance=r.get(s, "signal_variance", float, fd.signal_variance),
        num_centers=r.get(s, "num_centers", int, fd.num_centers),
        norm_bound=r.get(s, "norm_bound", float, fd.norm_bound),
        misspecification=r.get(s, "misspecification", float, fd.misspecification),
        lower=r.get(s, "lower", _floats, fd.lower),
        upper=r.get(s, "upper", _floats, fd.upper),
        safe_quantile=r.get(s, "safe_quantile", float, fd.safe_quantile),
        seed_margin=r.get(s, "seed_margin", float, fd.seed_margin),
        lipschitz_resolution=r.get(s, "lipschitz_resolution", int, fd.lipschitz_resolution),
    )
    if fn.misspecification < 1:
        r.fail(s, "misspecification", "misspecification factor must be >= 1")
    if len(fn.lower) != len(fn.upper) or any(lo >= hi for lo, hi in zip(fn.lower, fn.upper)):
        r.fail(s, "upper", "lower/upper must have equal length and lower < upper")
    for key in ("lengthscale", "signal_variance", "norm_bound"):
        if not getattr(fn, key) > 0:
            r.fail(s, key, f"'{key}' must be positive")
    if fn.num_centers < 1:
        r.fail(s, "num_centers", "'num_centers' must be at least 1")
    if not 0 <= fn.safe_quantile < 1:
        r.fail(s, "safe_quantile", "'safe_quantile' must lie in [0, 1)")

    noise = NoiseParams(
        kind=r.get("noise", "kind", str, NoiseParams.kind),
        bound=r.get("noise", "bound", float, NoiseParams.bound),
    )
    if noise.kind not in ("uniform", "gaussian"):
        r.fail("noise", "kind", "noise kind must be 'uniform' or 'gaussian'")
    if noise.bound < 0:
        r.fail("noise", "bound", "noise bound must be non-negative")

    lam = r.get("gp", "lam", float, d.lam)
    if not lam > 0:
        r.fail("gp", "lam", "'lam' must be positive")
    grid_points = r.get("grid", "points_per_dim", int, d.grid_points)
    if grid_points < 2:
        r.fail("grid", "points_per_dim", "'points_per_dim' must be at least 2")

    algorithms = {}
    schedules = {}
    for section in parser.sections():
        name = section.split(".", 1)[-1]
        if section.startswith("algorithm."):
            a = AlgorithmParams()
            algorithms[name] = AlgorithmParams(
                variant=r.get(section, "variant", lambda v: Variant(v).value, a.variant),
                beta=r.get(section, "beta", _beta, a.beta),
                delta=r.get(section, "delta", float, a.delta),
                noise_scale=r.get(section, "noise_scale", float, a.noise_scale),
                lam=r.get(section, "lam", float, a.lam),
                lipschitz=r.get(section, "lipschitz", _lipschitz, a.lipschitz),
                noise_bound=r.get(section, "noise_bound", float, a.noise_bound),
                num_starts=r.get(section, "num_starts", int, a.num_starts),
                max_iters=r.get(section, "max_iters", int, a.max_iters),
                step_init=r.get(section, "step_init", float, a.step_init),
            )
            alg = algorithms[name]
            if alg.variant == Variant.REAL_BETA_SAFEOPT.value and alg.beta != "rkhs":
                r.fail(section, "beta", "RealBetaSafeOpt requires beta = rkhs")
            if not 0 < alg.delta < 1:
                r.fail(section, "delta", "'delta' must lie in (0, 1)")
            if alg.num_starts < 1 or alg.max_iters < 1 or not alg.step_init > 0:
                r.fail(section, None, "multistart settings must be positive")
        elif section.startswith("schedule."):
            sp = ScheduleParams()
            schedules[name] = ScheduleParams(
                beta=r.get(section, "beta", _beta, sp.beta),
                delta=r.get(section, "delta", float, sp.delta),
                noise_scale=r.get(section, "noise_scale", float, sp.noise_scale),
            )
            if not 0 < schedules[name].delta < 1:
                r.fail(section, "delta", "'delta' must lie in (0, 1)")

    if kind is ExperimentKind.BOUND_AUDIT:
        if not schedules:
            r.fail(e, "kind", "BoundAudit needs at least one [schedule.<name>] section")
    elif not algorithms:
        r.fail(e, "kind", f"{kind.value} needs at least one [algorithm.<name>] section")

    return ExperimentConfig(
        kind=kind,
        num_functions=num_functions,
        num_seeds=num_seeds,
        master_seed=r.get(e, "master_seed", int, d.master_seed),
        budget=budget,
        output_dir=r.get(e, "output_dir", str, d.output_dir),
        function=fn,
        noise=noise,
        grid_points=grid_points,
        lam=lam,
        audit_points=r.get("audit", "num_points", int, d.audit_points),
        algorithms=algorithms,
        schedules=schedules,
    )


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config_text(text, str(path))


def _fmt(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Normalized INI text with every default spelled out."""
    out = ["[experiment]"]
    for key in ("kind", "num_functions", "num_seeds", "master_seed", "budget", "output_dir"):
        out.append(f"{key} = {_fmt(getattr(cfg, key))}")
    out += ["", "[function]"]
    out += [f"{k} = {_fmt(v)}" for k, v in asdict(cfg.function).items()]
    out += ["", "[noise]"] + [f"{k} = {_fmt(v)}" for k, v in asdict(cfg.noise).items()]
    out += ["", "[grid]", f"points_per_dim = {cfg.grid_points}"]
    out += ["", "[gp]", f"lam = {_fmt(cfg.lam)}"]
    out += ["", "[audit]", f"num_points = {cfg.audit_points}"]
    for name, alg in cfg.algorithms.items():
        out += ["", f"[algorithm.{name}]"] + [f"{k} = {_fmt(v)}" for k, v in asdict(alg).items()]
    for name, sched in cfg.schedules.items():
        out += ["", f"[schedule.{name}]"] + [f"{k} = {_fmt(v)}" for k, v in asdict(sched).items()]
    return "\n".join(out) + "\n"
