"""
Synthetic ground truth: finite kernel expansions with exact RKHS norms,
a finite-difference Lipschitz oracle and bounded/unbounded noise models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp import KernelSpec, kernel_matrix

__all__ = [
    "RkhsFunction",
    "UniformNoise",
    "GaussianNoise",
    "sample_rkhs_function",
    "rkhs_norm",
    "lipschitz_oracle",
    "noisy_eval",
    "safety_threshold",
    "choose_seed",
    "LIPSCHITZ_SAFETY_FACTOR",
]

LIPSCHITZ_SAFETY_FACTOR = 1.1
_DEFAULT_RESOLUTION = {1: 10_000, 2: 500, 3: 60}


@dataclass(frozen=True)
class RkhsFunction:
    """``f(x) = sum_i a_i k(x, z_i)``."""

    kernel: KernelSpec
    centers: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        # contiguous copies keep evaluation bit-identical however the arrays were built
        a = np.array(self.coefficients, dtype=float).reshape(-1)
        z = np.array(self.centers, dtype=float, order="C").reshape(a.size, -1)
        z.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "centers", z)
        object.__setattr__(self, "coefficients", a)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1 and x.size == self.dim
        values = kernel_matrix(self.kernel, x.reshape(-1, self.dim), self.centers) @ self.coefficients
        return float(values[0]) if single else values

    def scaled(self, s: float) -> RkhsFunction:
        return RkhsFunction(self.kernel, self.centers, s * self.coefficients)

    def to_record(self, metadata: dict | None = None) -> str:
        """Plain-text record: kernel line, then one ``center... coefficient`` line per term.

        ``metadata`` entries are written as leading ``#`` comment lines.
        """
        k = self.kernel
        ls = k.lengthscale if k.isotropic else ";".join(f"{v:.17g}" for v in k.lengthscale)
        if k.isotropic:
            ls = f"{ls:.17g}"
        lines = [f"# {key} = {value}" for key, value in (metadata or {}).items()]
        lines.append(f"kernel {k.family.value} lengthscale={ls} signal_variance={k.signal_variance:.17g}")
        for z, a in zip(self.centers, self.coefficients):
            lines.append(" ".join(f"{v:.17g}" for v in (*z, a)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_record(cls, text: str) -> RkhsFunction:
        rows = [ln.strip() for ln in text.splitlines()]
        rows = [ln for ln in rows if ln and not ln.startswith("#")]
        if not rows or not rows[0].startswith("kernel "):
            raise ValueError("function record must start with a 'kernel' line")
        parts = rows[0].split()
        opts = dict(p.split("=", 1) for p in parts[2:])
        ls = [float(v) for v in opts["lengthscale"].split(";")]
        kernel = KernelSpec(parts[1], ls[0] if len(ls) == 1 else tuple(ls), float(opts["signal_variance"]))
        body = np.array([[float(v) for v in ln.split()] for ln in rows[1:]])
        if body.ndim != 2 or body.shape[1] < 2:
            raise ValueError("malformed center/coefficient lines")
        return cls(kernel, body[:, :-1], body[:, -1])


def rkhs_norm(f: RkhsFunction) -> float:
    """``sqrt(a^T K_z a)``."""
    gram = kernel_matrix(f.kernel, f.centers, f.centers)
    return float(np.sqrt(max(0.0, f.coefficients @ gram @ f.coefficients)))


def sample_rkhs_function(kernel: KernelSpec, lower, upper, m: int, target_norm: float, seed) -> RkhsFunction:
    """Random kernel expansion with ``m`` centers rescaled to RKHS norm ``target_norm``."""
    if m < 1:
        raise ValueError("need at least one center")
    if not target_norm > 0:
        raise ValueError("target norm must be positive")
    rng = np.random.default_rng(seed)
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    centers = rng.uniform(lower, upper, size=(m, lower.size))
    coeffs = rng.standard_normal(m)
    for _ in range(5):
        norm = rkhs_norm(RkhsFunction(kernel, centers, coeffs))
        duplicated = len(np.unique(centers, axis=0)) < m
        if norm > 1e-12 and not duplicated:
            return RkhsFunction(kernel, centers, coeffs * (target_norm / norm))
        centers = np.clip(centers + 1e-6 * (upper - lower) * rng.standard_normal(centers.shape), lower, upper)
        coeffs = rng.standard_normal(m)
    raise ValueError("could not draw a non-degenerate kernel expansion")


def _axes(lower, upper, resolution):
    return [np.linspace(lo, hi, resolution) for lo, hi in zip(lower, upper)]


def lipschitz_oracle(f: RkhsFunction, lower, upper, resolution: int | None = None,
                     safety_factor: float = LIPSCHITZ_SAFETY_FACTOR) -> float:
    """Largest finite-difference slope on a fine grid, times ``safety_factor``.

    In more than one dimension forward differences along every axis are
    combined into a gradient-norm estimate per grid cell. The result is an
    estimate, reliable for the smooth kernels used here.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.size
    res = resolution or _DEFAULT_RESOLUTION.get(d, 20)
    axes = _axes(lower, upper, res)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    values = f(pts).reshape((res,) * d)
    trim = tuple(slice(0, res - 1) for _ in range(d))
    sq = np.zeros((res - 1,) * d)
    for axis, ax in enumerate(axes):
        step = ax[1] - ax[0]
        if step > 0:
            sq += (np.diff(values, axis=axis)[trim] / step) ** 2
    return float(safety_factor * np.sqrt(sq.max()))


@dataclass
class UniformNoise:
    """Noise uniform on ``[-bound, bound]``; the stream lives in ``rng``."""

    bound: float
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def draw(self) -> float:
        if self.bound == 0:
            return 0.0
        return float(self.rng.uniform(-self.bound, self.bound))


@dataclass
class GaussianNoise:
    std: float
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def draw(self) -> float:
        if self.std == 0:
            return 0.0
        return float(self.std * self.rng.standard_normal())


def noisy_eval(f: RkhsFunction, noise, x) -> float:
    return f(x) + noise.draw()


def safety_threshold(values: np.ndarray, quantile: float) -> float:
    """Threshold ``h`` placed at a quantile of the function's grid values."""
    return float(np.quantile(values, quantile))


def choose_seed(values: np.ndarray, threshold: float, noise_bound: float, rng,
                margin_fraction: float = 0.05) -> int | None:
    """Grid index of a seed whose value clears ``h + 2E + eps``.

    ``eps`` is ``margin_fraction`` of the value range. A first noisy reading
    at such a seed always certifies a neighbourhood through the Lipschitz
    envelope. Returns ``None`` when no grid point qualifies.
    """
    eps = margin_fraction * float(values.max() - values.min())
    ok = np.flatnonzero(values >= threshold + 2.0 * noise_bound + eps)
    if ok.size == 0:
        return None
    return int(rng.choice(ok))
