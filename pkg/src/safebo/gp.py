"""
Kernels and exact Gaussian process regression.

The posterior is kept as an immutable snapshot holding the lower Cholesky
factor of ``K + lam * I``. New observations extend the factor by one row
(rank-one extension) and return a new snapshot; the factor is rebuilt from
scratch every ``REFACTOR_EVERY`` additions to bound round-off drift.

Prior mean is zero throughout.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "Dataset",
    "GpPosterior",
    "NumericError",
    "kernel_eval",
    "kernel_matrix",
    "fit_posterior",
    "predict",
    "add_observation",
    "logdet_regularized_gram",
]

REFACTOR_EVERY = 64
# negative variances smaller than this (times signal variance) are round-off
VARIANCE_CLAMP = 1e-12


class NumericError(ArithmeticError):
    """Raised when a factorization or predictive variance is unusable."""


class KernelFamily(str, enum.Enum):
    SQUARED_EXPONENTIAL = "SquaredExponential"
    MATERN32 = "Matern32"
    MATERN52 = "Matern52"


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance function.

    Parameters
    ----------
    family : KernelFamily or str
        One of ``SquaredExponential``, ``Matern32``, ``Matern52``.
    lengthscale : float or sequence of float
        A scalar gives an isotropic kernel, a sequence one lengthscale per
        input dimension.
    signal_variance : float
        Value of ``k(x, x)``.
    """

    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL
    lengthscale: float | tuple[float, ...] = 1.0
    signal_variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        ls = np.atleast_1d(np.asarray(self.lengthscale, dtype=float))
        if ls.ndim != 1 or ls.size == 0 or not np.all(ls > 0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale!r}")
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance!r}")
        value = float(ls[0]) if ls.size == 1 and np.ndim(self.lengthscale) == 0 else tuple(map(float, ls))
        object.__setattr__(self, "lengthscale", value)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))

    @property
    def isotropic(self) -> bool:
        return not isinstance(self.lengthscale, tuple)

    def scale(self, x: np.ndarray) -> np.ndarray:
        """Divide points of shape (n, d) by the lengthscales."""
        ls = np.asarray(self.lengthscale, dtype=float)
        if not self.isotropic and ls.size != x.shape[1]:
            raise ValueError(
                f"points have dimension {x.shape[1]} but kernel has {ls.size} lengthscales"
            )
        return x / ls

    def from_distance(self, r: np.ndarray) -> np.ndarray:
        """Covariance as a function of the scaled distance ``r``."""
        sv = self.signal_variance
        if self.family is KernelFamily.SQUARED_EXPONENTIAL:
            return sv * np.exp(-0.5 * r**2)
        if self.family is KernelFamily.MATERN32:
            s = np.sqrt(3.0) * r
            return sv * (1.0 + s) * np.exp(-s)
        s = np.sqrt(5.0) * r
        return sv * (1.0 + s + s**2 / 3.0) * np.exp(-s)


def _as_points(x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1) if dim is None or x.size == dim else x.reshape(-1, 1)
    if dim is not None and x.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def kernel_matrix(spec: KernelSpec, x1, x2) -> np.ndarray:
    """Cross-covariance matrix between two point sets of shape (n, d), (m, d)."""
    a = spec.scale(np.atleast_2d(np.asarray(x1, dtype=float)))
    b = spec.scale(np.atleast_2d(np.asarray(x2, dtype=float)))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if spec.family is KernelFamily.SQUARED_EXPONENTIAL:
        return spec.signal_variance * np.exp(-0.5 * cdist(a, b, "sqeuclidean"))
    return spec.from_distance(cdist(a, b))


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Evaluate ``k(x, x2)`` for two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.ndim != 1:
        raise ValueError(f"points must be 1-D with equal shape, got {x.shape} and {x2.shape}")
    return float(kernel_matrix(spec, x[None, :], x2[None, :])[0, 0])


@dataclass(frozen=True)
class Dataset:
    """Observed inputs and noisy outputs inside an axis-aligned box."""

    lower: np.ndarray
    upper: np.ndarray
    inputs: np.ndarray = None
    outputs: np.ndarray = None

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or np.any(lower > upper):
            raise ValueError("invalid domain box")
        d = lower.size
        x = np.empty((0, d)) if self.inputs is None else np.asarray(self.inputs, dtype=float).reshape(-1, d)
        y = np.empty(0) if self.outputs is None else np.asarray(self.outputs, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} inputs but {y.shape[0]} outputs")
        if x.shape[0] and not self.contains(x, lower, upper).all():
            raise ValueError("inputs must lie inside the domain box")
        for name, arr in (("lower", lower), ("upper", upper), ("inputs", x), ("outputs", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @staticmethod
    def contains(x, lower, upper) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= lower) & (x <= upper), axis=1)

    @property
    def dim(self) -> int:
        return self.lower.size

    def __len__(self) -> int:
        return self.outputs.size

    def append(self, x, y) -> Dataset:
        x = _as_points(x, self.dim)
        return Dataset(
            self.lower,
            self.upper,
            np.vstack([self.inputs, x]),
            np.append(self.outputs, float(y)),
        )


@dataclass(frozen=True)
class GpPosterior:
    """Immutable GP posterior snapshot; build it with :func:`fit_posterior`."""

    kernel: KernelSpec
    data: Dataset
    lam: float
    cholesky_factor: np.ndarray
    alpha: np.ndarray
    _since_refactor: int = field(default=0, repr=False)

    @property
    def t(self) -> int:
        return len(self.data)

    def predict(self, x):
        return predict(self, x)


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not lam > 0:
        raise ValueError(f"regularizer must be positive, got {lam}")
    return lam


def _cholesky(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as err:
        raise NumericError(
            f"Cholesky factorization failed (condition number {np.linalg.cond(a):.3e})"
        ) from err


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def fit_posterior(kernel: KernelSpec, data: Dataset, lam: float) -> GpPosterior:
    """Condition the zero-mean GP prior on ``data`` with regularizer ``lam``.

    An empty dataset gives back the prior.
    """
    lam = _check_lam(lam)
    n = len(data)
    if n == 0:
        chol, alpha = np.empty((0, 0)), np.empty(0)
    else:
        gram = kernel_matrix(kernel, data.inputs, data.inputs)
        chol = _cholesky(gram + lam * np.eye(n))
        alpha = cho_solve((chol, True), data.outputs)
    _freeze(chol, alpha)
    return GpPosterior(kernel, data, lam, chol, alpha)


def predict(post: GpPosterior, x):
    """Posterior mean and standard deviation.

    ``x`` may be a single point of shape (d,) or a batch of shape (m, d). A
    single point returns two floats, a batch two arrays of length m.
    """
    single = np.ndim(x) <= 1 and (np.ndim(x) == 0 or np.size(x) == post.data.dim)
    pts = _as_points(x, post.data.dim)
    if logger.isEnabledFor(logging.DEBUG):
        outside = ~Dataset.contains(pts, post.data.lower, post.data.upper)
        if outside.any():
            logger.debug("predicting at %d point(s) outside the domain box", outside.sum())
    prior_var = post.kernel.signal_variance
    if post.t == 0:
        mean = np.zeros(pts.shape[0])
        var = np.full(pts.shape[0], prior_var)
    else:
        k_star = kernel_matrix(post.kernel, pts, post.data.inputs)
        mean = k_star @ post.alpha
        v = solve_triangular(post.cholesky_factor, k_star.T, lower=True, check_finite=False)
        var = prior_var - np.einsum("ij,ij->j", v, v)
        tol = VARIANCE_CLAMP * max(1.0, prior_var)
        if np.any(var < -tol):
            raise NumericError(f"negative predictive variance {var.min():.3e}; ill-conditioned solve")
        var = np.clip(var, 0.0, prior_var)
    std = np.sqrt(var)
    if single:
        return float(mean[0]), float(std[0])
    return mean, std


def add_observation(post: GpPosterior, x, y) -> GpPosterior:
    """Return a new posterior with ``(x, y)`` appended; ``post`` is untouched."""
    data = post.data.append(x, y)
    since = post._since_refactor + 1
    if post.t == 0 or since >= REFACTOR_EVERY:
        return fit_posterior(post.kernel, data, post.lam)
    xn = data.inputs[-1:]
    k_new = kernel_matrix(post.kernel, post.data.inputs, xn)[:, 0]
    row = solve_triangular(post.cholesky_factor, k_new, lower=True, check_finite=False)
    d2 = post.kernel.signal_variance + post.lam - row @ row
    if not d2 > 0:
        raise NumericError(f"rank-one extension lost positive definiteness (pivot {d2:.3e})")
    n = post.t
    chol = np.zeros((n + 1, n + 1))
    chol[:n, :n] = post.cholesky_factor
    chol[n, :n] = row
    chol[n, n] = np.sqrt(d2)
    alpha = cho_solve((chol, True), data.outputs)
    _freeze(chol, alpha)
    return GpPosterior(post.kernel, data, post.lam, chol, alpha, since)


def logdet_regularized_gram(post: GpPosterior) -> float:
    """``ln det(I + K / lam)`` from the Cholesky factor of ``K + lam I``."""
    if post.t == 0:
        return 0.0
    diag = np.diag(post.cholesky_factor)
    return max(0.0, float(2.0 * np.sum(np.log(diag)) - post.t * np.log(post.lam)))
