import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from safebo import KernelSpec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def ref_kernel(kernel, a, b):
    """Covariance matrix written out from the textbook formulas."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    ls = np.broadcast_to(np.asarray(kernel.lengthscale, dtype=float), (a.shape[1],))
    r = np.sqrt(np.sum(((a[:, None, :] - b[None, :, :]) / ls) ** 2, axis=-1))
    if kernel.family.value == "SquaredExponential":
        v = np.exp(-0.5 * r * r)
    elif kernel.family.value == "Matern32":
        v = (1 + np.sqrt(3) * r) * np.exp(-np.sqrt(3) * r)
    else:
        v = (1 + np.sqrt(5) * r + 5 * r * r / 3) * np.exp(-np.sqrt(5) * r)
    return kernel.signal_variance * v


def dense_posterior(kernel, x, y, lam, probes):
    """Direct dense-solve GP posterior, independent of the Cholesky path."""
    kernel_matrix = ref_kernel
    probes = np.atleast_2d(probes)
    if len(y) == 0:
        return np.zeros(len(probes)), np.full(len(probes), kernel.signal_variance)
    gram = kernel_matrix(kernel, x, x) + lam * np.eye(len(y))
    k_star = kernel_matrix(kernel, probes, x)
    mean = k_star @ np.linalg.solve(gram, y)
    var = kernel.signal_variance - np.sum(k_star * np.linalg.solve(gram, k_star.T).T, axis=1)
    return mean, var


@pytest.fixture
def se_kernel():
    return KernelSpec("SquaredExponential", 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
