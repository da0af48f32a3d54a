import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from safebo import (
    ConstantBeta,
    Dataset,
    KernelSpec,
    LipschitzSafetyModel,
    RkhsNormBeta,
    UniformNoise,
    add_observation,
    beta_value,
    fit_posterior,
    gp_confidence_interval,
    lipschitz_lower_envelope,
    lipschitz_oracle,
    noisy_eval,
    predict,
    sample_rkhs_function,
)


def empty_post(lam=1.0, d=1):
    return fit_posterior(KernelSpec(), Dataset([-1.0] * d, [1.0] * d), lam)


class TestBeta:
    def test_constant(self, rng):
        post = fit_posterior(KernelSpec(), Dataset([0.0], [1.0], rng.uniform(size=(5, 1)), rng.normal(size=5)), 0.1)
        assert beta_value(ConstantBeta(2), post) == 2.0
        assert beta_value(ConstantBeta(2), empty_post()) == 2.0

    def test_rkhs_empty_posterior(self):
        # 2 + 0.1 * sqrt(-2 ln 0.05), unit regularizer
        assert beta_value(RkhsNormBeta(2.0, 0.1, 0.05), empty_post()) == pytest.approx(2.2447746830, abs=1e-9)

    def test_rkhs_noise_free_limit(self, rng):
        post = empty_post()
        for _ in range(5):
            assert beta_value(RkhsNormBeta(3.0, 0.0, 0.1), post) == 3.0
            post = add_observation(post, rng.uniform(-1, 1, size=1), rng.normal())

    def test_rkhs_scales_noise_term_by_regularizer(self, rng):
        x, y = rng.uniform(-1, 1, size=(6, 1)), rng.normal(size=6)
        for lam in (0.01, 0.5, 2.0):
            post = fit_posterior(KernelSpec(), Dataset([-1.0], [1.0], x, y), lam)
            gram = np.exp(-0.5 * (x - x.T) ** 2)
            info = np.linalg.slogdet(np.eye(6) + gram / lam)[1] - 2 * np.log(0.05)
            assert beta_value(RkhsNormBeta(1.5, 0.2, 0.05), post) == pytest.approx(1.5 + 0.2 / np.sqrt(lam) * np.sqrt(info))

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_bad_delta(self, delta):
        with pytest.raises(ValueError):
            RkhsNormBeta(1.0, 0.1, delta)

    def test_rkhs_non_decreasing_along_run(self, rng):
        sched = RkhsNormBeta(2.0, 0.1, 0.05)
        post = empty_post(lam=0.01)
        last = beta_value(sched, post)
        for _ in range(40):
            post = add_observation(post, rng.uniform(-1, 1, size=1), rng.normal())
            now = beta_value(sched, post)
            assert now >= last
            last = now


class TestInterval:
    def test_prior_interval(self):
        ci = gp_confidence_interval(empty_post(), ConstantBeta(2), [0.3])
        assert (ci.lower, ci.upper) == (-2.0, 2.0)

    def test_width_is_two_beta_sigma(self, rng):
        for _ in range(10):
            n = rng.integers(0, 8)
            post = fit_posterior(KernelSpec("Matern52", 0.5), Dataset([-1.0], [1.0], rng.uniform(-1, 1, (n, 1)), rng.normal(size=n)), 0.05)
            x = rng.uniform(-1, 1, size=1)
            beta = rng.uniform(0.5, 5)
            ci = gp_confidence_interval(post, ConstantBeta(beta), x)
            _, std = predict(post, x)
            assert ci.width == pytest.approx(2 * beta * std, rel=1e-12, abs=1e-15)
            assert ci.lower <= ci.upper

    def test_narrow_at_training_inputs(self):
        x = np.linspace(-1, 1, 6)[:, None]
        post = fit_posterior(KernelSpec("SquaredExponential", 0.3), Dataset([-1.0], [1.0], x, np.cos(3 * x[:, 0])), 1e-6)
        for xi in x:
            assert gp_confidence_interval(post, ConstantBeta(2), xi).width < 0.01


class TestEnvelope:
    def test_single_point(self):
        data = Dataset([-2.0], [2.0], [[0.0]], [2.0])
        assert lipschitz_lower_envelope(data, LipschitzSafetyModel(1.0, 0.5), [1.0]) == pytest.approx(0.5)

    def test_at_observed_input(self, rng):
        x = rng.uniform(-1, 1, size=(5, 2))
        y = rng.normal(size=5)
        data = Dataset([-1, -1], [1, 1], x, y)
        model = LipschitzSafetyModel(100.0, 0.3)
        for xi, yi in zip(x, y):
            assert lipschitz_lower_envelope(data, model, xi) == pytest.approx(yi - 0.3)

    def test_empty_is_minus_infinity(self):
        assert lipschitz_lower_envelope(Dataset([0.0], [1.0]), LipschitzSafetyModel(1.0), [0.5]) == -np.inf

    def test_brute_force(self, rng):
        x = rng.uniform(-1, 1, size=(10, 2))
        y = rng.normal(size=10)
        data = Dataset([-1, -1], [1, 1], x, y)
        model = LipschitzSafetyModel(1.7, 0.2)
        probes = rng.uniform(-1, 1, size=(50, 2))
        env = lipschitz_lower_envelope(data, model, probes)
        for p, e in zip(probes, env):
            ref = max(yi - 0.2 - 1.7 * np.sqrt((p[0] - xi[0]) ** 2 + (p[1] - xi[1]) ** 2) for xi, yi in zip(x, y))
            assert e == pytest.approx(ref, abs=1e-12)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LipschitzSafetyModel(0.0, 0.1)
        with pytest.raises(ValueError):
            LipschitzSafetyModel(1.0, -0.1)

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 12))
    def test_monotone_in_data(self, seed, n):
        rng = np.random.default_rng(seed)
        data = Dataset([-1.0], [1.0], rng.uniform(-1, 1, (n, 1)), rng.normal(size=n))
        model = LipschitzSafetyModel(rng.uniform(0.1, 5), rng.uniform(0, 0.5))
        probes = rng.uniform(-1, 1, size=(30, 1))
        more = data.append(rng.uniform(-1, 1, size=1), rng.normal())
        assert np.all(lipschitz_lower_envelope(more, model, probes) >= lipschitz_lower_envelope(data, model, probes))

    @given(seed=st.integers(0, 2**32 - 1))
    def test_lipschitz_continuity(self, seed):
        rng = np.random.default_rng(seed)
        data = Dataset([-1, -1], [1, 1], rng.uniform(-1, 1, (6, 2)), rng.normal(size=6))
        model = LipschitzSafetyModel(rng.uniform(0.1, 5), 0.1)
        a, b = rng.uniform(-1, 1, size=(2, 20, 2))
        diff = np.abs(lipschitz_lower_envelope(data, model, a) - lipschitz_lower_envelope(data, model, b))
        assert np.all(diff <= model.lipschitz * np.linalg.norm(a - b, axis=1) + 1e-12)


def test_envelope_soundness_on_synthetic_truth():
    """The certificate LoSBO relies on: env <= f* under valid L and E."""
    kernel = KernelSpec("SquaredExponential", 0.2)
    violations = 0
    for i in range(100):
        rng = np.random.default_rng(i)
        f = sample_rkhs_function(kernel, [0.0], [1.0], 30, 2.0, seed=i)
        model = LipschitzSafetyModel(lipschitz_oracle(f, [0.0], [1.0]), 0.1)
        noise = UniformNoise(0.1, rng)
        x = rng.uniform(0, 1, size=(15, 1))
        data = Dataset([0.0], [1.0], x, [noisy_eval(f, noise, xi) for xi in x])
        probes = rng.uniform(0, 1, size=(1000, 1))
        violations += int(np.sum(lipschitz_lower_envelope(data, model, probes) > f(probes)))
    assert violations == 0
