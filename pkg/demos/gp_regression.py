"""
GP regression with incremental updates
======================================

Fit a posterior, grow it one point at a time and watch the variance shrink.
"""

import numpy as np

from safebo import Dataset, KernelSpec, add_observation, fit_posterior, logdet_regularized_gram, predict

rng = np.random.default_rng(0)
kernel = KernelSpec("Matern52", lengthscale=0.3, signal_variance=1.0)

# start from the prior on [0, 1]
post = fit_posterior(kernel, Dataset([0.0], [1.0]), lam=0.01)
probes = np.linspace(0, 1, 5)
print("prior std:", predict(post, probes)[1])

# observe a noisy sine, one point at a time
for x in rng.uniform(0, 1, size=8):
    post = add_observation(post, [x], np.sin(6 * x) + 0.05 * rng.standard_normal())

mean, std = predict(post, probes)
print("posterior mean:", np.round(mean, 3))
print("truth:         ", np.round(np.sin(6 * probes), 3))
print("posterior std: ", np.round(std, 3))

# ln det(I + K / lam) grows with every informative observation
print("log-det after", post.t, "points:", round(logdet_regularized_gram(post), 3))

# a single point returns plain floats
m, s = predict(post, [0.5])
print(f"f(0.5) ~ {m:.3f} +- {2 * s:.3f}")
