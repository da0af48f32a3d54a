"""
Grid-free safe optimization in two dimensions
=============================================

LoS-GP-UCB maximizes mu + beta sigma over the region certified by the
Lipschitz envelope, using a multistart coordinate search instead of a grid.
"""

import numpy as np

from safebo import (
    AlgorithmConfig,
    ConstantBeta,
    ContinuousSafeSet,
    GridDomain,
    KernelSpec,
    LipschitzSafetyModel,
    MultistartConfig,
    UniformNoise,
    lipschitz_oracle,
    noisy_eval,
    run_optimization,
    sample_rkhs_function,
)
from safebo.synth import choose_seed, safety_threshold

kernel = KernelSpec("SquaredExponential", 0.2)
lower, upper = [0.0, 0.0], [1.0, 1.0]
f = sample_rkhs_function(kernel, lower, upper, m=30, target_norm=2.0, seed=0)

# the grid is only used to pick h and a seed and to score the result
grid = GridDomain(lower, upper, 60)
values = f(grid.points)
h = safety_threshold(values, 0.3)
rng = np.random.default_rng(0)
seed = grid.points[choose_seed(values, h, 0.1, rng)]
print(f"threshold {h:.3f}, seed {seed}, f(seed) {f(seed):.3f}")

safety = LipschitzSafetyModel(lipschitz_oracle(f, lower, upper), noise_bound=0.1)
config = AlgorithmConfig("LoSGpUcb", kernel, 0.01, ConstantBeta(2.0), safety, h, budget=30,
                         multistart=MultistartConfig(num_starts=10, max_iters=30))
noise = UniformNoise(0.1, np.random.default_rng(1))
records = run_optimization(config, ContinuousSafeSet(lower, upper, [seed], h, safety),
                           lambda x: noisy_eval(f, noise, x), f)

best = max(r.f_true for r in records if r.safe_actual)
print(f"best safe value {best:.3f} of {values[values >= h].max():.3f} on the grid")
print("unsafe queries:", sum(not r.safe_actual for r in records))
for r in records[::6]:
    print(f"  t={r.t:2d}  x=({r.x[0]:.3f}, {r.x[1]:.3f})  f={r.f_true:.3f}")
