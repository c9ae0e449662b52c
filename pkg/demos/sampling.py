"""Exact samples of the sine process, thinned, and a Monte Carlo Fredholm determinant."""
import numpy as np

from dppc.conditioning import fredholm_det
from dppc.ground import discretize
from dppc.kernels import sine_kernel
from dppc.sampler import estimate, mark_sample, sample_dpp

space = discretize("real-interval", 60, bounds=(-4, 4))
K = sine_kernel(space)
batch = sample_dpp(K, seed=1, count=20_000)
mean, se = estimate(batch, "count")
print(f"mean count {mean:.3f} +- {se:.3f}, trace {K.trace():.3f}")

marked = mark_sample(batch, 0.5, seed=2)
c = marked.configurations[0]
print(f"first sample: unobserved {c.zeros}, observed {c.ones}")

phi = 0.5 * np.exp(-space.nodes ** 2)
mc, se = estimate(batch, "multiplicative", phi)
print(f"E prod(1 - phi) = {mc:.5f} +- {se:.5f}; det(1 - phi K) = {fredholm_det(K, phi):.5f}")
