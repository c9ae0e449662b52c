import numpy as np
import pytest
from scipy import stats

import dppc.sampler as sampler
from dppc.conditioning import fredholm_det
from dppc.errors import EigenvalueOutOfRange
from dppc.ground import discretize, finite_space
from dppc.kernels import Kernel, ope_kernel, sine_kernel
from dppc.oracle import condition_exact, from_kernel, mark_exact
from dppc.sampler import (SampleBatch, estimate, jackknife, mark_sample, philox_uniforms,
                          sample_conditional, sample_dpp, subset_frequencies)

from conftest import random_kernel, rank_one


def test_philox_streams():
    a = philox_uniforms(7, 0, 0, 40)
    assert np.array_equal(a, philox_uniforms(7, 0, 0, 40))
    assert np.array_equal(a[13:29], philox_uniforms(7, 0, 13, 16))
    assert not np.array_equal(a, philox_uniforms(7, 1, 0, 40))
    assert not np.array_equal(a, philox_uniforms(8, 0, 0, 40))
    assert a.min() >= 0 and a.max() < 1


def test_batch_independent_of_chunking(monkeypatch, rng):
    K = random_kernel(rng, 9)
    full = sample_dpp(K, 5, 300)
    monkeypatch.setattr(sampler, "CHUNK_BYTES", 1)
    assert sample_dpp(K, 5, 300).configurations == full.configurations
    # a prefix of a batch is the smaller batch
    assert sample_dpp(K, 5, 120).configurations == full.configurations[:120]


def test_zero_and_projection_counts():
    s = discretize("real-interval", 25, bounds=(-3, 3))
    assert all(c == () for c in sample_dpp(Kernel(s, np.zeros((25, 25)), True), 0, 50).configurations)
    ope = ope_kernel(np.exp(-s.nodes ** 2), 5, s)
    batch = sample_dpp(ope.kernel, 1, 2000)
    assert set(batch.counts()) == {5}
    assert estimate(batch, "count") == (5.0, 0.0)


def test_rank_one_location_law():
    s = discretize("real-interval", 8, bounds=(0, 2))
    phi = 1 + s.nodes
    K = rank_one(s, phi)
    batch = sample_dpp(K, 2, 100_000)
    assert set(batch.counts()) == {1}
    obs = np.bincount([c[0] for c in batch.configurations], minlength=8)
    p = phi ** 2 * s.weights / np.sum(phi ** 2 * s.weights)
    assert stats.chisquare(obs, p * obs.sum()).pvalue > 1e-3


def test_spectrum_check():
    s = finite_space(2)
    with pytest.raises(EigenvalueOutOfRange):
        sample_dpp(Kernel(s, np.diag([1.2, 0.1]), True), 0, 10)


def test_marking():
    s = discretize("real-interval", 10, bounds=(0, 1))
    K = rank_one(s, np.ones(10))
    batch = sample_dpp(K, 3, 20_000)
    all_ones = mark_sample(batch, 1.0, 4)
    assert all(c.ones == g for c, g in zip(all_ones.configurations, batch.configurations))
    half = mark_sample(batch, 0.5, 4)
    freq = np.mean([len(c.ones) > 0 for c in half.configurations])
    assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / 20_000)


def test_mark1_mean_count():
    s = discretize("real-interval", 20, bounds=(-2, 2))
    K = sine_kernel(s)
    theta = 0.5 + 0.4 * np.cos(s.nodes)
    batch = mark_sample(sample_dpp(K, 9, 100_000), theta, 10)
    ones = np.array([len(c.ones) for c in batch.configurations], dtype=float)
    mean, se = jackknife(ones)
    assert abs(mean - np.sum(theta * np.diag(K.matrix) * K.weights)) <= 3 * se


def test_estimators_against_formulas():
    s = discretize("real-interval", 20, bounds=(-2, 2))
    K = sine_kernel(s)
    batch = sample_dpp(K, 21, 100_000)
    phi = np.where(np.abs(s.nodes) < 1, 0.7, 0.2)
    mean, se = estimate(batch, "multiplicative", phi)
    assert abs(mean - fredholm_det(K, phi)) <= 3 * se
    f = s.nodes ** 2
    mean, se = estimate(batch, "linear", f)
    assert abs(mean - np.sum(f * np.diag(K.matrix) * K.weights)) <= 3 * se


def test_sine_variance_of_interval_count():
    s = discretize("real-interval", 40, bounds=(-2, 2))
    K = sine_kernel(s)
    ind = ((s.nodes >= 0) & (s.nodes <= 1)).astype(float)
    from dppc.kernels import linear_statistic_moments
    _, var = linear_statistic_moments(K, ind)
    batch = sample_dpp(K, 31, 100_000)
    vals = sampler.statistic_values(batch, "linear", ind)
    # jackknife standard error of the sample variance
    n = vals.size
    dev = (vals - vals.mean()) ** 2
    emp, se = jackknife(dev * n / (n - 1))
    assert abs(emp - var) <= 3 * se


def test_conditional_sampling_vs_oracle():
    rng = np.random.default_rng(8)
    K = random_kernel(rng, 6)
    theta = rng.uniform(0.1, 0.8, 6)
    v = (2,)
    batch = sample_conditional(K, theta, v, 12, 100_000)
    emp = subset_frequencies(batch, 6) / len(batch)
    ref = condition_exact(mark_exact(from_kernel(K), theta), v).prob
    assert 0.5 * np.sum(np.abs(emp - ref)) <= 0.02


def test_unconditioned_sampling_matches_plain_law():
    rng = np.random.default_rng(9)
    K = random_kernel(rng, 4)
    a = subset_frequencies(sample_conditional(K, 0.0, (), 4, 50_000), 4) / 50_000
    b = subset_frequencies(sample_dpp(K, 5, 50_000), 4) / 50_000
    assert 0.5 * np.sum(np.abs(a - b)) <= 0.02


def test_projection_conditional_counts_constant():
    s = discretize("real-interval", 30, bounds=(-3, 3))
    ope = ope_kernel(np.exp(-s.nodes ** 2), 4, s)
    x = ope.kernel.space.nodes
    theta = np.where(np.abs(x) < 1, 0.3, 0.9)
    for v in [(), (15,), (3, 20)]:
        batch = sample_conditional(ope.kernel, theta, v, 1, 500)
        assert set(batch.counts()) == {4 - len(v)}


def test_batch_serialisation(rng):
    K = random_kernel(rng, 5)
    batch = mark_sample(sample_dpp(K, 1, 30), 0.5, 2)
    back = SampleBatch.from_json(batch.to_json())
    assert back.configurations == batch.configurations and back.seed == 1
    text = batch.to_csv()
    assert text.startswith("# {") and text.count("\n") == 32


def test_jackknife_mean_is_classical():
    x = np.random.default_rng(0).normal(size=500)
    m, se = jackknife(x)
    assert np.isclose(m, x.mean()) and np.isclose(se, x.std(ddof=1) / np.sqrt(x.size))
