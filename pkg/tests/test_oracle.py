import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppc.conditioning import conditional_kernel
from dppc.errors import NotAValidDPP, ZeroProbabilityObservation
from dppc.ground import finite_space
from dppc.kernels import Kernel, linear_statistic_moments
from dppc.oracle import (TabulatedProcess, bernoulli_tabulated, condition_exact,
                         exact_conditional_correlation, from_kernel, mark_exact, mask_of, members,
                         moments_exact, poisson_tabulated, principal_minors, weighted_correlations)

from conftest import random_kernel, rank_one


def test_masks():
    assert mask_of((0, 2)) == 5 and members(5) == (0, 2) and members(0) == ()


def test_rank_one_two_nodes():
    w = 0.7
    s = finite_space(2, [w, w])
    K = rank_one(s, [1 / np.sqrt(2 * w)] * 2)
    tp = from_kernel(K)
    assert np.allclose(tp.prob, [0, 0.5, 0.5, 0], atol=1e-15)


def test_zero_kernel_and_normalisation(rng):
    s = finite_space(4)
    assert from_kernel(Kernel(s, np.zeros((4, 4)), True)).prob[0] == 1.0
    tp = from_kernel(random_kernel(rng, 7))
    assert abs(tp.prob.sum() - 1) <= 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2 ** 32 - 1))
def test_mobius_and_direct_agree(n, seed):
    r = np.random.default_rng(seed)
    K = random_kernel(r, n, complex_=bool(seed % 2))
    a = from_kernel(K, "mobius").prob
    b = from_kernel(K, "direct").prob
    assert np.max(np.abs(a - b)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_inclusion_probabilities_are_weighted_minors(n, seed):
    r = np.random.default_rng(seed)
    K = random_kernel(r, n)
    tp = from_kernel(K)
    assert np.allclose(tp.inclusion(), np.real(weighted_correlations(K)), atol=1e-12)
    w = K.weights
    minors = principal_minors(K.matrix)
    for s in range(1 << n):
        assert np.isclose(minors[s] * np.prod(w[list(members(s))]), weighted_correlations(K)[s])


def test_invalid_kernel_rejected():
    s = finite_space(2)
    with pytest.raises(NotAValidDPP):
        from_kernel(Kernel(s, np.diag([1.5, 0.2]), True))


def test_poisson_and_bernoulli():
    s = finite_space(3, [1.0, 2.0, 0.5])
    assert poisson_tabulated(0.0, s).prob[0] == 1.0
    one = bernoulli_tabulated([0.5], finite_space(1))
    assert np.allclose(one.prob, [0.5, 0.5])
    two = bernoulli_tabulated([0.3, 0.8], finite_space(2))
    assert np.isclose(two[(0, 1)], 0.24)
    rho = np.array([0.4, 1.0, 3.0])
    tp = poisson_tabulated(rho, s)
    p = rho * s.weights / (1 + rho * s.weights)
    assert np.allclose(tp.inclusion()[[1, 2, 4]], p)


def test_marking_extremes(rng):
    tp = from_kernel(random_kernel(rng, 5))
    full = mark_exact(tp, 1.0)
    assert np.isclose(full.zeros_law()[0], 1.0) and np.allclose(full.ones_law(), tp.prob)
    none = mark_exact(tp, 0.0)
    assert np.isclose(none.ones_law()[0], 1.0) and np.allclose(none.zeros_law(), tp.prob)
    table = mark_exact(tp, rng.uniform(0, 1, 5)).table()
    assert abs(sum(table.values()) - 1) <= 1e-14


def test_poisson_marks_carry_no_information(rng):
    n = 5
    s = finite_space(n, rng.uniform(0.5, 2, n))
    rho = rng.uniform(0.1, 2, n)
    tp = poisson_tabulated(rho, s)
    p = rho * s.weights / (1 + rho * s.weights)
    theta = rng.uniform(0, 0.9, n)
    marked = mark_exact(tp, theta)
    q = p * (1 - theta) / (1 - p * theta)
    for vm in range(1 << n):
        v = members(vm)
        free = [i for i in range(n) if i not in v]
        # the same independent law off v, whatever v is
        expect = bernoulli_tabulated(np.where(np.isin(np.arange(n), v), 0.0, q), s).prob
        assert np.allclose(condition_exact(marked, v).prob, expect, atol=1e-14), free


def test_zero_probability_observation():
    s = finite_space(2)
    tp = bernoulli_tabulated([0.0, 0.5], s)
    with pytest.raises(ZeroProbabilityObservation):
        condition_exact(mark_exact(tp, 0.5), (0,))


@pytest.mark.parametrize("nv", [0, 1])
def test_conditional_correlations_match_kernel_route(rng, nv):
    n = 6
    K = random_kernel(rng, n)
    theta = rng.uniform(0, 0.9, n)
    tp = from_kernel(K)
    v = tuple(range(nv))
    ck = conditional_kernel(K, theta, v)
    free = [i for i in range(n) if i not in v]
    for k in (1, 2, 3):
        for x in itertools.combinations(free, k):
            ref = exact_conditional_correlation(tp, theta, v, x)
            val = np.real(np.linalg.det(ck.full[np.ix_(x, x)]))
            assert abs(val - ref) <= 1e-10 * max(1, abs(ref))


def test_moments():
    det1 = bernoulli_tabulated([1.0, 0.0], finite_space(2))
    mean, var, fact = moments_exact(det1)
    assert mean == 1.0 and var == 0.0
    rng = np.random.default_rng(5)
    K = random_kernel(rng, 3)
    tp = from_kernel(K)
    mean, var, fact = moments_exact(tp)
    w = K.weights
    assert np.isclose(fact[1], np.sum(np.real(np.diag(K.matrix)) * w), atol=1e-14)
    m2 = sum(np.real(np.linalg.det(K.matrix[np.ix_([i, j], [i, j])])) * w[i] * w[j]
             for i in range(3) for j in range(3) if i != j)
    assert np.isclose(fact[2], m2, atol=1e-14)
    f = np.array([0.3, -1.0, 2.0])
    m, v, _ = moments_exact(tp, f)
    mk, vk = linear_statistic_moments(K, f)
    assert np.isclose(m, mk, atol=1e-13) and np.isclose(v, vk, atol=1e-13)


def test_table_json_roundtrip(rng):
    tp = from_kernel(random_kernel(rng, 6))
    back = TabulatedProcess.from_dict(__import__("json").loads(tp.to_json()))
    assert np.array_equal(back.prob, tp.prob)
