import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dppc.errors import DomainError
from dppc.ground import (CIRCLE, FINITE, INTERVAL, GroundSpace, MarkedConfiguration,
                         as_configuration, as_marking, discretize, finite_space, restrict,
                         space_from_json, thinned_weights)


def test_two_point_gauss_legendre():
    s = discretize(INTERVAL, 2, "gauss-legendre", bounds=(-1, 1))
    # roots of P_2(x) = (3x^2 - 1)/2
    assert np.allclose(s.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], rtol=0, atol=1e-15)
    assert np.allclose(s.weights, [1.0, 1.0], rtol=0, atol=1e-15)


def test_circle_trapezoid():
    s = discretize(CIRCLE, 4)
    assert np.allclose(s.nodes, [0, np.pi / 2, np.pi, 3 * np.pi / 2])
    assert np.allclose(s.weights, np.pi / 2)
    assert np.allclose(s.points, [1, 1j, -1, -1j])


def test_weights_sum_to_length():
    s = discretize(INTERVAL, 10, bounds=(0, 1))
    assert abs(s.weights.sum() - 1.0) <= 1e-14


@given(st.integers(1, 30), st.integers(0, 10))
def test_gauss_legendre_exact_on_polynomials(n, k):
    deg = min(k, 2 * n - 1)
    s = discretize(INTERVAL, n, bounds=(0, 2))
    exact = 2.0 ** (deg + 1) / (deg + 1)
    assert abs(s.integrate(lambda x: x ** deg) - exact) <= 1e-12 * exact


@given(st.integers(1, 20), st.integers(-19, 19))
def test_trapezoid_exact_on_trig(n, k):
    s = discretize(CIRCLE, n)
    val = s.integrate(lambda t: np.exp(1j * k * t))
    exact = 2 * np.pi if k % n == 0 else 0.0
    if abs(k) < n:
        assert abs(val - exact) <= 1e-12


def test_uniform_finite():
    s = discretize(FINITE, 5)
    assert np.array_equal(s.nodes, np.arange(5.0)) and np.array_equal(s.weights, np.ones(5))


def test_bad_inputs():
    with pytest.raises(DomainError):
        discretize("torus", 3)
    with pytest.raises(DomainError):
        discretize(INTERVAL, 3, "trapezoid-circle")
    with pytest.raises(ValueError):
        discretize(INTERVAL, 0)
    with pytest.raises(ValueError):
        GroundSpace(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        GroundSpace(np.array([1.0, 0.0]), np.array([1.0, 1.0]))


def test_space_is_immutable():
    s = discretize(INTERVAL, 3)
    with pytest.raises(ValueError):
        s.nodes[0] = 5.0


def test_restrict():
    s = discretize(INTERVAL, 7)
    same, idx = restrict(s, lambda x: np.ones_like(x, dtype=bool))
    assert np.array_equal(same.nodes, s.nodes) and np.array_equal(idx, np.arange(7))
    empty, idx = restrict(s, np.zeros(7, dtype=bool))
    assert empty.n == 0 and idx.size == 0
    pos, idx = restrict(s, lambda x: x > 0)
    assert np.array_equal(pos.nodes, s.nodes[s.nodes > 0])
    assert np.array_equal(pos.weights, s.weights[idx])


def test_json_roundtrip_bitwise():
    s = discretize(INTERVAL, 13, bounds=(-2.5, 7.0))
    t = space_from_json(s.to_json())
    assert np.array_equal(s.nodes, t.nodes) and np.array_equal(s.weights, t.weights)
    assert t.domain == s.domain and t.bounds == s.bounds
    assert json.loads(s.to_json())["domain"] == INTERVAL


def test_configurations_and_markings():
    assert as_configuration([3, 1, 2]) == (1, 2, 3)
    with pytest.raises(ValueError):
        as_configuration([1, 1])
    with pytest.raises(ValueError):
        as_configuration([5], n=3)
    s = finite_space(3, [1.0, 2.0, 4.0])
    assert np.array_equal(as_marking(0.25, s), [0.25] * 3)
    with pytest.raises(ValueError):
        as_marking([0.5, 1.2, 0.0], s)
    assert np.allclose(thinned_weights(s, 0.25, 1) + thinned_weights(s, 0.25, 0), s.weights)
    m = MarkedConfiguration((2, 0), (1,))
    assert m.zeros == (0, 2) and m.ground == (0, 1, 2)
    with pytest.raises(ValueError):
        MarkedConfiguration((1,), (1,))
