import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppc.conditioning import palm_matrix
from dppc.errors import IntegrableConstraintError
from dppc.ground import discretize
from dppc.integrable import (IntegrableKernel, airy_integrable, cd_integrable, dressed_kernel,
                             dressing, dressing_matrix, integrable_eval, jump_matrix,
                             jump_residuals, palm_update, sine_integrable)
from dppc.kernels import airy, airy_kernel, ope_kernel, sine_kernel


@pytest.fixture
def grid():
    return discretize("real-interval", 50, bounds=(-3, 3))


def test_sine_integrable_matches_sine_kernel(grid):
    ik = sine_integrable(grid)
    assert np.max(np.abs(ik.matrix() - sine_kernel(grid).matrix)) <= 1e-12
    assert abs(integrable_eval(ik, 3, 3) - 1.0) <= 1e-12
    assert abs(integrable_eval(ik, 3, 7) - np.sinc(grid.nodes[3] - grid.nodes[7])) <= 1e-12


def test_airy_integrable_diagonal():
    s = discretize("real-interval", 30, bounds=(-6, 2))
    ik = airy_integrable(s)
    ai, aip = airy(s.nodes)
    assert np.max(np.abs(np.diag(ik.matrix()) - (aip ** 2 - s.nodes * ai ** 2))) <= 1e-12
    assert np.max(np.abs(ik.matrix() - airy_kernel(s).matrix)) <= 1e-12


def test_cd_integrable_matches_ope():
    s = discretize("real-interval", 40, bounds=(-4, 4))
    ope = ope_kernel(np.exp(-s.nodes ** 2), 6, s)
    ik = cd_integrable(ope)
    m = ope.kernel.matrix
    d = np.sqrt(np.abs(np.diag(m)))
    assert np.max(np.abs(ik.matrix() - m) / np.outer(d, d)) <= 1e-10


def test_constraint_checked(grid):
    f = np.ones((2, grid.n))
    with pytest.raises(IntegrableConstraintError):
        IntegrableKernel(grid, f, f)


def test_palm_update_empty_and_constraint(grid):
    ik = sine_integrable(grid)
    assert palm_update(ik, ()) is ik
    ikv = palm_update(ik, (4, 30))
    assert np.max(np.abs(np.sum(ikv.f * ikv.g, axis=0))) <= 1e-12
    assert np.max(np.abs(ikv.f[:, [4, 30]])) == 0.0


def test_palm_update_vs_matrix_route(grid):
    ik = sine_integrable(grid)
    v = [int(np.argmin(np.abs(grid.nodes)))]
    ref, _ = palm_matrix(ik.matrix(), v, weights=grid.weights)
    assert np.max(np.abs(palm_update(ik, v).matrix() - ref)) <= 1e-10


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(0, 49), min_size=1, max_size=3, unique=True))
def test_palm_routes_agree_for_any_observation(v):
    s = discretize("real-interval", 50, bounds=(-3, 3))
    ik = sine_integrable(s)
    ref, _ = palm_matrix(ik.matrix(), v, weights=s.weights)
    assert np.max(np.abs(palm_update(ik, v).matrix() - ref)) <= 1e-10


def test_dressing_identities(grid):
    ik = sine_integrable(grid)
    rng = np.random.default_rng(11)
    assert np.array_equal(dressing_matrix(ik, (), 0.3 + 1j), np.eye(2))
    v = (10, 25, 41)
    r = dressing(ik, v)
    for R in r.residues:
        assert np.max(np.abs(R @ R)) <= 1e-12
    zs = rng.uniform(-3, 3, 10) + 1j * rng.uniform(-1, 1, 10)
    for z in zs:
        prod, closed = dressing_matrix(ik, v, z, form="both")
        assert abs(np.linalg.det(closed) - 1) <= 1e-10
        assert np.max(np.abs(prod - closed)) <= 1e-10
        assert np.allclose(r.inverse(z) @ closed, np.eye(2), atol=1e-12)
    ikv = palm_update(ik, v)
    for i in range(grid.n):
        if i in v:
            continue
        x = grid.nodes[i]
        assert np.max(np.abs(ikv.f[:, i] - r.inverse(x) @ ik.f[:, i])) <= 1e-10
        assert np.max(np.abs(ikv.g[:, i] - r.closed(x).T @ ik.g[:, i])) <= 1e-10


def test_jump_matrices(grid):
    ik = sine_integrable(grid)
    v = (12, 33)
    assert np.array_equal(jump_matrix(ik, 0.0, v, 5), np.eye(2))
    theta = 0.5 + 0.4 * np.sin(grid.nodes)
    res = jump_residuals(ik, theta, v)
    assert res["conjugation"] <= 1e-10 and res["det"] <= 1e-12
    a = jump_matrix(ik, theta, v, 20)
    b = jump_matrix(ik, theta, v, 20, route="conjugated")
    assert np.max(np.abs(a - b)) <= 1e-10


def test_dressed_kernel_constant_dressings(grid):
    ik = sine_integrable(grid)
    v = (7, 26)
    ikv = palm_update(ik, v)
    exact = dressed_kernel(ik, v, np.eye(2))
    assert np.array_equal(exact.matrix, ikv.matrix().real)
    C = np.array([[2.0, 1.0 - 1j], [0.5j, 3.0]])
    assert np.max(np.abs(dressed_kernel(ik, v, C).matrix - ikv.matrix())) <= 1e-12


def test_dressed_kernel_diagonal_limit(grid):
    ik = sine_integrable(grid)
    v = (7, 26)
    ikv = palm_update(ik, v)
    x = grid.nodes

    def Y(t):
        t = np.atleast_1d(t)
        out = np.zeros((t.size, 2, 2), dtype=complex)
        out[:, 0, 0] = out[:, 1, 1] = 1.0
        out[:, 0, 1] = np.sin(t)
        return out

    dY = np.zeros((grid.n, 2, 2), dtype=complex)
    dY[:, 0, 1] = np.cos(x)
    K = dressed_kernel(ik, v, Y(x), dY).matrix

    def off(a, b):
        fa = ikv.funcs(np.array([a]))[0][:, 0]
        gb = ikv.funcs(np.array([b]))[1][:, 0]
        return gb @ np.linalg.solve(Y(b)[0], Y(a)[0] @ fa) / (a - b)

    for i in (3, 18, 40):
        h = 1e-4
        limit = 0.5 * (off(x[i], x[i] + h) + off(x[i], x[i] - h))
        assert abs(K[i, i] - limit) <= 1e-7
    # off the diagonal the formula is used as is
    assert abs(K[3, 18] - off(x[3], x[18])) <= 1e-12
