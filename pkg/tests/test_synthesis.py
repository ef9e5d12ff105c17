import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowbalance import (build_Q, compute_M, compute_M_nonlinear, integrate_x_star,
                         reference)
from flowbalance.synthesis import averaging_matrix
from flowbalance.verify import random_connected_graph, random_exosystem


def test_example_feedforward_in_w_coordinates(triangle, example_exo, example_P):
    ss = compute_M(triangle, None, example_P @ example_exo.Gamma)
    np.testing.assert_allclose(ss.M, [[1, 2 / 3, 0], [0, 1 / 3, 0], [0, 0, 0]], atol=1e-15)


def test_plausible_wrong_rows_do_not_solve_balance(triangle, example_exo, example_P):
    wrong = np.array([[2 / 3, 1 / 3, 0], [1 / 3, -1 / 3, 0], [0, 0, 0]])
    Y = averaging_matrix(3)
    residual = np.abs(triangle.B @ wrong - Y @ example_P @ example_exo.Gamma).max()
    assert residual > 0.1


def test_averaging_matrix_properties():
    Y = averaging_matrix(5)
    np.testing.assert_allclose(Y @ np.ones(5), 0, atol=1e-15)
    np.testing.assert_allclose(Y @ Y, -Y, atol=1e-15)


def test_zero_input_gives_zero_feedforward(triangle):
    ss = compute_M(triangle, None, np.zeros((3, 2)))
    assert not ss.M.any()


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_feedforward_solves_balance(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n_max=8)
    P_eff = rng.normal(size=(g.n, int(rng.integers(1, 5))))
    ss = compute_M(g, None, P_eff)
    np.testing.assert_allclose(g.B @ ss.M, averaging_matrix(g.n) @ P_eff, atol=1e-10)
    assert not ss.M[list(ss.partition.b_indices)].any()
    # steady flows only change the disagreement, never the total
    np.testing.assert_allclose(np.ones(g.n) @ g.B @ ss.M, 0, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_nonlinear_feedforward(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng)
    P_eff = rng.normal(size=(g.n, 2))
    nss = compute_M_nonlinear(g, None, P_eff)
    Y = averaging_matrix(g.n)
    np.testing.assert_allclose(g.B @ nss.M1, Y, atol=1e-10)
    np.testing.assert_array_equal(nss.M2, compute_M(g, None, P_eff).M)


def test_reference_trajectory(triangle, example_exo, example_P):
    P_eff = example_P @ example_exo.Gamma
    ref = reference(triangle, compute_M(triangle, None, P_eff), example_exo, P_eff, 0.5)
    t = np.array([0.0, 1.0, np.pi])
    xs, lam, imb = ref(t)
    # net inflow is sin(t), averaged over three nodes
    np.testing.assert_allclose(imb, (1 - np.cos(t)) / 3, atol=1e-14)
    np.testing.assert_allclose(xs, 0.5 + imb, atol=1e-14)
    np.testing.assert_allclose(lam, example_exo.state(t) @ ref.M.T, atol=1e-14)


def test_integrate_x_star_linear_limit(example_exo, example_P):
    # with f = 0 the reference is the cumulative imbalance in closed form
    P_eff = example_P @ example_exo.Gamma
    t, xs = integrate_x_star(lambda x: np.zeros_like(x), example_exo, P_eff, 0.0, 10.0, 1e-2)
    np.testing.assert_allclose(xs, (1 - np.cos(t)) / 3, atol=1e-10)


def test_integrate_x_star_step_convergence():
    # x' = -x^3 from 1 has solution 1/sqrt(1 + 2t)
    e = random_exosystem(np.random.default_rng(0), 1)
    P0 = np.zeros((3, e.p))
    errs = []
    for h in (0.04, 0.02):
        t, xs = integrate_x_star([lambda x: -x ** 3] * 3, e, P0, 1.0, 4.0, h)
        errs.append(abs(xs[-1] - 1 / np.sqrt(1 + 2 * t[-1])))
    assert errs[1] < errs[0] / 10


@pytest.mark.parametrize("n", [2, 3, 7])
def test_build_Q(n):
    Q = build_Q(n)
    np.testing.assert_allclose(Q @ Q.T, np.eye(n - 1), atol=1e-14)
    np.testing.assert_allclose(Q @ np.ones(n), 0, atol=1e-14)
