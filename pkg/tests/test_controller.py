import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowbalance import (AssumptionViolation, Constraint, NodeDynamics, PlantConfig,
                         ScenarioError, compute_M, compute_M_nonlinear, controller_step,
                         identical_nodes_bank, mu, saturation_controller, synthesize_bank)
from flowbalance.verify import random_connected_graph, random_exosystem, run_suite


def test_example_bank(triangle, example_exo, example_P):
    bank = synthesize_bank(compute_M(triangle, None, example_P @ example_exo.Gamma), example_exo)
    assert [c["kind"] for c in bank.table()] == ["dynamic", "dynamic", "static"]
    assert bank.n_eta == 6
    assert bank.S_bar.shape == (6, 6) and bank.H_bar.shape == (3, 6)
    np.testing.assert_array_equal(bank.K, 1.0)


def test_zero_input_gives_static_bank(triangle, example_exo):
    bank = synthesize_bank(compute_M(triangle, None, np.zeros((3, 3))), example_exo)
    assert all(c["kind"] == "static" for c in bank.table())
    assert bank.n_eta == 0


def test_gains_must_be_positive(triangle, example_exo, example_P):
    ss = compute_M(triangle, None, example_P @ example_exo.Gamma)
    with pytest.raises(AssumptionViolation):
        synthesize_bank(ss, example_exo, K=[1.0, 0.0, 1.0])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_controller_is_distributed(seed):
    """Edge k's outputs depend on z_k and eta_k only."""
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng)
    e = random_exosystem(rng, 2)
    bank = synthesize_bank(compute_M(g, None, rng.normal(size=(g.n, e.p))), e,
                           K=rng.uniform(0.5, 2.0, g.m))
    eta = rng.normal(size=bank.n_eta)
    z = rng.normal(size=g.m)
    eta_dot, lam = controller_step(bank, eta, z)
    k = int(rng.integers(g.m))
    z2 = z.copy()
    z2[k] += 1.0
    eta_dot2, lam2 = controller_step(bank, eta, z2)
    changed = np.flatnonzero(lam2 != lam)
    assert set(changed) <= {k}
    E, E2 = eta_dot.reshape(-1, e.p), eta_dot2.reshape(-1, e.p)
    rows = np.flatnonzero((E != E2).any(axis=1))
    assert set(bank.dynamic[rows]) <= {k}
    # and the stacked form agrees with per-edge controllers
    for j, kk in enumerate(bank.dynamic):
        d, l = bank.controllers[kk].step(eta.reshape(-1, e.p)[j], z[kk], bank.K[kk])
        np.testing.assert_allclose(d, E[j], atol=1e-14)
        assert l == pytest.approx(lam[kk], abs=1e-14)


def test_reproduction_suite_passes():
    res = run_suite("lemma3", seed=1, cases=5)
    assert res["passed"], res


def test_identical_nodes_bank_rejects_mixed_dynamics(triangle, example_exo):
    P_eff = np.array([[1.0], [-1.0], [0.0]]) @ example_exo.Gamma[:1]
    plant = PlantConfig(triangle, P_eff, NodeDynamics(
        "gradient", tuple(NodeDynamics.identical("neg_cubic", k, 1).f_list[0] for k in (1, 2, 3))))
    with pytest.raises(AssumptionViolation):
        identical_nodes_bank(compute_M_nonlinear(triangle, None, P_eff), example_exo, plant)


def test_identical_nodes_bank_rejects_unbalanced(triangle, example_exo, example_P):
    P_eff = example_P @ example_exo.Gamma
    plant = PlantConfig(triangle, P_eff, NodeDynamics.identical("neg_cubic", 1.0, 3))
    with pytest.raises(AssumptionViolation):
        identical_nodes_bank(compute_M_nonlinear(triangle, None, P_eff), example_exo, plant)


def test_mu_properties():
    s = np.linspace(-50, 50, 1001)
    v = mu(s, 2.0, 3.0)
    assert mu(0.0, 2.0, 3.0) == 0.0
    assert (np.diff(v) >= 0).all()
    assert (np.abs(v) < 0.5 + 1e-15).all()


def test_saturation_feasibility(triangle, example_exo, example_P):
    ss = compute_M(triangle, None, example_P @ example_exo.Gamma)
    bound = example_exo.amplitude_bound(ss.M).max()
    with pytest.raises(AssumptionViolation):
        saturation_controller(ss, example_exo, bound, graph=triangle)
    sc = saturation_controller(ss, example_exo, 2 * bound, e0=np.ones(3), rho=2.0, graph=triangle)
    np.testing.assert_allclose(sc.estimate(30.0), example_exo.state(30.0), atol=1e-20)
    with pytest.raises(ScenarioError):
        saturation_controller(ss, example_exo, 2 * bound, e0=np.ones(2), graph=triangle)
