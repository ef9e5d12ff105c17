import numpy as np
import pytest

from flowbalance import (AssumptionViolation, Constraint, NodeDynamics, NodeFunction,
                         PlantConfig, ScenarioError, project_rhs, rhs, saturate)


def test_node_functions():
    x = np.array([-2.0, 0.0, 1.5])
    np.testing.assert_allclose(NodeFunction("neg_linear", 2.0)(x), -2 * x)
    np.testing.assert_allclose(NodeFunction("neg_cubic")(x), -x ** 3)
    np.testing.assert_allclose(NodeFunction("neg_tanh", 0.5)(x), -0.5 * np.tanh(x))
    with pytest.raises(ScenarioError):
        NodeFunction("square")
    with pytest.raises(ScenarioError):
        NodeFunction("neg_cubic", -1.0)


def test_mixed_dynamics_vectorized():
    dyn = NodeDynamics("gradient", (NodeFunction("neg_linear"), NodeFunction("neg_cubic", 2.0),
                                    NodeFunction("neg_tanh")))
    x = np.array([[1.0, 2.0, 3.0], [0.5, -1.0, 0.0]])
    expected = np.array([[-1.0, -16.0, -np.tanh(3.0)], [-0.5, 2.0, 0.0]])
    np.testing.assert_allclose(dyn.f(x), expected)
    assert not dyn.is_linear and not dyn.is_identical
    assert NodeDynamics.identical("neg_cubic", 1.0, 3).is_identical
    assert NodeDynamics("gradient", (NodeFunction("neg_cubic", 0.0),) * 2).is_linear


def test_rhs_and_saturation(triangle):
    plant = PlantConfig(triangle, np.eye(3)[:, :1], constraint=Constraint("edge_saturation", 1.0))
    x = np.zeros(3)
    lam = np.array([2.0, -0.5, -3.0])
    np.testing.assert_allclose(saturate(lam, 1.0), [1.0, -0.5, -1.0])
    out = rhs(plant, x, lam, np.array([0.25]))
    np.testing.assert_allclose(out, triangle.B @ [1.0, -0.5, -1.0] + [0.25, 0, 0])


def test_plant_validation(triangle):
    with pytest.raises(ScenarioError):
        PlantConfig(triangle, np.ones((2, 1)))
    with pytest.raises(ScenarioError):
        PlantConfig(triangle, np.ones((3, 1)), NodeDynamics.identical("neg_cubic", 1.0, 2))
    with pytest.raises(ScenarioError):
        PlantConfig(triangle, np.ones((3, 1)), NodeDynamics.identical("neg_cubic", 1.0, 3),
                    Constraint("positivity"))
    with pytest.raises(AssumptionViolation):
        Constraint("edge_saturation", 0.0)


def test_projection_only_on_boundary():
    x = np.array([0.0, 0.0, 1.0])
    zeta = np.array([-1.0, 2.0, -3.0])
    np.testing.assert_array_equal(project_rhs(x, zeta), [0.0, 2.0, -3.0])
    with pytest.raises(Exception):
        project_rhs(np.array([-1.0, 0.0, 0.0]), zeta)
