import numpy as np
import pytest

from flowbalance import SignalSpec, build_graph, build_structured

TRIANGLE_EDGES = [(2, 1), (3, 2), (1, 3)]


@pytest.fixture
def triangle():
    return build_graph(3, TRIANGLE_EDGES)


@pytest.fixture
def example_exo():
    """Supply ``2 + sin t`` at node 1, constant demand 2 at node 2."""
    return build_structured([SignalSpec(2.0, ((1.0, 1.0, 0.0),)), SignalSpec(2.0)],
                            share_constant_mode=True)


@pytest.fixture
def example_P():
    return np.array([[1.0, 0.0], [0.0, -1.0], [0.0, 0.0]])
