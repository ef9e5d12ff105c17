"""Internal-model edge regulators for load balancing in flow networks.

Build a graph and an exosystem, compute the steady-state feedforward,
synthesize the per-edge controllers and simulate the closed loop::

    >>> import numpy as np
    >>> from flowbalance import *
    >>> g = build_graph(3, [(2, 1), (3, 2), (1, 3)])
    >>> e = build_structured([SignalSpec(2.0, ((1.0, 1.0, 0.0),)), SignalSpec(2.0)],
    ...                      share_constant_mode=True)
    >>> P_eff = np.array([[1, 0], [0, -1], [0, 0]]) @ e.Gamma
    >>> ss = compute_M(g, None, P_eff)
    >>> bank = synthesize_bank(ss, e)
    >>> traj = simulate(PlantConfig(g, P_eff), e, bank, [1, 0, -1], SimConfig(1e-2, 10.0))
"""

from .controller import (ControllerBank, EdgeController, SaturationController, controller_step,
                         identical_nodes_bank, mu, saturation_controller, saturation_law,
                         synthesize_bank)
from .engine import (CertificateReport, SimConfig, Trajectory, check_conservation,
                     check_tracking, lyapunov, simulate, write_csv)
from .errors import AssumptionViolation, FlowBalanceError, NumericalFailure, ScenarioError
from .exosystem import Exosystem, SignalSpec, build_raw, build_structured, evaluate
from .graph import EdgePartition, NetworkGraph, build_graph, is_connected, partition_edges
from .plant import (Constraint, NodeDynamics, NodeFunction, PlantConfig, project_rhs, rhs,
                    saturate)
from .scenario import Scenario, bundled, load_scenario, parse_scenario
from .synthesis import (NonlinearSteadyState, ReferenceTrajectory, SteadyState, build_Q,
                        compute_M, compute_M_nonlinear, integrate_x_star, reference)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
