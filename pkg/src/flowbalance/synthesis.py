"""Steady-state flows, feedforward matrices and reference trajectories.

For a connected graph the regulated steady state has all nodes equal,
``x = 1 x_star(t)``, where ``x_star`` integrates the average net inflow,
and the steady flows ``lambda_w = M w`` solve ``B lambda_w = Y P_eff w``
with ``Y = 11^T/n - I``. The redundant (non-tree) edges carry zero
steady flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import FlowBalanceError, NumericalFailure, ScenarioError
from .graph import EdgePartition, NetworkGraph, partition_edges

__all__ = ["SteadyState", "ReferenceTrajectory", "NonlinearSteadyState",
           "averaging_matrix", "compute_M", "reference", "compute_M_nonlinear",
           "integrate_x_star", "build_Q", "RESIDUAL_TOL"]

RESIDUAL_TOL = 1e-10


def averaging_matrix(n: int) -> np.ndarray:
    """``Y = 1 1^T / n - I``."""
    return np.full((n, n), 1.0 / n) - np.eye(n)


@dataclass(frozen=True, eq=False)
class SteadyState:
    Y: np.ndarray
    M: np.ndarray
    partition: EdgePartition
    residual: float


@dataclass(frozen=True, eq=False)
class NonlinearSteadyState:
    M1: np.ndarray
    M2: np.ndarray
    partition: EdgePartition
    residual: float
    x_star_path: tuple | None = None


def _tree_solve(g: NetworkGraph, part: EdgePartition, rhs: np.ndarray) -> np.ndarray:
    """Solve ``B_a X_a = rhs`` in the least-squares sense; zero rows off the tree."""
    a = list(part.a_indices)
    X = np.zeros((g.m, rhs.shape[1]))
    if a:
        Ba = g.B[:, a]
        cho = scipy.linalg.cho_factor(Ba.T @ Ba)
        X[a] = scipy.linalg.cho_solve(cho, Ba.T @ rhs)
    return X


def _clean(X, target):
    # drop roundoff so that zero feedforward rows are exactly zero
    scale = max(1.0, np.abs(target).max(initial=0.0))
    X[np.abs(X) < 64 * np.finfo(float).eps * scale] = 0.0
    return X


def compute_M(g: NetworkGraph, part: EdgePartition | None, P_eff) -> SteadyState:
    """Feedforward matrix ``M`` with ``lambda_w = M w``.

    Parameters
    ----------
    g : NetworkGraph
        Connected graph.
    part : EdgePartition or None
        Tree / redundant split; computed from ``g`` when None.
    P_eff : (n, p) array_like
        Disturbance input matrix in exosystem-state coordinates
        (``P @ Gamma``).

    Returns
    -------
    SteadyState
        ``M`` has zero rows at ``part.b_indices`` and satisfies
        ``B M = Y P_eff``.
    """
    P_eff = np.atleast_2d(np.asarray(P_eff, dtype=float))
    if P_eff.shape[0] != g.n:
        raise ScenarioError(f"P_eff has {P_eff.shape[0]} rows, expected {g.n}")
    if part is None:
        part = partition_edges(g)
    Y = averaging_matrix(g.n)
    target = Y @ P_eff
    M = _clean(_tree_solve(g, part, target), target)
    residual = float(np.abs(g.B @ M - target).max()) if target.size else 0.0
    if residual > RESIDUAL_TOL * max(1.0, np.abs(target).max(initial=0.0)):
        raise FlowBalanceError(f"feedforward residual {residual:.3g} too large; "
                               "edge partition is not a spanning tree")
    return SteadyState(Y, M, part, residual)


class ReferenceTrajectory:
    """Common node trajectory ``x_star(t)`` and steady flows of the linear network.

    Calling the object with ``t`` (scalar or array) returns
    ``(x_star, lambda_w, imbalance)`` where ``imbalance`` is the
    cumulative average net inflow ``int_0^t 1^T P_eff w / n``.
    """

    def __init__(self, ss: SteadyState, exo, P_eff, x_star0: float = 0.0):
        P_eff = np.atleast_2d(np.asarray(P_eff, dtype=float))
        self.M = ss.M
        self.exo = exo
        self.x_star0 = float(x_star0)
        self.inflow_row = P_eff.sum(axis=0) / P_eff.shape[0]

    def imbalance(self, t):
        return self.exo.integral(t) @ self.inflow_row

    def x_star(self, t):
        return self.x_star0 + self.imbalance(t)

    def flow(self, t):
        return self.exo.state(t) @ self.M.T

    def __call__(self, t):
        imb = self.imbalance(t)
        return self.x_star0 + imb, self.flow(t), imb


def reference(g: NetworkGraph, ss: SteadyState, e, P_eff, x_star0: float = 0.0) -> ReferenceTrajectory:
    P_eff = np.atleast_2d(np.asarray(P_eff, dtype=float))
    if P_eff.shape != (g.n, e.p):
        raise ScenarioError(f"P_eff shape {P_eff.shape}, expected {(g.n, e.p)}")
    return ReferenceTrajectory(ss, e, P_eff, x_star0)


def compute_M_nonlinear(g: NetworkGraph, part: EdgePartition | None, P_eff) -> NonlinearSteadyState:
    """Steady flows ``lambda_w = M1 f(x_star 1) + M2 w`` for nonlinear nodes.

    Substituting ``x = x_star 1`` into ``x' = f(x) + B lambda + P_eff w``
    and removing the common mode gives ``B lambda_w = Y f + Y P_eff w``,
    so ``M1`` solves ``B_a M1 = Y`` and ``M2`` coincides with the linear
    feedforward matrix.
    """
    P_eff = np.atleast_2d(np.asarray(P_eff, dtype=float))
    if part is None:
        part = partition_edges(g)
    Y = averaging_matrix(g.n)
    M1 = _clean(_tree_solve(g, part, Y), Y)
    lin = compute_M(g, part, P_eff)
    res1 = float(np.abs(g.B @ M1 - Y).max())
    if res1 > RESIDUAL_TOL:
        raise FlowBalanceError(f"M1 residual {res1:.3g} too large")
    return NonlinearSteadyState(M1, lin.M, part, max(res1, lin.residual))


def integrate_x_star(f_list, e, P_eff, x_star0: float, horizon: float, step: float,
                     overflow_guard: float = 1e9):
    """RK4 solution of ``x' = mean_i f_i(x) + 1^T P_eff w(t) / n``.

    Parameters
    ----------
    f_list : callable or sequence of callables
        Node dynamics. A single callable must map an array of node states
        to the vector ``f(x)``; a sequence gives one scalar map per node.
    e : Exosystem
    P_eff : (n, p) array_like
    x_star0 : float
    horizon, step : float
        ``step > 0``; samples are returned at every step.

    Returns
    -------
    (t, x_star) : tuple of ndarrays
    """
    if step <= 0:
        raise ScenarioError("step must be positive")
    P_eff = np.atleast_2d(np.asarray(P_eff, dtype=float))
    n = P_eff.shape[0]
    row = P_eff.sum(axis=0) / n
    if callable(f_list):
        fbar = lambda x: float(np.mean(f_list(np.full(n, x))))
    else:
        fbar = lambda x: sum(f(x) for f in f_list) / len(f_list)

    n_steps = int(round(horizon / step))
    t = step * np.arange(n_steps + 1)
    half = t[:-1] + 0.5 * step
    u = e.state(t) @ row
    uh = e.state(half) @ row
    xs = np.empty(n_steps + 1)
    x = xs[0] = float(x_star0)
    for k in range(n_steps):
        k1 = fbar(x) + u[k]
        k2 = fbar(x + 0.5 * step * k1) + uh[k]
        k3 = fbar(x + 0.5 * step * k2) + uh[k]
        k4 = fbar(x + step * k3) + u[k + 1]
        x = x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(x) or abs(x) > overflow_guard:
            raise NumericalFailure(
                f"reference trajectory escapes at t = {t[k + 1]:.6g}", time=float(t[k + 1]))
        xs[k + 1] = x
    return t, xs


def build_Q(n: int) -> np.ndarray:
    """Orthonormal basis of the complement of ``1_n`` (Helmert rows)."""
    if n < 2:
        raise ScenarioError("build_Q needs n >= 2")
    return scipy.linalg.helmert(n)
