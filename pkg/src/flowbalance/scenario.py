"""JSON scenario files: parsing, validation and assembly of the closed loop.

A scenario looks like::

    {
      "name": "triangle",
      "graph": {"nodes": 3, "edges": [[2, 1], [3, 2], [1, 3]]},
      "P": [[1, 0], [0, -1], [0, 0]],
      "exosystem": {"channels": [...], "share_constant_mode": true},
      "dynamics": {"kind": "linear"},
      "constraint": {"type": "none"},
      "controller": {"type": "internal_model", "K": [1, 1, 1], "eta0": "zero"},
      "x0": [1, 0, -1],
      "sim": {"step": 0.001, "horizon": 200, "record_stride": 10},
      "balanced": false
    }

Node indices are 1-based. ``P`` maps the disturbance channels ``d`` to the
nodes; the plant uses ``P_eff = P @ Gamma``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import exosystem as exo_mod
from .controller import identical_nodes_bank, saturation_controller, synthesize_bank
from .engine import BALANCE_TOL, SimConfig
from .errors import AssumptionViolation, ScenarioError
from .graph import NetworkGraph, build_graph, partition_edges
from .plant import Constraint, NodeDynamics, NodeFunction, PlantConfig
from .synthesis import compute_M, compute_M_nonlinear

__all__ = ["Scenario", "load_scenario", "parse_scenario", "bundled", "imbalance_sup",
           "DEFAULT_TOLERANCES"]

DEFAULT_TOLERANCES = {
    "z_tail_sup": 1e-5,
    "lyap_violations": 0,
    "mass_drift": 1e-8,
    "min_state": 0.0,
}


def imbalance_sup(P_eff, e, horizon: float = 200.0, samples: int = 4001) -> float:
    """``max |1^T P_eff w(t)|`` over sampled times in ``[0, horizon]``."""
    t = np.linspace(0.0, horizon, samples)
    return float(np.abs(e.state(t) @ np.asarray(P_eff).sum(axis=0)).max(initial=0.0))


@dataclass(eq=False)
class Scenario:
    name: str
    graph: NetworkGraph
    P: np.ndarray
    exo: object
    plant: PlantConfig
    controller: dict
    x0: np.ndarray
    sim: SimConfig
    balanced: bool
    x_star0: float
    expected_H: np.ndarray | None = None
    tolerances: dict = field(default_factory=dict)

    @property
    def P_eff(self) -> np.ndarray:
        return self.plant.P_eff

    def steady_state(self):
        if self.plant.dynamics.is_linear:
            return compute_M(self.graph, self.graph.partition, self.P_eff)
        return compute_M_nonlinear(self.graph, self.graph.partition, self.P_eff)

    def law(self):
        """Controller bank or saturation law described by the scenario."""
        ctrl = self.controller
        kind = ctrl.get("type", "internal_model")
        K = ctrl.get("K")
        eta0 = ctrl.get("eta0", "zero")
        if isinstance(eta0, str):
            if eta0 == "zero":
                eta0 = None
            elif eta0 == "w0":
                eta0 = self.exo.w0
            else:
                raise ScenarioError(f"controller.eta0: expected 'zero', 'w0' or a vector, got {eta0!r}")
        if kind == "internal_model":
            if not self.plant.dynamics.is_linear:
                raise ScenarioError("internal_model controller needs linear nodes; use 'identical_nodes'")
            ss = compute_M(self.graph, self.graph.partition, self.P_eff)
            return synthesize_bank(ss, self.exo, K, eta0, ctrl.get("H"))
        if kind == "identical_nodes":
            nss = compute_M_nonlinear(self.graph, self.graph.partition, self.P_eff)
            return identical_nodes_bank(nss, self.exo, self.plant, K, eta0)
        if kind == "saturation":
            if self.plant.constraint.type != "edge_saturation":
                raise ScenarioError("saturation controller needs an edge_saturation constraint")
            est = ctrl.get("estimator", {})
            ss = compute_M(self.graph, self.graph.partition, self.P_eff)
            return saturation_controller(ss, self.exo, self.plant.constraint.c,
                                         gamma=float(ctrl.get("gamma", 1.0)),
                                         e0=est.get("e0"), rho=float(est.get("rho", 1.0)),
                                         graph=self.graph)
        raise ScenarioError(f"controller.type: unknown controller {kind!r}")

    def with_sim(self, **overrides) -> "Scenario":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        return replace(self, sim=replace(self.sim, **overrides))


def _matrix(value, name, shape=None):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{name}: expected a numeric array")
    if shape is not None and arr.shape != shape:
        raise ScenarioError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ScenarioError(f"{name}: non-finite entries")
    return arr


def _require(spec, key, where="scenario"):
    if key not in spec:
        raise ScenarioError(f"{where}: missing field {key!r}")
    return spec[key]


def parse_scenario(spec: dict) -> Scenario:
    """Validate a scenario dictionary and build the plant.

    Raises :class:`ScenarioError` for malformed input and
    :class:`AssumptionViolation` when the graph is disconnected, the
    exosystem is not skew-symmetric, gains are not positive or the
    capacity scenario is infeasible.
    """
    if not isinstance(spec, dict):
        raise ScenarioError("scenario: expected a JSON object")
    gspec = _require(spec, "graph")
    graph = build_graph(_require(gspec, "nodes", "graph"), _require(gspec, "edges", "graph"))
    partition_edges(graph)  # connectivity
    n = graph.n

    exo = exo_mod.from_dict(_require(spec, "exosystem"))
    P = _matrix(spec.get("P", np.eye(n, exo.q)), "P")
    P = P.reshape(n, -1) if P.ndim < 2 else P
    if P.shape != (n, exo.q):
        raise ScenarioError(f"P: expected shape {(n, exo.q)}, got {P.shape}")

    dspec = spec.get("dynamics", {"kind": "linear"})
    kind = dspec.get("kind", "linear")
    if kind == "gradient":
        nodes = _require(dspec, "nodes", "dynamics")
        if len(nodes) == 1 and n > 1:
            nodes = nodes * n
        try:
            funcs = tuple(NodeFunction(d["fn"], float(d.get("k", 1.0))) for d in nodes)
        except KeyError:
            raise ScenarioError("dynamics.nodes: each entry needs 'fn'")
        dynamics = NodeDynamics("gradient", funcs)
    else:
        dynamics = NodeDynamics(kind)

    cspec = spec.get("constraint", {"type": "none"})
    constraint = Constraint(cspec.get("type", "none"),
                            None if cspec.get("c") is None else float(cspec["c"]))
    plant = PlantConfig(graph, P @ exo.Gamma, dynamics, constraint)

    x0 = _matrix(_require(spec, "x0"), "x0", (n,))
    sspec = spec.get("sim", {})
    method = sspec.get("method", "projected_euler" if constraint.type == "positivity" else "rk4")
    sim = SimConfig(step=float(sspec.get("step", 1e-3)), horizon=float(sspec.get("horizon", 100.0)),
                    record_stride=int(sspec.get("record_stride", 1)), method=method,
                    overflow_guard=float(sspec.get("overflow_guard", 1e9)),
                    substeps=int(sspec.get("substeps", 10)))

    scale = max(1.0, np.abs(plant.P_eff).max(initial=0.0) * np.abs(exo.w0).max(initial=0.0))
    balanced = imbalance_sup(plant.P_eff, exo) <= BALANCE_TOL * scale
    if "balanced" in spec and bool(spec["balanced"]) != balanced:
        raise ScenarioError(f"balanced: declared {bool(spec['balanced'])} but the demand/supply "
                            f"is {'balanced' if balanced else 'unbalanced'}")
    if constraint.type == "positivity" and not balanced:
        raise ScenarioError("positivity constraint is only supported for balanced demand/supply")

    ctrl = spec.get("controller", {"type": "internal_model"})
    if ctrl.get("K") is not None:
        K = _matrix(ctrl["K"], "controller.K")
        if K.ndim == 0:
            K = np.full(graph.m, float(K))
        if K.shape != (graph.m,):
            raise ScenarioError(f"controller.K: expected {graph.m} entries")
        if not (K > 0).all():
            raise AssumptionViolation("controller.K: output gains must be strictly positive")
        ctrl = dict(ctrl, K=K)
    if ctrl.get("H") is not None:
        ctrl = dict(ctrl, H=_matrix(ctrl["H"], "controller.H", (graph.m, exo.p)))
    if isinstance(ctrl.get("eta0"), list):
        ctrl = dict(ctrl, eta0=_matrix(ctrl["eta0"], "controller.eta0", (exo.p,)))

    expected_H = spec.get("expected_H")
    if expected_H is not None:
        expected_H = _matrix(expected_H, "expected_H")
    if constraint.type == "positivity" and (x0 < 0).any():
        raise ScenarioError("x0: positivity constraint requires non-negative initial states")

    sc = Scenario(name=str(spec.get("name", "scenario")), graph=graph, P=P, exo=exo, plant=plant,
                  controller=ctrl, x0=x0, sim=sim, balanced=balanced,
                  x_star0=float(spec.get("x_star0", x0.mean())), expected_H=expected_H,
                  tolerances=dict(DEFAULT_TOLERANCES, **spec.get("tolerances", {})))
    sc.law()  # gains, feasibility and controller structure are checked up front
    return sc


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file; JSON errors carry line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}")
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    try:
        return parse_scenario(spec)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}")


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``bundled("triangle")``."""
    ref = resources.files("flowbalance") / "scenarios" / f"{name}.json"
    return Path(str(ref))
