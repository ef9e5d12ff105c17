"""Node dynamics of the flow network and the constraint variants.

``x' = f(x) + B lambda + P_eff w`` with ``f = 0`` for the linear network,
or a non-increasing scalar map per node (gradient of a concave potential).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, ScenarioError
from .graph import NetworkGraph

__all__ = ["NodeFunction", "NodeDynamics", "Constraint", "PlantConfig",
           "rhs", "project_rhs", "saturate", "GRADIENT_LIBRARY"]

GRADIENT_LIBRARY = ("neg_linear", "neg_cubic", "neg_tanh")


@dataclass(frozen=True)
class NodeFunction:
    """``f(x) = -k*x``, ``-k*x**3`` or ``-k*tanh(x)``, ``k >= 0``."""

    fn: str
    k: float = 1.0

    def __post_init__(self):
        if self.fn not in GRADIENT_LIBRARY:
            raise ScenarioError(f"unknown node function {self.fn!r}; "
                                f"expected one of {GRADIENT_LIBRARY}")
        if not self.k >= 0:
            raise ScenarioError(f"node function gain must be >= 0, got {self.k}")

    def __call__(self, x):
        if self.fn == "neg_linear":
            return -self.k * x
        if self.fn == "neg_cubic":
            return -self.k * x ** 3
        return -self.k * np.tanh(x)


@dataclass(frozen=True, eq=False)
class NodeDynamics:
    kind: str = "linear"
    f_list: tuple[NodeFunction, ...] = ()
    _gains: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("linear", "gradient"):
            raise ScenarioError(f"unknown dynamics kind {self.kind!r}")
        if self.kind == "linear" and self.f_list:
            raise ScenarioError("linear dynamics take no node functions")
        gains = np.zeros((len(GRADIENT_LIBRARY), len(self.f_list)))
        for i, f in enumerate(self.f_list):
            gains[GRADIENT_LIBRARY.index(f.fn), i] = f.k
        object.__setattr__(self, "_gains", gains)

    @classmethod
    def identical(cls, fn: str, k: float, n: int) -> "NodeDynamics":
        return cls("gradient", (NodeFunction(fn, k),) * n)

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear" or not self._gains.any()

    @property
    def is_identical(self) -> bool:
        return self.kind == "linear" or len(set(self.f_list)) <= 1

    def f(self, x):
        """Vector field ``f(x)``; broadcasts over leading axes of ``x``."""
        if self.kind == "linear":
            return np.zeros_like(x)
        lin, cub, tnh = self._gains
        out = -lin * x
        if cub.any():
            out = out - cub * x ** 3
        if tnh.any():
            out = out - tnh * np.tanh(x)
        return out


@dataclass(frozen=True)
class Constraint:
    """``none``, ``positivity`` or ``edge_saturation`` with capacity ``c``."""

    type: str = "none"
    c: float | None = None

    def __post_init__(self):
        if self.type not in ("none", "positivity", "edge_saturation"):
            raise ScenarioError(f"unknown constraint type {self.type!r}")
        if self.type == "edge_saturation" and not (self.c is not None and self.c > 0):
            raise AssumptionViolation(f"edge capacity must be positive, got {self.c}")


@dataclass(frozen=True, eq=False)
class PlantConfig:
    graph: NetworkGraph
    P_eff: np.ndarray
    dynamics: NodeDynamics = NodeDynamics()
    constraint: Constraint = Constraint()

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P_eff, dtype=float))
        if P.shape[0] != self.graph.n:
            raise ScenarioError(f"P_eff has {P.shape[0]} rows, expected {self.graph.n}")
        object.__setattr__(self, "P_eff", P)
        if self.dynamics.kind == "gradient" and len(self.dynamics.f_list) != self.graph.n:
            raise ScenarioError(f"gradient dynamics need {self.graph.n} node functions, "
                                f"got {len(self.dynamics.f_list)}")
        if self.constraint.type == "positivity" and not self.dynamics.is_linear:
            raise ScenarioError("positivity constraint is only supported for linear node dynamics")

    def inflow_imbalance(self, w):
        """``1^T P_eff w``; zero for balanced demand/supply."""
        return w @ self.P_eff.sum(axis=0)


def saturate(lam, c: float):
    """Componentwise clamp of the edge flows to ``[-c, c]``."""
    return np.clip(lam, -c, c)


def rhs(cfg: PlantConfig, x, lam, w):
    """``f(x) + B sat(lambda) + P_eff w``; saturation only under ``edge_saturation``.

    The positivity projection is applied separately by :func:`project_rhs`.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (np.isfinite(x).all() and np.isfinite(lam).all() and np.isfinite(w).all()):
        raise ScenarioError("non-finite plant input")
    if cfg.constraint.type == "edge_saturation":
        lam = saturate(lam, cfg.constraint.c)
    return cfg.dynamics.f(x) + cfg.graph.B @ lam + cfg.P_eff @ w


def project_rhs(x, zeta):
    """Zero the components of ``zeta`` that would push ``x`` below the orthant.

    ``x`` must be componentwise non-negative.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if (x < 0).any():
        raise ScenarioError(f"projection requires x >= 0, got min {x.min():.3g}")
    return np.where((x == 0) & (zeta < 0), 0.0, zeta)
