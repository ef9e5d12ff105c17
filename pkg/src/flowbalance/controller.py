"""Edge regulators.

Each spanning-tree edge ``k`` with a nonzero feedforward row ``H_k`` runs
an internal model of the exosystem::

    eta_k' = S eta_k - H_k^T z_k
    lambda_k = H_k eta_k - K_k z_k

and every other edge applies the static law ``lambda_k = -K_k z_k``. Edge
``k`` only reads its own relative measurement ``z_k = x_head - x_tail``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, ScenarioError

__all__ = ["EdgeController", "ControllerBank", "SaturationController",
           "synthesize_bank", "controller_step", "identical_nodes_bank",
           "saturation_controller", "saturation_law", "mu"]


@dataclass(frozen=True, eq=False)
class EdgeController:
    kind: str
    S: np.ndarray | None = None
    H: np.ndarray | None = None
    eta0: np.ndarray | None = None

    def step(self, eta, z_k, K_k=1.0):
        """``(eta', lambda_k)`` for this edge alone."""
        if self.kind == "static":
            return None, -K_k * z_k
        return self.S @ eta - self.H * z_k, self.H @ eta - K_k * z_k


@dataclass(frozen=True, eq=False)
class ControllerBank:
    """The ``m`` edge controllers plus the diagonal output gain ``K``."""

    controllers: tuple[EdgeController, ...]
    K: np.ndarray
    S: np.ndarray
    dynamic: np.ndarray = field(init=False)
    H_dyn: np.ndarray = field(init=False)

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float).reshape(-1)
        if K.shape != (len(self.controllers),):
            raise ScenarioError(f"K needs {len(self.controllers)} entries, got {K.size}")
        if not (K > 0).all():
            raise AssumptionViolation("output gains K must be strictly positive")
        object.__setattr__(self, "K", K)
        dyn = np.array([k for k, c in enumerate(self.controllers) if c.kind == "dynamic"], dtype=int)
        object.__setattr__(self, "dynamic", dyn)
        H = np.array([self.controllers[k].H for k in dyn]).reshape(len(dyn), self.p)
        object.__setattr__(self, "H_dyn", H)

    @property
    def m(self) -> int:
        return len(self.controllers)

    @property
    def p(self) -> int:
        return self.S.shape[0]

    @property
    def n_eta(self) -> int:
        return len(self.dynamic) * self.p

    @property
    def H(self) -> np.ndarray:
        """``m x p`` feedforward rows, zero for static edges."""
        H = np.zeros((self.m, self.p))
        H[self.dynamic] = self.H_dyn
        return H

    @property
    def S_bar(self) -> np.ndarray:
        return np.kron(np.eye(len(self.dynamic)), self.S)

    @property
    def H_bar(self) -> np.ndarray:
        """``m x n_eta`` stacked output matrix (block diagonal on dynamic edges)."""
        Hb = np.zeros((self.m, self.n_eta))
        for j, k in enumerate(self.dynamic):
            Hb[k, j * self.p:(j + 1) * self.p] = self.H_dyn[j]
        return Hb

    def eta0(self) -> np.ndarray:
        if not len(self.dynamic):
            return np.zeros(0)
        return np.concatenate([self.controllers[k].eta0 for k in self.dynamic])

    def table(self) -> list[dict]:
        return [{"edge": k + 1, "kind": c.kind, "K": float(self.K[k]),
                 "H": None if c.H is None else [float(v) for v in c.H]}
                for k, c in enumerate(self.controllers)]


def _make_bank(M, S, K, eta0, a_indices):
    m, p = M.shape
    K = np.ones(m) if K is None else np.broadcast_to(np.asarray(K, dtype=float), (m,))
    a = set(a_indices)
    ctrls = []
    for k in range(m):
        if k in a and np.any(M[k] != 0.0):
            e0 = np.zeros(p) if eta0 is None else np.asarray(eta0, dtype=float).reshape(p)
            ctrls.append(EdgeController("dynamic", S, M[k].copy(), e0))
        else:
            ctrls.append(EdgeController("static"))
    return ControllerBank(tuple(ctrls), K, S)


def synthesize_bank(ss, e, K=None, eta0=None, H=None) -> ControllerBank:
    """Internal-model bank from the steady state of the linear network.

    Parameters
    ----------
    ss : SteadyState
    e : Exosystem
        Its generator is copied into every dynamic controller.
    K : array_like, optional
        Positive diagonal output gains, default ones.
    eta0 : array_like, optional
        Initial internal-model state (length ``p``) shared by all dynamic
        edges; zero by default.
    H : array_like, optional
        ``m x p`` replacement for the computed feedforward rows. Meant for
        negative controls; tree edges with a zero row become static.
    """
    M = ss.M if H is None else np.atleast_2d(np.asarray(H, dtype=float))
    if M.shape[1] != e.p:
        raise ScenarioError(f"feedforward has {M.shape[1]} columns but exosystem dimension is {e.p}")
    return _make_bank(M, e.S, K, eta0, ss.partition.a_indices)


def controller_step(bank: ControllerBank, eta, z):
    """Stacked ``(eta', lambda)`` for relative measurements ``z``.

    Row ``j`` of the reshaped ``eta`` belongs to edge ``bank.dynamic[j]``
    and is updated from ``z`` at that edge only.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (bank.m,):
        raise ScenarioError(f"expected {bank.m} measurements, got shape {z.shape}")
    lam = -bank.K * z
    if not len(bank.dynamic):
        return np.zeros(0), lam
    E = np.asarray(eta, dtype=float).reshape(len(bank.dynamic), bank.p)
    zd = z[bank.dynamic]
    eta_dot = E @ bank.S.T - bank.H_dyn * zd[:, None]
    lam[bank.dynamic] += np.einsum("ij,ij->i", bank.H_dyn, E)
    return eta_dot.reshape(-1), lam


def identical_nodes_bank(nss, e, plant, K=None, eta0=None, horizon=100.0, samples=2001,
                    tol=1e-12) -> ControllerBank:
    """Bank for identical nonlinear nodes: internal models driven by ``M2``.

    Rejects non-identical node dynamics and demand/supply that is not
    balanced along sampled exosystem states.
    """
    if not plant.dynamics.is_identical:
        raise AssumptionViolation("internal-model realization needs identical node dynamics")
    t = np.linspace(0.0, horizon, samples)
    imb = np.abs(plant.inflow_imbalance(e.state(t))).max()
    if imb > tol:
        raise AssumptionViolation(f"demand/supply is not balanced (max |1^T P w| = {imb:.3g})")
    if nss.M2.shape[1] != e.p:
        raise ScenarioError("M2 and exosystem dimensions disagree")
    return _make_bank(nss.M2, e.S, K, eta0, nss.partition.a_indices)


def mu(s, c, gamma):
    """Edge damping ``(c/4) tanh(gamma s)``: increasing, zero at 0, range inside ``(-c/4, c/4)``."""
    return 0.25 * c * np.tanh(gamma * s)


@dataclass(frozen=True, eq=False)
class SaturationController:
    """Static law ``lambda = -mu(B^T x) + M w_hat`` for capacity-limited edges.

    ``w_hat(t) = w(t) + e0 exp(-rho t)`` stands in for a distributed
    estimator of the exosystem state.
    """

    B: np.ndarray
    M: np.ndarray
    exo: object
    c: float
    mu_gain: float = 1.0
    e0: np.ndarray | None = None
    rho: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise AssumptionViolation("edge capacity must be positive")
        if not self.mu_gain > 0:
            raise ScenarioError("mu gain must be positive")
        if not self.rho > 0:
            raise ScenarioError("estimator decay rate must be positive")
        e0 = np.zeros(self.exo.p) if self.e0 is None else np.asarray(self.e0, dtype=float)
        if e0.shape != (self.exo.p,):
            raise ScenarioError(f"estimator e0 needs {self.exo.p} entries")
        object.__setattr__(self, "e0", e0)

    def estimate(self, t, w=None):
        w = self.exo.state(t) if w is None else w
        return w + np.multiply.outer(np.exp(-self.rho * np.asarray(t)), self.e0)

    def command(self, x, t, w=None):
        z = np.asarray(x) @ self.B
        return -mu(z, self.c, self.mu_gain) + self.estimate(t, w) @ self.M.T


def saturation_controller(ss, e, c, gamma=1.0, e0=None, rho=1.0, B=None, graph=None):
    """Build a :class:`SaturationController`, checking ``sup_t ||M w(t)||_inf < c``.

    The bound is the sum of per-block amplitudes, valid for all ``t >= 0``.
    """
    if B is None:
        B = graph.B
    bound = e.amplitude_bound(ss.M).max(initial=0.0)
    if not bound < c:
        raise AssumptionViolation(
            f"steady flows reach {bound:.6g} >= capacity {c}; scenario is infeasible")
    return SaturationController(np.asarray(B), ss.M, e, float(c), float(gamma), e0, float(rho))


def saturation_law(sc: SaturationController, x, t):
    return sc.command(x, t)
