"""Closed-loop simulation and numerical certificates.

The stacked state is ``(x, eta)``. Exosystem signals are always evaluated
in closed form at the integrator's stage times.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .controller import ControllerBank, SaturationController, controller_step
from .errors import AssumptionViolation, NumericalFailure, ScenarioError
from .plant import PlantConfig, project_rhs, saturate

__all__ = ["SimConfig", "Trajectory", "CertificateReport", "TrackingReport",
           "simulate", "lyapunov", "check_conservation", "check_tracking",
           "rk4_linear_maps", "write_csv", "BALANCE_TOL"]

BALANCE_TOL = 1e-12
_CHUNK = 4096


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    ``method`` is ``"rk4"`` or ``"projected_euler"``; the latter splits
    each step into ``substeps`` Euler substeps and is selected
    automatically for positivity-constrained plants. After each projected
    substep, negative states are clamped to zero; if ``undershoot_tol`` is
    set, a clamp larger than that raises instead.
    """

    step: float = 1e-3
    horizon: float = 100.0
    record_stride: int = 1
    method: str = "rk4"
    overflow_guard: float = 1e9
    substeps: int = 10
    undershoot_tol: float | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise ScenarioError("step must be positive")
        if not self.step <= self.horizon:
            raise ScenarioError("step must not exceed the horizon")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ScenarioError("record_stride must be an integer >= 1")
        if self.method not in ("rk4", "projected_euler"):
            raise ScenarioError(f"unknown integration method {self.method!r}")
        if self.substeps < 1:
            raise ScenarioError("substeps must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    V: np.ndarray
    mass: np.ndarray
    imbalance: np.ndarray
    balanced: bool
    K: np.ndarray | None = None
    commanded: np.ndarray | None = None
    capacity: float | None = None
    linear: bool = True
    projections: int = 0
    injected_mass: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.z.shape[1]

    def tail(self, fraction: float = 0.1) -> np.ndarray:
        """Boolean mask of the trailing ``fraction`` of the time span."""
        t0, t1 = self.times[0], self.times[-1]
        return self.times >= t1 - fraction * (t1 - t0) - 1e-12 * max(1.0, t1)


@dataclass
class CertificateReport:
    z_tail_sup: float
    lyap_violations: int | None
    vdot_match_err: float | None
    mass_drift: float | None
    disagreement_tail: float
    min_state: float
    V0: float | None = None
    saturation_inactive_tail: bool | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class TrackingReport:
    disagreement_tail: float
    offset: float
    offset_std: float


def rk4_linear_maps(A, E, h):
    """One classical RK4 step of ``y' = A y + E u(t)`` as matrices.

    Returns ``(R, G0, Gh, G1)`` with
    ``y+ = R y + G0 u(t) + Gh u(t + h/2) + G1 u(t + h)``.
    """
    N = A.shape[0]
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    R = np.eye(N) + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    AE, A2E, A3E = hA @ E, hA2 @ E, hA3 @ E
    G0 = h / 6 * (E + AE + A2E / 2 + A3E / 4)
    Gh = h / 6 * (4 * E + 2 * AE + A2E / 2)
    G1 = h / 6 * E
    return R, G0, Gh, G1


def _closed_loop_matrices(plant: PlantConfig, bank: ControllerBank):
    B = plant.graph.B
    Hb = bank.H_bar
    n, ne = plant.graph.n, bank.n_eta
    A = np.zeros((n + ne, n + ne))
    A[:n, :n] = -(B * bank.K) @ B.T
    A[:n, n:] = B @ Hb
    A[n:, :n] = -Hb.T @ B.T
    A[n:, n:] = bank.S_bar
    E = np.zeros((n + ne, plant.P_eff.shape[1]))
    E[:n] = plant.P_eff
    return A, E


def _guard(y, t, sim):
    if not np.isfinite(y).all():
        raise NumericalFailure(f"non-finite state at t = {t:.6g}", time=float(t))
    if np.abs(y).max(initial=0.0) > sim.overflow_guard:
        raise NumericalFailure(f"state exceeds overflow guard {sim.overflow_guard:g} "
                               f"at t = {t:.6g}", time=float(t))


def _run_linear(A, E, exo, y0, sim):
    h = sim.step
    R, G0, Gh, G1 = rk4_linear_maps(A, E, h)
    n_steps, stride = sim.n_steps, sim.record_stride
    out = np.empty((n_steps // stride + 1, y0.size))
    out[0] = y = y0.copy()
    RT = R.T
    for start in range(0, n_steps, _CHUNK):
        stop = min(start + _CHUNK, n_steps)
        tk = h * np.arange(start, stop + 1)
        w = exo.state(tk)
        wh = exo.state(tk[:-1] + 0.5 * h)
        F = w[:-1] @ G0.T + wh @ Gh.T + w[1:] @ G1.T
        for j, k in enumerate(range(start, stop)):
            y = y @ RT + F[j]
            if (k + 1) % stride == 0:
                out[(k + 1) // stride] = y
        _guard(y, tk[-1], sim)
    return out


def _run_rk4(f, exo, y0, sim):
    h = sim.step
    n_steps, stride = sim.n_steps, sim.record_stride
    out = np.empty((n_steps // stride + 1, y0.size))
    out[0] = y = y0.copy()
    for start in range(0, n_steps, _CHUNK):
        stop = min(start + _CHUNK, n_steps)
        tk = h * np.arange(start, stop + 1)
        w = exo.state(tk)
        wh = exo.state(tk[:-1] + 0.5 * h)
        for j, k in enumerate(range(start, stop)):
            t = tk[j]
            k1 = f(y, w[j], t)
            k2 = f(y + 0.5 * h * k1, wh[j], t + 0.5 * h)
            k3 = f(y + 0.5 * h * k2, wh[j], t + 0.5 * h)
            k4 = f(y + h * k3, w[j + 1], t + h)
            y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            _guard(y, tk[j + 1], sim)
            if (k + 1) % stride == 0:
                out[(k + 1) // stride] = y
    return out


def _run_projected_euler(f, exo, y0, n, sim):
    h = sim.step / sim.substeps
    n_sub = sim.n_steps * sim.substeps
    stride = sim.record_stride * sim.substeps
    out = np.empty((sim.n_steps // sim.record_stride + 1, y0.size))
    out[0] = y = y0.copy()
    inj = np.zeros(out.shape[0])
    events, injected = 0, 0.0
    for start in range(0, n_sub, _CHUNK):
        stop = min(start + _CHUNK, n_sub)
        tk = h * np.arange(start, stop + 1)
        w = exo.state(tk)
        for j, k in enumerate(range(start, stop)):
            dy = f(y, w[j], tk[j])
            zeta = dy[:n].copy()
            dy[:n] = project_rhs(y[:n], zeta)
            cut = dy[:n] != zeta
            if cut.any():
                events += 1
                injected -= h * zeta[cut].sum()
            y = y + h * dy
            neg = y[:n] < 0
            if neg.any():
                under = -y[:n][neg].min()
                if sim.undershoot_tol is not None and under > sim.undershoot_tol:
                    raise NumericalFailure(
                        f"projected step undershoots the orthant by {under:.3g} at "
                        f"t = {tk[j + 1]:.6g}; reduce the step", time=float(tk[j + 1]))
                injected -= y[:n][neg].sum()
                y[:n][neg] = 0.0
                events += 1
            _guard(y, tk[j + 1], sim)
            if (k + 1) % stride == 0:
                out[(k + 1) // stride] = y
                inj[(k + 1) // stride] = injected
    return out, events, inj


def simulate(plant: PlantConfig, e, law, x0, sim: SimConfig = SimConfig(), eta0=None) -> Trajectory:
    """Integrate the closed loop of network, exosystem and edge controllers.

    Parameters
    ----------
    plant : PlantConfig
    e : Exosystem
    law : ControllerBank or SaturationController
    x0 : array_like
        Initial node states; must be non-negative under the positivity
        constraint.
    sim : SimConfig
    eta0 : array_like, optional
        Stacked initial internal-model state; defaults to the bank's.

    Returns
    -------
    Trajectory
    """
    g = plant.graph
    n, B = g.n, g.B
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (n,):
        raise ScenarioError(f"x0 needs {n} entries, got {x0.size}")
    if plant.P_eff.shape[1] != e.p:
        raise ScenarioError(f"P_eff has {plant.P_eff.shape[1]} columns, exosystem has {e.p} states")
    positivity = plant.constraint.type == "positivity"
    if positivity and (x0 < 0).any():
        raise ScenarioError("positivity constraint requires x0 >= 0")
    method = "projected_euler" if positivity else sim.method

    if isinstance(law, ControllerBank):
        if law.m != g.m or law.p != e.p:
            raise ScenarioError("controller bank does not match graph/exosystem dimensions")
        eta0 = law.eta0() if eta0 is None else np.asarray(eta0, dtype=float).reshape(-1)
        if eta0.shape != (law.n_eta,):
            raise ScenarioError(f"eta0 needs {law.n_eta} entries")

        def lam_of(x, eta, t=None, w=None):
            return controller_step(law, eta, x @ B)[1]

        def f(y, w, t):
            x, eta = y[:n], y[n:]
            eta_dot, lam = controller_step(law, eta, B.T @ x)
            if plant.constraint.type == "edge_saturation":
                lam = saturate(lam, plant.constraint.c)
            return np.concatenate([plant.dynamics.f(x) + B @ lam + plant.P_eff @ w, eta_dot])
    elif isinstance(law, SaturationController):
        eta0 = np.zeros(0)

        def lam_of(x, eta, t, w):
            return law.command(x, t, w)

        def f(y, w, t):
            lam = law.command(y, t, w)
            if plant.constraint.type == "edge_saturation":
                lam = saturate(lam, plant.constraint.c)
            return plant.dynamics.f(y) + B @ lam + plant.P_eff @ w
    else:
        raise ScenarioError(f"unsupported control law {type(law).__name__}")

    y0 = np.concatenate([x0, eta0])
    events, injected = 0, None
    if method == "projected_euler":
        Y, events, injected = _run_projected_euler(f, e, y0, n, sim)
    elif (isinstance(law, ControllerBank) and plant.dynamics.is_linear
          and plant.constraint.type == "none"):
        Y = _run_linear(*_closed_loop_matrices(plant, law), e, y0, sim)
    else:
        Y = _run_rk4(f, e, y0, sim)

    times = sim.step * sim.record_stride * np.arange(Y.shape[0])
    x, eta = Y[:, :n], Y[:, n:]
    w = e.state(times)
    z = x @ B
    commanded = None
    if isinstance(law, ControllerBank):
        lam = -law.K * z
        if law.n_eta:
            E = eta.reshape(len(times), len(law.dynamic), law.p)
            lam[:, law.dynamic] += np.einsum("kp,tkp->tk", law.H_dyn, E)
    else:
        lam = lam_of(x, None, times, w)
    capacity = None
    if plant.constraint.type == "edge_saturation":
        capacity = plant.constraint.c
        commanded = lam
        lam = saturate(lam, capacity)

    inflow = plant.P_eff.sum(axis=0)
    imbalance = e.integral(times) @ inflow / n
    balanced = bool(np.abs(w @ inflow).max() <= BALANCE_TOL * max(1.0, np.abs(plant.P_eff).max()
                                                                   * np.abs(w).max(initial=0.0)))
    V = np.full(len(times), np.nan)
    if isinstance(law, ControllerBank) and plant.dynamics.is_linear:
        xt = x - (x0.mean() + imbalance)[:, None]
        et = eta - np.tile(w, len(law.dynamic))
        V = 0.5 * (np.einsum("ij,ij->i", xt, xt) + np.einsum("ij,ij->i", et, et))

    return Trajectory(times=times, x=x, eta=eta, z=z, lam=lam, V=V, mass=x.sum(axis=1),
                      imbalance=imbalance, balanced=balanced,
                      K=law.K if isinstance(law, ControllerBank) else None,
                      commanded=commanded, capacity=capacity, linear=plant.dynamics.is_linear,
                      projections=events, injected_mass=injected)


def lyapunov(traj: Trajectory, ref=None, eta_w=None, tol: float = 1e-8,
             tail_fraction: float = 0.1) -> CertificateReport:
    """Certificate report for a run.

    ``V`` is taken from the trajectory unless ``ref`` (a
    :class:`~flowbalance.synthesis.ReferenceTrajectory`) and ``eta_w``
    (callable ``t -> stacked internal-model reference``) are given. The
    reference offset is chosen so that ``x - 1 x_star`` has zero mean at
    ``t = 0``. A violation is a step where ``V`` grows by more than
    ``tol * (1 + V(0))``; the derivative check compares the central
    difference of ``V`` with ``-z^T K z``.
    """
    t = traj.times
    V = traj.V
    if ref is not None:
        if eta_w is None:
            raise ScenarioError("eta_w is required together with ref")
        xs = ref.x_star(t)
        cbar = traj.x[0].mean() - xs[0]
        xt = traj.x - (xs + cbar)[:, None]
        et = traj.eta - np.asarray(eta_w(t))
        if et.shape != traj.eta.shape:
            raise ScenarioError("eta_w sampling does not match the trajectory")
        V = 0.5 * ((xt ** 2).sum(axis=1) + (et ** 2).sum(axis=1))

    tail = traj.tail(tail_fraction)
    z_tail = float(np.abs(traj.z[tail]).max(initial=0.0))
    spread = traj.x.max(axis=1) - traj.x.min(axis=1)
    report = CertificateReport(
        z_tail_sup=z_tail, lyap_violations=None, vdot_match_err=None, mass_drift=None,
        disagreement_tail=float(spread[tail].max()), min_state=float(traj.x.min()))

    if np.isfinite(V).all():
        if V.shape != t.shape:
            raise ScenarioError("V sampling does not match the trajectory")
        K = np.ones(traj.m) if traj.K is None else traj.K
        report.V0 = float(V[0])
        report.lyap_violations = int((np.diff(V) > tol * (1.0 + V[0])).sum())
        if len(t) >= 3:
            dV = (V[2:] - V[:-2]) / (t[2:] - t[:-2])
            diss = (traj.z[1:-1] ** 2 * K).sum(axis=1)
            report.vdot_match_err = float(np.abs(dV + diss).max())
    if traj.balanced and traj.linear:
        report.mass_drift = check_conservation(traj)
    if traj.capacity is not None:
        half = traj.times >= 0.5 * traj.times[-1]
        report.saturation_inactive_tail = bool(
            (np.abs(traj.commanded[half]) < traj.capacity).all())
    return report


def check_conservation(traj: Trajectory) -> float:
    """``sup_t |1^T x(t) - 1^T x(0)|`` for balanced runs of the linear network.

    Under the positivity projection the mass injected at the boundary is
    subtracted first.
    """
    if not traj.linear:
        raise AssumptionViolation("total mass is not conserved by nonlinear node dynamics")
    if not traj.balanced:
        raise AssumptionViolation(
            "demand/supply is not balanced; total mass follows the cumulative imbalance "
            f"(n * imbalance at end = {traj.x.shape[1] * traj.imbalance[-1]:.6g})")
    mass = traj.mass if traj.injected_mass is None else traj.mass - traj.injected_mass
    return float(np.abs(mass - mass[0]).max())


def check_tracking(traj: Trajectory, ref=None, tail_fraction: float = 0.1) -> TrackingReport:
    """Spread of ``x - imbalance`` over the tail and the common offset ``c'``.

    With ``ref`` given, its ``x_star`` replaces the closed-form imbalance
    (the offset is then relative to ``x_star``).
    """
    shift = traj.imbalance if ref is None else ref.x_star(traj.times)
    r = traj.x - shift[:, None]
    tail = traj.tail(tail_fraction)
    spread = r.max(axis=1) - r.min(axis=1)
    offset = r[tail].mean(axis=1)
    return TrackingReport(float(spread[tail].max()), float(offset[-1]), float(offset.std()))


def write_csv(traj: Trajectory, fh) -> None:
    """Write ``t,x_*,z_*,lambda_*,V,mass,imbalance`` rows with 17 significant digits."""
    n, m = traj.n, traj.m
    header = (["t"] + [f"x_{i + 1}" for i in range(n)] + [f"z_{k + 1}" for k in range(m)]
              + [f"lambda_{k + 1}" for k in range(m)] + ["V", "mass", "imbalance"])
    data = np.column_stack([traj.times, traj.x, traj.z, traj.lam, traj.V, traj.mass,
                            traj.imbalance])
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header=",".join(header), comments="")
    fh.write(buf.getvalue())
