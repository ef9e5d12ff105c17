"""Seeded randomized suites exercising the invariants of each layer.

Every suite returns a JSON-serializable dict with one entry per random
case and an overall ``passed`` flag.
"""

from __future__ import annotations

import numpy as np

from .controller import controller_step, identical_nodes_bank, saturation_controller, synthesize_bank
from .engine import SimConfig, _closed_loop_matrices, lyapunov, rk4_linear_maps, simulate, \
    check_conservation
from .exosystem import SignalSpec, build_structured
from .graph import build_graph, partition_edges
from .plant import GRADIENT_LIBRARY, Constraint, NodeDynamics, PlantConfig
from .synthesis import averaging_matrix, compute_M, compute_M_nonlinear

__all__ = ["SUITES", "run_suite", "random_connected_graph", "random_tree",
           "random_exosystem", "random_input_matrix", "balanced_input_matrix",
           "slowest_mode"]


def random_tree(rng, n):
    edges = []
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.append((i + 1, j + 1) if rng.random() < 0.5 else (j + 1, i + 1))
    return edges


def random_connected_graph(rng, n_min=2, n_max=6, extra=0.3):
    """Random tree plus each remaining node pair with probability ``extra``, shuffled."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = random_tree(rng, n)
    present = {frozenset(e) for e in edges}
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if frozenset((i, j)) not in present and rng.random() < extra:
                edges.append((i, j) if rng.random() < 0.5 else (j, i))
    edges = [edges[k] for k in rng.permutation(len(edges))]
    return build_graph(n, edges)


def random_exosystem(rng, q, max_harmonics=2, omega=(0.1, 5.0)):
    specs = []
    for _ in range(q):
        nh = int(rng.integers(0, max_harmonics + 1))
        harm = tuple((float(rng.uniform(0.2, 1.0)), float(om), float(rng.uniform(0, 2 * np.pi)))
                     for om in rng.uniform(*omega, nh))
        specs.append(SignalSpec(float(rng.uniform(-1.0, 1.0)), harm))
    return build_structured(specs)


def random_input_matrix(rng, n, q):
    """Each channel enters (or leaves) at its own node."""
    P = np.zeros((n, q))
    P[rng.choice(n, q, replace=False), np.arange(q)] = rng.choice([-1.0, 1.0], q)
    return P


def balanced_input_matrix(rng, n, q):
    """Each channel flows in at one node and out at another."""
    P = np.zeros((n, q))
    for j in range(q):
        a, b = rng.choice(n, 2, replace=False)
        P[a, j], P[b, j] = 1.0, -1.0
    return P


def slowest_mode(plant, bank, tol=1e-9):
    """Largest real part among the strictly decaying closed-loop eigenvalues."""
    A, _ = _closed_loop_matrices(plant, bank)
    re = np.linalg.eigvals(A).real
    re = re[re < -tol]
    return float(re.max()) if re.size else None


def _case_ok(cases):
    return bool(all(c["passed"] for c in cases))


def suite_feedforward(rng, cases=20, trees=50, tol=1e-10):
    out = []
    for i in range(cases):
        g = random_connected_graph(rng)
        p = int(rng.integers(1, 5))
        P_eff = rng.normal(size=(g.n, p))
        ss = compute_M(g, partition_edges(g), P_eff)
        err = float(np.abs(g.B @ ss.M - averaging_matrix(g.n) @ P_eff).max())
        zero_rows = bool(not ss.M[list(ss.partition.b_indices)].any())
        out.append({"case": i, "kind": "feedforward", "n": g.n, "m": g.m, "residual": err,
                    "passed": err <= tol and zero_rows})
    for i in range(trees):
        n = int(rng.integers(2, 8))
        g = build_graph(n, random_tree(rng, n))
        P_eff = rng.normal(size=(n, 3))
        M = compute_M(g, None, P_eff).M
        M_pinv = np.linalg.pinv(g.B) @ averaging_matrix(n) @ P_eff
        err = float(np.abs(M - M_pinv).max())
        out.append({"case": i, "kind": "tree_uniqueness", "n": n, "error": err, "passed": err <= tol})
    return out


def suite_reproduction(rng, cases=20, horizon=50.0, step=5e-4, tol=1e-9):
    out = []
    for i in range(cases):
        g = random_connected_graph(rng)
        q = int(rng.integers(1, min(g.n, 3) + 1))
        e = random_exosystem(rng, q)
        P_eff = random_input_matrix(rng, g.n, q) @ e.Gamma
        bank = synthesize_bank(compute_M(g, None, P_eff), e, eta0=e.w0)
        # internal models run autonomously (z = 0) under their own RK4 map
        R = rk4_linear_maps(bank.S_bar, np.zeros((bank.n_eta, 0)), step)[0]
        n_steps = int(round(horizon / step))
        eta = bank.eta0()
        err = 0.0
        for k in range(1, n_steps + 1):
            eta = R @ eta
            if k % 100 == 0:
                lam = controller_step(bank, eta, np.zeros(g.m))[1]
                ref = bank.H @ e.state(k * step)
                err = max(err, float(np.abs(lam - ref).max(initial=0.0)))
        out.append({"case": i, "n": g.n, "p": e.p, "dynamic_edges": len(bank.dynamic),
                    "reproduction_error": err, "passed": err <= tol})
    return out


def suite_regulation(rng, cases=20, horizon=500.0, step=5e-3, z_tol=1e-5):
    out = []
    for i in range(cases):
        g = random_connected_graph(rng)
        q = int(rng.integers(1, min(g.n, 3) + 1))
        e = random_exosystem(rng, q)
        plant = PlantConfig(g, random_input_matrix(rng, g.n, q) @ e.Gamma)
        bank = synthesize_bank(compute_M(g, None, plant.P_eff), e)
        x0 = rng.uniform(-1.0, 1.0, g.n)
        traj = simulate(plant, e, bank, x0, SimConfig(step, horizon, 10))
        rep = lyapunov(traj)
        out.append({"case": i, "n": g.n, "m": g.m, "p": e.p, "z_tail_sup": rep.z_tail_sup,
                    "lyap_violations": rep.lyap_violations, "slowest_mode": slowest_mode(plant, bank),
                    "passed": rep.z_tail_sup <= z_tol and rep.lyap_violations == 0})
    return out


def suite_identical_nodes(rng, cases=5, horizon=500.0, step=1e-2, z_tol=1e-5):
    out = []
    for i in range(cases):
        g = random_connected_graph(rng, n_max=5)
        q = int(rng.integers(1, min(g.n, 3) + 1))
        e = random_exosystem(rng, q)
        fn = GRADIENT_LIBRARY[int(rng.integers(len(GRADIENT_LIBRARY)))]
        plant = PlantConfig(g, balanced_input_matrix(rng, g.n, q) @ e.Gamma,
                            NodeDynamics.identical(fn, float(rng.uniform(0.5, 2.0)), g.n))
        bank = identical_nodes_bank(compute_M_nonlinear(g, None, plant.P_eff), e, plant)
        traj = simulate(plant, e, bank, rng.uniform(-1.0, 1.0, g.n), SimConfig(step, horizon, 10))
        rep = lyapunov(traj)
        out.append({"case": i, "n": g.n, "fn": fn, "z_tail_sup": rep.z_tail_sup,
                    "disagreement_tail": rep.disagreement_tail, "passed": rep.z_tail_sup <= z_tol})
    return out


def suite_saturation(rng, cases=10, horizon=200.0, step=1e-2, spread_tol=1e-5):
    out = []
    for i in range(cases):
        g = random_connected_graph(rng)
        q = int(rng.integers(1, min(g.n, 3) + 1))
        e = random_exosystem(rng, q)
        P_eff = random_input_matrix(rng, g.n, q) @ e.Gamma
        ss = compute_M(g, None, P_eff)
        c = max(2.0 * e.amplitude_bound(ss.M).max(initial=0.0), 1.0)
        plant = PlantConfig(g, P_eff, constraint=Constraint("edge_saturation", c))
        sc = saturation_controller(ss, e, c, gamma=1.0, e0=rng.normal(size=e.p), rho=2.0, graph=g)
        traj = simulate(plant, e, sc, rng.uniform(-2.0, 2.0, g.n), SimConfig(step, horizon, 10))
        rep = lyapunov(traj)
        spread = float(np.ptp(traj.x[-1]))
        within = bool((np.abs(traj.lam) <= c).all())
        out.append({"case": i, "n": g.n, "capacity": c, "flows_within_capacity": within,
                    "saturation_inactive_tail": rep.saturation_inactive_tail, "final_spread": spread,
                    "passed": within and rep.saturation_inactive_tail and spread <= spread_tol})
    return out


def suite_positivity(rng, cases=5, horizon=100.0, step=1e-2, tol=1e-3):
    out = []
    for i in range(cases):
        g = random_connected_graph(rng, n_max=5)
        e = build_structured([SignalSpec(float(rng.uniform(0.1, 0.5)),
                                         ((float(rng.uniform(0.05, 0.1)), float(rng.uniform(0.5, 2.0)), 0.0),))])
        plant = PlantConfig(g, balanced_input_matrix(rng, g.n, 1) @ e.Gamma,
                            constraint=Constraint("positivity"))
        bank = synthesize_bank(compute_M(g, None, plant.P_eff), e)
        x0 = rng.uniform(0.0, 2.0, g.n)
        x0[int(rng.integers(g.n))] = 0.0
        traj = simulate(plant, e, bank, x0, SimConfig(step, horizon, 10))
        target = (x0.sum() + traj.injected_mass[-1]) / g.n
        err = float(np.abs(traj.x[-1] - target).max())
        drift = check_conservation(traj)
        out.append({"case": i, "n": g.n, "min_state": float(traj.x.min()),
                    "projection_events": traj.projections, "consensus": target,
                    "consensus_error": err, "mass_drift": drift,
                    "passed": traj.x.min() >= 0 and err <= tol and drift <= 1e-8})
    return out


SUITES = {
    "lemma1": suite_feedforward,
    "lemma3": suite_reproduction,
    "theorem1": suite_regulation,
    "corollary1": suite_identical_nodes,
    "saturation": suite_saturation,
    "positivity": suite_positivity,
}


def run_suite(name: str, seed: int = 0, **kwargs) -> dict:
    if name not in SUITES:
        raise KeyError(name)
    rng = np.random.default_rng(seed)
    cases = SUITES[name](rng, **kwargs)
    return {"suite": name, "seed": seed, "cases": cases,
            "passed_count": sum(c["passed"] for c in cases), "total": len(cases),
            "passed": _case_ok(cases)}
