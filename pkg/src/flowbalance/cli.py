"""Command line entry point: ``flowbalance synthesize|simulate|verify``.

Exit codes: 0 success, 1 a certificate or suite check failed, 2 invalid
input, 3 violated design assumption, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .engine import lyapunov, simulate, write_csv
from .errors import AssumptionViolation, NumericalFailure, ScenarioError
from .scenario import load_scenario
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _rows(a):
    return [[float(v) for v in row] for row in np.atleast_2d(a)]


def _table(name, a, fmt="{:>10.6g}"):
    lines = [f"{name}:"]
    for row in np.atleast_2d(a):
        lines.append("  " + " ".join(fmt.format(v + 0.0) for v in row))
    return "\n".join(lines)


def synthesis_report(sc) -> dict:
    ss = sc.steady_state()
    bank = sc.law()
    part = ss.partition
    out = {"scenario": sc.name,
           "partition": {"tree_edges": [k + 1 for k in part.a_indices],
                         "redundant_edges": [k + 1 for k in part.b_indices]},
           "Y": _rows(np.full((sc.graph.n, sc.graph.n), 1 / sc.graph.n) - np.eye(sc.graph.n))}
    if hasattr(ss, "M"):
        M = ss.M
        out["M"] = _rows(M)
    else:
        M = ss.M2
        out["M1"] = _rows(ss.M1)
        out["M2"] = _rows(M)
    out["residual"] = ss.residual
    out["controllers"] = bank.table() if hasattr(bank, "table") else [
        {"edge": k + 1, "kind": "saturation"} for k in range(sc.graph.m)]
    if sc.expected_H is not None:
        exp = np.atleast_2d(sc.expected_H)
        rows = min(exp.shape[0], M.shape[0])
        diff = float(np.abs(exp[:rows] - M[:rows, :exp.shape[1]]).max())
        out["expected_H_check"] = {
            "expected": _rows(exp), "computed": _rows(M[:rows]), "max_abs_diff": diff,
            "matches": diff <= 1e-12,
            "note": ("computed feedforward rows differ from the expected rows; "
                     "the expected rows do not satisfy B M = Y P_eff") if diff > 1e-12 else ""}
    return out


def _print_synthesis(rep, fmt):
    if fmt == "json":
        print(json.dumps(rep, indent=2))
        return
    print(f"scenario: {rep['scenario']}")
    print(f"tree edges: {rep['partition']['tree_edges']}  "
          f"redundant edges: {rep['partition']['redundant_edges']}")
    print(_table("Y", rep["Y"]))
    for key in ("M", "M1", "M2"):
        if key in rep:
            print(_table(key, rep[key]))
    print(f"residual: {rep['residual']:.3g}")
    print("controllers:")
    for c in rep["controllers"]:
        H = "" if c.get("H") is None else "  H = " + " ".join(f"{v:.6g}" for v in c["H"])
        print(f"  edge {c['edge']:>3}  {c['kind']:<8}{H}".rstrip())
    chk = rep.get("expected_H_check")
    if chk:
        print(f"expected_H max |diff| = {chk['max_abs_diff']:.6g}  "
              f"{'match' if chk['matches'] else 'MISMATCH: ' + chk['note']}")


def certificate_checks(sc, rep) -> dict:
    tol = sc.tolerances
    checks = {"z_tail_sup": (rep.z_tail_sup, tol["z_tail_sup"], rep.z_tail_sup <= tol["z_tail_sup"])}
    if rep.lyap_violations is not None and sc.plant.constraint.type == "none":
        checks["lyap_violations"] = (rep.lyap_violations, tol["lyap_violations"],
                                     rep.lyap_violations <= tol["lyap_violations"])
    if rep.mass_drift is not None:
        checks["mass_drift"] = (rep.mass_drift, tol["mass_drift"], rep.mass_drift <= tol["mass_drift"])
    if sc.plant.constraint.type == "positivity":
        checks["min_state"] = (rep.min_state, tol["min_state"], rep.min_state >= tol["min_state"])
    if rep.saturation_inactive_tail is not None:
        checks["saturation_inactive_tail"] = (rep.saturation_inactive_tail, True,
                                              rep.saturation_inactive_tail)
    return {k: {"value": v, "limit": lim, "passed": bool(ok)} for k, (v, lim, ok) in checks.items()}


def cmd_synthesize(args):
    sc = load_scenario(args.scenario)
    _print_synthesis(synthesis_report(sc), args.format)
    return EXIT_OK


def cmd_simulate(args):
    sc = load_scenario(args.scenario).with_sim(step=args.step, horizon=args.horizon)
    traj = simulate(sc.plant, sc.exo, sc.law(), sc.x0, sc.sim)
    rep = lyapunov(traj)
    checks = certificate_checks(sc, rep)
    passed = all(c["passed"] for c in checks.values())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{sc.name}.csv", "w", newline="") as fh:
        write_csv(traj, fh)
    doc = {"scenario": sc.name, "report": json.loads(rep.to_json()), "checks": checks,
           "passed": passed}
    (out / f"{sc.name}.certificate.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if args.format == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        drift = "n/a" if rep.mass_drift is None else f"{rep.mass_drift:.3g}"
        viol = "n/a" if rep.lyap_violations is None else rep.lyap_violations
        print(f"{sc.name}: z_tail_sup={rep.z_tail_sup:.3g} V_violations={viol} "
              f"mass_drift={drift} -> {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_verify(args):
    if args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; choose from {', '.join(SUITES)}",
              file=sys.stderr)
        return EXIT_INPUT
    res = run_suite(args.suite, args.seed)
    text = json.dumps(res, indent=2, default=float)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{args.suite}_{args.seed}.json").write_text(text + "\n")
    if args.format == "json":
        print(text)
    else:
        print(f"{args.suite} (seed {args.seed}): {res['passed_count']}/{res['total']} passed")
    return EXIT_OK if res["passed"] else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="flowbalance", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="print Y, the feedforward matrices and the controller table")
    p.add_argument("scenario")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="run the closed loop, write CSV and certificate JSON")
    p.add_argument("scenario")
    p.add_argument("--out", default=".")
    p.add_argument("--step", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run a randomized invariant suite")
    p.add_argument("suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
