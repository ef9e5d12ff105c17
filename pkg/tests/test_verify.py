import numpy as np
import pytest

from flowbalance.verify import SUITES, run_suite


def test_feedforward_suite_seed7():
    res = run_suite("lemma1", seed=7)
    assert res["passed"] and res["total"] == 70
    assert max(c.get("residual", c.get("error")) for c in res["cases"]) <= 1e-10


@pytest.mark.parametrize("name, kw", [("saturation", {"cases": 2, "horizon": 100.0}),
                                      ("positivity", {"cases": 2})])
def test_small_suites_pass(name, kw):
    assert run_suite(name, seed=3, **kw)["passed"]


def test_suites_are_deterministic():
    a = run_suite("theorem1", seed=5, cases=2, horizon=20.0)
    b = run_suite("theorem1", seed=5, cases=2, horizon=20.0)
    assert a == b
    assert all(c["lyap_violations"] == 0 for c in a["cases"])


def test_unknown_suite():
    assert set(SUITES) == {"lemma1", "lemma3", "theorem1", "corollary1", "saturation",
                           "positivity"}
    with pytest.raises(KeyError):
        run_suite("lemma2")


def test_identical_nodes_suite_reports():
    res = run_suite("corollary1", seed=3, cases=2, horizon=30.0)
    for case in res["cases"]:
        assert case["fn"] in ("neg_linear", "neg_cubic", "neg_tanh")
        assert np.isfinite(case["z_tail_sup"])
        assert case["passed"] == (case["z_tail_sup"] <= 1e-5)
