import json
import math

import pytest

try:
    import sparseobs as so
except ImportError:  # dev tree: extension on PYTHONPATH, package dir beside it
    import _core as so


def test_graph_roundtrip():
    g = so.sample_graph(12, 0.5, 1.5, seed=1)
    text = so.write_edge_list(g)
    back = so.parse_edge_list(text)
    assert back == g
    assert so.write_edge_list(back) == text


def test_graph_surgery_and_neighborhood():
    g = so.FactorGraph(3, 2, [(0, 0), (1, 0), (1, 1), (2, 1)])
    nb = so.neighborhood(g, 0, 1)
    assert nb.vars == [0, 1]
    assert nb.facs == [0]
    assert nb.boundary == [1]
    assert so.distance(g, 0, 2) == 2
    s = so.graph_surgery(g, drop_var=1)
    assert s.graph.n == 2 and s.graph.m == 0


def test_model_json_and_softness():
    m = so.builtin_model("parity_bsc", {"p": 0.1, "theta": 0.2})
    m2 = so.model_from_json(m.to_json())
    assert m2.theta == pytest.approx(0.2)
    assert so.softness_constant(m, 1) == pytest.approx(73.0 / 9.0, abs=1e-12)
    assert not m.non_soft_flagged()
    assert so.builtin_model("mod2_storage", {}).non_soft_flagged()


def test_bp_matches_oracle_on_a_tree():
    g = so.FactorGraph(3, 2, [(0, 0), (1, 0), (1, 1), (2, 1)])
    m = so.builtin_model("group_testing", {"f": 0.05, "theta": 0.2})
    w = so.sample_world(g, m, seed=7)
    res = so.bp_run(g, m, w, tol=0.0, max_iter=8)
    exact = so.posterior_marginals(g, m, w)
    bp = so.bp_all_marginals(g, m, w, res.msgs)
    worst = max(so.tv(a, b) for a, b in zip(exact, bp))
    assert worst <= 1e-9


def test_de_calibration():
    m = so.builtin_model("group_testing", {"f": 0.05, "theta": 0.1})
    pop = so.de_init(m, 2.0, 0.5, 5000, seed=3)
    pop = so.de_step(pop, m, seed=4)
    stats = so.population_stats(pop)
    assert stats.mean_message[1] == pytest.approx(0.5, abs=4.0 / math.sqrt(5000))


def test_run_experiment_round_trip():
    cfg = {
        "experiment": "graph_stats",
        "n": 30,
        "gamma": 1.5,
        "alpha": 0.5,
        "samples": 50,
        "seed": 5,
    }
    csv1, resolved = so.run_experiment(json.dumps(cfg))
    csv2, _ = so.run_experiment(resolved)
    assert csv1 == csv2
    assert csv1.startswith("experiment,row_type,key,")


def test_validation_errors_surface_as_python_exceptions():
    with pytest.raises(Exception) as exc:
        so.builtin_model("nope", {})
    assert "unknown name" in str(exc.value)
