import json

import numpy as np
import pytest

from clustered_consensus import twocluster
from clustered_consensus.graph import build_laplacian
from clustered_consensus.scenario import (
    BUNDLED, ScenarioError, bundled_path, compact_json, from_dict, load, loads,
)


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_round_trip(name):
    sc = load(name)
    assert loads(sc.dumps()).to_dict() == sc.to_dict()


def test_bundled_files_are_normalized():
    for name in BUNDLED:
        sc = load(name)
        assert bundled_path(name).read_text(encoding="utf-8") == sc.dumps()


def test_benchmark_scenario_matches_reference_data():
    sc = load("paper-fig1")
    net = sc.network()
    assert np.array_equal(net.p_e, twocluster.P_E)
    assert np.array_equal(build_laplacian(net), twocluster.laplacian())
    assert np.array_equal(sc.x0, twocluster.X0)
    lo = load("paper-fig1-leaders-only")
    assert np.array_equal(lo.network().p_e, twocluster.network(leaders_only=True).p_e)


def test_compact_json_keeps_flat_arrays_inline():
    text = compact_json({"a": [[1, 2], [3, 4]], "b": {"c": [1.5]}})
    assert "[1, 2]" in text and "[1.5]" in text
    assert json.loads(text) == {"a": [[1, 2], [3, 4]], "b": {"c": [1.5]}}


def _base():
    return json.loads(load("paper-fig1").dumps())


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.pop("x0"), "x0"),
    (lambda d: d.update(x0=[0, 1]), "x0"),
    (lambda d: d.update(horizon=-1), "horizon"),
    (lambda d: d.update(bogus=1), "bogus"),
    (lambda d: d["schedule"].update(delta=0), "schedule.delta"),
    (lambda d: d["schedule"].update(kind="poisson"), "schedule.kind"),
    (lambda d: d["network"]["clusters"][0]["edges"].append([0, 5, 1.0]), "network.clusters[0].edges[8]"),
    (lambda d: d["network"]["clusters"][1].update(leader=0), "network"),
    (lambda d: d["network"].update(p_l=[[1.0]]), "network"),
    (lambda d: d.update(mode="euler"), "mode"),
    (lambda d: d.update(disturbance={"kind": "sinusoid", "amplitude": 1.0, "omega": 1.0}), "mode"),
    (lambda d: d.update(analyses={"limit_terms": 0}), "analyses.limit_terms"),
    (lambda d: d.update(certificate={"P": np.eye(7).tolist(), "alpha": 1, "rho": 1, "beta": 1.5}),
     "certificate.beta"),
])
def test_parse_errors_name_the_field(mutate, where):
    doc = _base()
    mutate(doc)
    with pytest.raises(ScenarioError) as err:
        from_dict(doc)
    assert err.value.path == where


def test_json_syntax_error_has_position():
    with pytest.raises(ScenarioError) as err:
        loads('{"name": }')
    assert "line 1" in str(err.value)
    with pytest.raises(ScenarioError):
        loads("")


def test_unknown_scenario_name():
    with pytest.raises(FileNotFoundError):
        load("no-such-scenario")


def test_random_and_explicit_schedules():
    doc = _base()
    doc["schedule"] = {"kind": "random", "delta_min": 0.2, "delta_max": 0.8, "seed": 3}
    sc = from_dict(doc)
    sched = sc.impulse_schedule()
    assert np.allclose(sc.schedule.intervals(5), sched.intervals[:5])
    doc["schedule"] = {"kind": "explicit", "times": [0.5, 1.0, 2.0]}
    sc = from_dict(doc)
    assert sc.impulse_schedule().times == (0.5, 1.0, 2.0)
    assert sc.schedule.intervals(3) == pytest.approx([0.5, 0.5, 1.0])
    doc["schedule"] = {"kind": "explicit", "times": [0.5, 0.4]}
    with pytest.raises(ScenarioError):
        from_dict(doc)


def test_with_uniform_delta():
    sc = load("paper-fig1").with_uniform_delta(0.25)
    assert sc.schedule.kind == "uniform" and sc.schedule.delta == 0.25
