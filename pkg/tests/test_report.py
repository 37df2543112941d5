import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mrwlab import serialize, stats
from mrwlab.process import WalkParams
from mrwlab.report import (
    EstimateWithCI, ExperimentReport, TestResult, advisory, band_test, ceiling_test, dumps,
    loads, pvalue_test, threshold_test, z_pvalue,
)

finite = st.floats(allow_nan=False, allow_infinity=False)


def test_estimate_normal():
    e = EstimateWithCI.normal(1.0, 0.1, 100, level=0.95)
    assert e.ci == pytest.approx((1 - 0.195996, 1 + 0.195996), abs=1e-6)
    with pytest.raises(ValueError):
        EstimateWithCI(1.0, -1.0, (0.0, 2.0), 3)
    m = EstimateWithCI.mean_of([1.0, 2.0, 3.0])
    assert m.value == 2.0 and m.stderr == pytest.approx(1 / math.sqrt(3))


def test_band_rules():
    e = EstimateWithCI.normal(1.05, 0.01, 10)
    assert band_test("x", e, 1.0, 0.06).verdict == "pass"
    t = band_test("x", e, 1.0, 0.04)
    assert t.verdict == "fail" and t.statistic == pytest.approx(0.05)
    z = EstimateWithCI.normal(0.0, 0.0, 10)
    assert band_test("z", z, 0.0, 0.1).passed
    assert not band_test("z", EstimateWithCI.normal(1e-9, 0.0, 10), 0.0, 0.1).passed
    assert band_test("z", EstimateWithCI.normal(1e-9, 0.0, 10), 0.0, 0.1, atol=1e-8).passed


def test_other_rules():
    e = EstimateWithCI.normal(0.0, 1.0, 10)
    assert pvalue_test("p", 0.1, 0.02, e, 0.0, 0.01).passed
    assert not pvalue_test("p", 0.1, 0.002, e, 0.0, 0.01).passed
    assert threshold_test("t", 0.995, 0.99, e, 1.0).passed
    assert not threshold_test("t", 0.95, 0.99, e, 1.0).passed
    assert ceiling_test("c", 0.5, 1.0, e, 0.0).passed
    assert not ceiling_test("c", 1.5, 1.0, e, 0.0).passed
    a = advisory("a", 123.0, e, 0.0)
    assert a.verdict == "advisory" and a.passed
    assert z_pvalue(1.0, 1.0, 0.0) == 1.0 and z_pvalue(1.0, 2.0, 0.0) == 0.0
    assert z_pvalue(0.0, 1.96, 1.0) == pytest.approx(0.05, rel=1e-3)


@given(st.recursive(
    st.one_of(st.none(), st.booleans(), st.integers(-10**18, 10**18), st.floats(),
              st.text(max_size=8)),
    lambda c: st.one_of(st.lists(c, max_size=4),
                        st.dictionaries(st.text(max_size=5), c, max_size=4)),
    max_leaves=20))
def test_json_round_trip(obj):
    back = loads(dumps(obj))

    def same(x, y):
        if isinstance(x, float):
            return isinstance(y, float) and (x == y or (math.isnan(x) and math.isnan(y)))
        if isinstance(x, list):
            return len(x) == len(y) and all(same(u, v) for u, v in zip(x, y))
        if isinstance(x, dict):
            return x.keys() == y.keys() and all(same(x[k], y[k]) for k in x)
        return x == y and type(x) is type(y)

    assert same(obj, back)


def test_json_numpy_and_precision():
    s = dumps({"a": np.float64(0.1), "b": np.int64(3), "c": np.array([1.0, 2.5]),
               "d": np.bool_(True), "e": 1e300, "f": 2.0})
    assert '"a": 0.10000000000000001' in s
    assert '"f": 2.0' in s
    back = loads(s)
    assert back == {"a": 0.1, "b": 3, "c": [1.0, 2.5], "d": True, "e": 1e300, "f": 2.0}
    with pytest.raises(TypeError):
        dumps({"x": object()})


def _report():
    return stats.clt_diffusive(WalkParams(0.6, 0.4, 0.5), 500, 200, 1)


def test_report_round_trip():
    r = _report()
    back = ExperimentReport.from_dict(loads(dumps(r.to_dict())))
    assert back.to_dict() == loads(dumps(r.to_dict()))
    assert back.tests == r.tests
    assert "wall_time" not in r.to_dict(timings=False)


def test_results_document(tmp_path):
    r = _report()
    doc = serialize.results_document(r, {"p": 0.6})
    assert doc["version"] == serialize.VERSION
    assert set(doc) == {"version", "config", "experiment", "params", "regime", "n", "replicas",
                        "seed", "passed", "tests", "info", "timings"}
    assert doc["tests"][0]["ci"] == list(r.tests[0].estimate.ci)
    serialize.write_json(tmp_path / "r.json", doc)
    back = serialize.read_json(tmp_path / "r.json")
    rt = serialize.report_from_document(back)
    assert rt.tests == r.tests and rt.passed == r.passed


def test_samples_csv(tmp_path):
    serialize.write_samples_csv(tmp_path / "s.csv", {"z": ((10, 20), np.array([[1, 2], [3.5, 4]])),
                                                      "w": ((5,), np.array([0.1]))})
    raw = (tmp_path / "s.csv").read_bytes()
    assert raw.count(b"\r\n") == 6
    rows = serialize.read_csv(tmp_path / "s.csv")
    assert rows[0] == ["statistic", "replica_index", "n", "value"]
    assert rows[1] == ["z", "0", "10", "1"]
    assert rows[4] == ["z", "1", "20", "4"]
    assert rows[5] == ["w", "0", "5", "0.10000000000000001"]


def test_testresult_not_collected():
    assert TestResult.__test__ is False
