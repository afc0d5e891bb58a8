import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from magforest.metrics import (
    EvalResult,
    append_ledger,
    config_hash,
    drms,
    experiment_summary,
    metric_name,
    read_ledger,
    rmse,
    score,
)


class TestRmse:
    def test_identity(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_symmetric_residuals(self):
        assert rmse([1.0, -1.0], [0.0, 0.0]) == 1.0

    def test_single(self):
        assert rmse([3.0], [0.0]) == 3.0

    def test_errors(self):
        with pytest.raises(ValueError, match="mismatch"):
            rmse([1.0, 2.0], [1.0])
        with pytest.raises(ValueError, match="empty"):
            rmse([], [])


class TestDrms:
    def test_identity(self):
        assert drms(np.ones((4, 3)), np.ones((4, 3))) == 0.0

    def test_two_samples(self):
        assert drms([[3, 4, 0], [0, 0, 0]], np.zeros((2, 3))) == pytest.approx(3.5355339059327378, abs=1e-12)

    def test_vertical_offset(self):
        assert drms([[0, 0, 5]], [[0, 0, 0]]) == 5.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            drms(np.zeros((2, 3)), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            drms(np.zeros((2, 2)), np.zeros((2, 2)))


positions = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
                   elements=st.floats(-1e4, 1e4, allow_nan=False))


@settings(max_examples=100, deadline=None)
@given(positions, positions, st.tuples(*[st.floats(-1e4, 1e4)] * 3))
def test_drms_identity_and_translation(a, b, shift):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    dist = np.linalg.norm(a - b, axis=1)
    assert drms(a, b) ** 2 == pytest.approx(np.mean(dist**2), rel=1e-12, abs=1e-9)
    assert drms(a, b) == pytest.approx(rmse(dist, np.zeros(n)), rel=1e-12, abs=1e-12)
    t = np.array(shift)
    assert drms(a + t, b + t) == pytest.approx(drms(a, b), rel=1e-9, abs=1e-7)
    assert rmse(a[:, 0] + t[0], b[:, 0] + t[0]) == pytest.approx(rmse(a[:, 0], b[:, 0]), rel=1e-9, abs=1e-7)


def test_score_dispatches_on_shape():
    assert score(np.zeros((2, 3)), [[3, 4, 0], [0, 0, 0]]) == drms(np.zeros((2, 3)), [[3, 4, 0], [0, 0, 0]])
    assert score([1.0, -1.0], [0.0, 0.0]) == 1.0
    assert metric_name(3) == "drms_m" and metric_name(1) == "rmse_nT"


def result(value, model="forest", split="test"):
    return EvalResult(split, "drms_m", value, "1002", model, "h")


class TestSummary:
    def test_constant(self):
        s = experiment_summary([result(5.0)] * 3)[("forest", "test", "drms_m")]
        assert (s.mean, s.std, s.count) == (5.0, 0.0, 3)

    def test_population_std(self):
        s = experiment_summary([result(4.0), result(6.0)])[("forest", "test", "drms_m")]
        assert (s.mean, s.std) == (5.0, 1.0)

    def test_single_value_is_an_error(self):
        with pytest.raises(ValueError, match="at least 2"):
            experiment_summary([result(4.0)])

    def test_empty(self):
        with pytest.raises(ValueError):
            experiment_summary([])

    def test_groups(self):
        rs = [result(1.0), result(3.0), result(2.0, "knn"), result(4.0, "knn"),
              result(1.0, split="train"), result(1.0, split="train")]
        out = experiment_summary(rs)
        assert set(out) == {("forest", "test", "drms_m"), ("knn", "test", "drms_m"), ("forest", "train", "drms_m")}
        assert out[("knn", "test", "drms_m")].mean == 3.0


def test_eval_result_validation():
    with pytest.raises(ValueError):
        EvalResult("valid", "drms_m", 1.0, "", "m", "h")
    with pytest.raises(ValueError):
        EvalResult("test", "mae", 1.0, "", "m", "h")
    with pytest.raises(ValueError):
        EvalResult("test", "drms_m", -1.0, "", "m", "h")


def test_ledger_round_trip(tmp_path):
    path = tmp_path / "ledger.csv"
    append_ledger(path, "train", "2026-01-01T00:00:00+00:00", artifact="model.json")
    rows = [result(0.1 + 0.2), result(1e-17, split="train")]
    append_ledger(path, "evaluate", "2026-01-01T00:00:01+00:00", rows)
    assert read_ledger(path) == rows
    assert path.read_text().count("\n") == 4


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
