import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from magforest.preprocess import (
    ScalerParams,
    apply_scaler,
    correlation_matrix,
    fit_scaler,
    invert_scaler,
    variance_filter,
    variance_report,
)

reasonable = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
matrices = arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)), elements=reasonable)


class TestScaler:
    def test_minmax_definition(self):
        p = fit_scaler([[0.0], [5.0], [10.0]], "minmax")
        assert p.offset[0] == 0 and p.scale[0] == 10
        np.testing.assert_array_equal(apply_scaler(p, [[0.0], [5.0], [10.0]])[:, 0], [0, 0.5, 1])

    def test_constant_standard_column_maps_to_zero(self):
        p = fit_scaler([[1.0], [1.0], [1.0]], "standard")
        np.testing.assert_array_equal(apply_scaler(p, [[1.0], [1.0], [1.0]]), 0.0)

    def test_constant_minmax_column_maps_to_zero(self):
        p = fit_scaler([[4.0], [4.0]], "minmax")
        np.testing.assert_array_equal(apply_scaler(p, [[4.0], [4.0]]), 0.0)

    def test_minmax_extrapolates(self):
        p = fit_scaler([[2.0], [4.0]], "minmax")
        assert apply_scaler(p, [[6.0]])[0, 0] == 2.0

    def test_round_trip_random(self, rng):
        x = rng.normal(size=(5, 3))
        for kind in ("minmax", "standard"):
            p = fit_scaler(x, kind)
            assert np.max(np.abs(invert_scaler(p, apply_scaler(p, x)) - x)) < 1e-12

    def test_identity_params(self, rng):
        x = rng.normal(size=(4, 2))
        p = ScalerParams("minmax", np.zeros(2), np.ones(2))
        np.testing.assert_array_equal(apply_scaler(p, x), x)

    def test_width_mismatch(self):
        p = fit_scaler(np.zeros((3, 3)))
        with pytest.raises(ValueError, match="4 columns"):
            apply_scaler(p, np.zeros((2, 4)))
        with pytest.raises(ValueError):
            invert_scaler(p, np.zeros((2, 4)))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            fit_scaler([[1.0]], "robust")

    def test_dict_round_trip(self, rng):
        p = fit_scaler(rng.normal(size=(6, 2)), "standard", ["a", "b"])
        q = ScalerParams.from_dict(p.to_dict())
        assert q.features == ("a", "b")
        assert q.offset.tobytes() == p.offset.tobytes() and q.scale.tobytes() == p.scale.tobytes()

    @settings(max_examples=100, deadline=None)
    @given(matrices)
    def test_minmax_train_output_in_unit_interval(self, x):
        z = apply_scaler(fit_scaler(x, "minmax"), x)
        assert z.min() >= 0.0 and z.max() <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(3, 30), st.integers(1, 4)),
                  elements=st.floats(-1e3, 1e3, allow_nan=False)))
    def test_standard_train_output_moments(self, x):
        z = apply_scaler(fit_scaler(x, "standard"), x)
        constant = x.max(axis=0) == x.min(axis=0)
        np.testing.assert_array_equal(z[:, constant], 0.0)
        # Bounds hold for columns whose spread is not tiny next to their magnitude.
        ok = ~constant & (x.std(axis=0) >= 1e-2 * np.abs(x).max(axis=0))
        assert np.all(np.abs(z[:, ok].mean(axis=0)) < 1e-12)
        np.testing.assert_allclose(z[:, ok].std(axis=0), 1.0, atol=1e-9)


class TestVariance:
    def test_reference_low_std_is_excluded(self):
        assert variance_report({"cur_com_1": 0.0441}, 0.0025).excluded == ("cur_com_1",)

    def test_reference_std_above_threshold_is_retained(self):
        assert variance_report({"ins_acc_z": 0.0545}, 0.0025).excluded == ()

    def test_zero_threshold_keeps_everything(self, rng):
        x = np.column_stack([rng.uniform(size=50), np.full(50, 0.3)])
        assert variance_filter(x, 0.0).excluded == ()

    def test_report_order_and_retained_order(self):
        r = variance_report({"a": 0.2, "b": 0.01, "c": 0.3}, 0.0025)
        assert r.features == ("c", "a", "b")
        assert r.retained == ("a", "c")
        assert r.rows()[-1] == ("b", 0.01, True)

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            variance_filter(np.zeros((3, 2)), -1.0)

    def test_uses_population_std(self):
        x = np.array([[0.0], [1.0]])
        assert variance_filter(x, 0.0).stds == (0.5,)

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 6)),
                  elements=st.floats(0, 1, allow_nan=False)),
           st.floats(0, 0.1))
    def test_filter_is_idempotent(self, x, thr):
        names = [f"f{j}" for j in range(x.shape[1])]
        first = variance_filter(x, thr, names)
        keep = [names.index(n) for n in first.retained]
        second = variance_filter(x[:, keep], thr, list(first.retained))
        assert second.excluded == ()


class TestCorrelation:
    def test_identical_columns(self, rng):
        a = rng.normal(size=30)
        corr, const = correlation_matrix(np.column_stack([a, a]))
        assert corr[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert not const.any()

    def test_negated_column(self, rng):
        a = rng.normal(size=30)
        corr, _ = correlation_matrix(np.column_stack([a, -a]))
        assert corr[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_independent_columns(self):
        x = np.random.default_rng(3).normal(size=(10_000, 3))
        corr, _ = correlation_matrix(x)
        off = corr[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) < 0.05)

    def test_constant_column_flagged(self, rng):
        corr, const = correlation_matrix(np.column_stack([rng.normal(size=10), np.ones(10)]))
        assert const.tolist() == [False, True]
        assert corr[0, 1] == 0 and corr[1, 1] == 1

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            correlation_matrix(np.ones((1, 3)))

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 6)),
                  elements=st.floats(-100, 100, allow_nan=False)))
    def test_symmetric_bounded_psd(self, x):
        corr, _ = correlation_matrix(x)
        np.testing.assert_array_equal(corr, corr.T)
        np.testing.assert_array_equal(np.diag(corr), 1.0)
        assert np.all(np.abs(corr) <= 1.0)
        assert np.linalg.eigvalsh(corr).min() >= -1e-9
