import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magforest.dataset import (
    INS_AIDED,
    PRESETS,
    DataError,
    FlightFrame,
    SplitSpec,
    TargetSpec,
    chronological_split,
    clean,
    concat,
    impute_missing,
    load_flight,
    mark_outliers,
    preset,
    write_flight,
)


def write(path, text):
    path.write_text(text)
    return path


class TestLoadFlight:
    def test_three_rows(self, tmp_path):
        f = load_flight(write(tmp_path / "a.csv", "t,mag_3_uc\n0,1.5\n0.1,2.5\n0.2,3.5\n"))
        assert f.n_rows == 3
        assert f.names == ["t", "mag_3_uc"]
        np.testing.assert_array_equal(f["mag_3_uc"], [1.5, 2.5, 3.5])
        assert f.flight_id == "a"

    def test_missing_schema_column(self, tmp_path):
        path = write(tmp_path / "a.csv", "t,mag_3_uc\n0,1\n")
        with pytest.raises(DataError, match="missing column.*flux_b_x"):
            load_flight(path, schema=["t", "flux_b_x"])

    def test_blank_cell_is_marked_missing(self, tmp_path):
        f = load_flight(write(tmp_path / "a.csv", "t,mag_4_uc\n0,1\n1,\n2,3\n"))
        assert f.n_rows == 3
        np.testing.assert_array_equal(f.missing_mask()["mag_4_uc"], [False, True, False])
        assert not f.missing_mask()["t"].any()

    def test_sparse_garbage_is_flagged_not_dropped(self, tmp_path):
        f = load_flight(write(tmp_path / "a.csv", "t,x\n0,1\n1,oops\n2,3\n"))
        assert f.n_rows == 3 and np.isnan(f["x"][1])

    def test_mostly_non_numeric_column_is_rejected(self, tmp_path):
        path = write(tmp_path / "a.csv", "t,x\n0,a\n1,b\n2,3\n")
        with pytest.raises(DataError, match="non-numeric.*x"):
            load_flight(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_flight(tmp_path / "nope.csv")

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="header"):
            load_flight(write(tmp_path / "a.csv", ""))

    def test_duplicate_header(self, tmp_path):
        with pytest.raises(DataError, match="duplicate"):
            load_flight(write(tmp_path / "a.csv", "x,x\n1,2\n"))


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_write_load_round_trip_is_exact(tmp_path_factory, rows):
    arr = np.array(rows)
    frame = FlightFrame({"a": arr[:, 0], "b": arr[:, 1]}, flight_id="rt")
    path = write_flight(frame, tmp_path_factory.mktemp("rt") / "rt.csv")
    back = load_flight(path)
    for name in ("a", "b"):
        assert back[name].tobytes() == frame[name].tobytes()


def test_round_trip_preserves_missing(tmp_path):
    frame = FlightFrame({"a": [1.0, np.nan, 0.1 + 0.2]})
    back = load_flight(write_flight(frame, tmp_path / "m.csv"))
    np.testing.assert_array_equal(back.missing_mask()["a"], [False, True, False])
    assert back["a"][2] == 0.1 + 0.2


class TestFrame:
    def test_invariants(self):
        with pytest.raises(DataError, match="different lengths"):
            FlightFrame({"a": [1, 2], "b": [1]})
        with pytest.raises(DataError, match="at least one row"):
            FlightFrame({"a": []})
        with pytest.raises(DataError, match="sample_period"):
            FlightFrame({"a": [1]}, sample_period=0)

    def test_columns_are_read_only(self):
        f = FlightFrame({"a": [1.0, 2.0]})
        with pytest.raises(ValueError):
            f["a"][0] = 5.0

    def test_target_spec(self):
        f = FlightFrame({"utm_x": [1.0], "utm_y": [2.0], "utm_z": [3.0], "anomaly_nt": [4.0]})
        np.testing.assert_array_equal(TargetSpec.position().values(f), [[1, 2, 3]])
        assert TargetSpec.anomaly().dim == 1
        with pytest.raises(DataError):
            TargetSpec("position_3d", ("utm_x",))
        with pytest.raises(DataError):
            TargetSpec("heading", ("h",))


class TestImpute:
    def test_forward_fill(self):
        out = impute_missing(FlightFrame({"a": [1.0, np.nan, 3.0]}))
        np.testing.assert_array_equal(out["a"], [1, 1, 3])

    def test_leading_gap_takes_median(self):
        out = impute_missing(FlightFrame({"a": [np.nan, 2.0, 2.0]}))
        np.testing.assert_array_equal(out["a"], [2, 2, 2])

    def test_leading_gap_median_of_observed(self):
        out = impute_missing(FlightFrame({"a": [np.nan, np.nan, 1.0, 5.0, 9.0]}))
        np.testing.assert_array_equal(out["a"], [5, 5, 1, 5, 9])

    def test_all_missing_is_an_error(self):
        with pytest.raises(DataError, match="entirely missing"):
            impute_missing(FlightFrame({"a": [np.nan, np.nan]}))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.one_of(st.none(), finite), min_size=1, max_size=30).filter(
        lambda xs: any(x is not None for x in xs)))
    def test_observed_cells_unchanged_and_no_gaps(self, cells):
        values = np.array([np.nan if c is None else c for c in cells])
        out = impute_missing(FlightFrame({"a": values}))["a"]
        assert not np.isnan(out).any()
        seen = ~np.isnan(values)
        assert out[seen].tobytes() == values[seen].tobytes()


def test_outliers_become_missing_then_imputed():
    values = np.array([1.0, 2.0, 1.5, 2.5, 1000.0, 2.0, 1.0, 1.8])
    marked = mark_outliers(FlightFrame({"a": values}))
    assert np.isnan(marked["a"][4]) and np.isnan(marked["a"]).sum() == 1
    cleaned = clean(FlightFrame({"a": values}))
    assert cleaned["a"][4] == 2.5


class TestSplit:
    def rows(self, n):
        return FlightFrame({"i": np.arange(n, dtype=float)})

    def test_ten_rows_fifth(self):
        tr, te = chronological_split(self.rows(10), SplitSpec(0.2))
        np.testing.assert_array_equal(tr["i"], range(8))
        np.testing.assert_array_equal(te["i"], [8, 9])

    def test_ceiling(self):
        tr, te = chronological_split(self.rows(5), 0.5)
        np.testing.assert_array_equal(tr["i"], [0, 1])
        np.testing.assert_array_equal(te["i"], [2, 3, 4])

    def test_binary_fraction_noise_does_not_bump_the_ceiling(self):
        _, te = chronological_split(self.rows(10), 0.7)
        assert te.n_rows == 7

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
    def test_fraction_out_of_range(self, frac):
        with pytest.raises(DataError):
            chronological_split(self.rows(10), frac)

    def test_single_row(self):
        with pytest.raises(DataError, match="at least 2"):
            chronological_split(self.rows(1), 0.5)

    def test_fraction_leaving_no_train_rows(self):
        with pytest.raises(DataError, match="no training rows"):
            chronological_split(self.rows(2), 0.9)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 500), st.floats(0.001, 0.999))
    def test_split_then_concat_is_identity(self, n, frac):
        spec = SplitSpec(frac)
        if spec.n_test(n) >= n:
            return
        tr, te = chronological_split(self.rows(n), spec)
        assert te.n_rows == spec.n_test(n)
        np.testing.assert_array_equal(concat([tr, te])["i"], np.arange(n))


def test_presets_match_the_reference_check_marks():
    assert set(PRESETS["tl_ins_free"]) == {
        "mag_3_uc", "mag_4_uc", "mag_5_uc", "diurnal", "flux_b_x", "flux_b_y",
        "flux_c_y", "static_p", "total_p",
    }
    assert set(PRESETS["ins_aided"]) == set(PRESETS["tl_ins_free"]) | {"ins_vw", "ins_wander", "vol_srvo"}
    assert set(PRESETS["tl_ins_aided"]) == (
        set(INS_AIDED) - {"mag_3_uc", "mag_4_uc", "mag_5_uc"}
    ) | {"mag_3_c", "mag_4_c", "mag_5_c"}
    assert [len(PRESETS[k]) for k in ("tl_ins_free", "ins_aided", "tl_ins_aided")] == [9, 12, 12]


def test_preset_without_diurnal():
    assert "diurnal" not in preset("ins_aided", exclude_diurnal=True)
    assert len(preset("ins_aided", exclude_diurnal=True)) == 11
    with pytest.raises(DataError, match="unknown preset"):
        preset("gps_aided")
