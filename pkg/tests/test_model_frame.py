import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mincer_decomp.errors import DataError, RankDeficientError
from mincer_decomp.model_frame import (CovariateSpec, ObservationTable, build_design, check_rank,
                                       load_table, shift_education, write_table)


def _csv(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


SPEC = CovariateSpec("w", "h")


def test_clean_rows_are_all_kept(tmp_path):
    t = load_table(_csv(tmp_path, "w,h\n1.0,10\n2.0,12\n1.5,8\n"), SPEC)
    assert t.n == 3 and t.dropped_rows == 0


def test_blank_education_cell_is_dropped(tmp_path):
    t = load_table(_csv(tmp_path, "w,h\n1.0,10\n2.0,\n1.5,8\n1.2,9\n"), SPEC)
    assert t.n == 3 and t.dropped_rows == 1


def test_non_numeric_and_infinite_cells_are_dropped(tmp_path):
    t = load_table(_csv(tmp_path, "w,h\n1.0,abc\ninf,3\n1.5,8\nnan,1\n"), SPEC)
    assert t.n == 1 and t.dropped_rows == 3


def test_nonpositive_level_wage_is_dropped_and_logged(tmp_path):
    spec = CovariateSpec("w", "h", wage_is_log=False)
    t = load_table(_csv(tmp_path, "w,h\n0,10\n100,12\n-5,3\n"), spec)
    assert t.n == 1 and t.dropped_rows == 2
    assert t.wage_log[0] == pytest.approx(np.log(100.0))


def test_missing_file_column_and_empty_result(tmp_path):
    with pytest.raises(DataError):
        load_table(str(tmp_path / "none.csv"), SPEC)
    with pytest.raises(DataError, match="missing column"):
        load_table(_csv(tmp_path, "w,x\n1,2\n"), SPEC)
    with pytest.raises(DataError, match="zero usable rows"):
        load_table(_csv(tmp_path, "w,h\n,1\n"), SPEC)
    with pytest.raises(DataError):
        load_table(_csv(tmp_path, ""), SPEC)


def test_spec_rejects_repeated_columns():
    with pytest.raises(DataError):
        CovariateSpec("w", "h", ("h",))


def test_controls_are_read_in_order(tmp_path):
    spec = CovariateSpec("w", "h", ("a", "b"))
    t = load_table(_csv(tmp_path, "b,a,h,w\n1,2,3,4\n5,6,7,8\n9,1,0,2\n0,1,4,3\n"
                                  "2,2,9,1\n7,3,1,1\n"), spec)
    np.testing.assert_array_equal(t.controls, [[2, 1], [6, 5], [1, 9], [1, 0], [2, 2], [3, 7]])
    d = build_design(t, spec)
    assert d.p == 5 and d.names == ("const", "educ", "educ_sq", "a", "b")
    np.testing.assert_array_equal(d.X[:, 3:], t.controls)


def test_write_then_load_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    t = ObservationTable(rng.normal(size=20), rng.integers(0, 18, 20), rng.normal(size=(20, 2)),
                         control_names=("z1", "z2"))
    path = str(tmp_path / "rt.csv")
    write_table(t, path)
    back = load_table(path, CovariateSpec("w", "h", ("z1", "z2")))
    np.testing.assert_array_equal(back.wage_log, t.wage_log)
    np.testing.assert_array_equal(back.controls, t.controls)


def test_table_rejects_non_finite_values():
    with pytest.raises(DataError):
        ObservationTable([1.0, np.nan], [1.0, 2.0], np.empty((2, 0)))


def test_design_layout_three_points(h012):
    np.testing.assert_array_equal(h012.X, [[1, 0, 0], [1, 1, 1], [1, 2, 4]])


def test_constant_education_is_rank_deficient():
    t = ObservationTable([1.0, 2.0, 3.0, 4.0], [12.0] * 4, np.empty((4, 0)))
    with pytest.raises(RankDeficientError):
        build_design(t)


def test_constant_control_is_rank_deficient():
    t = ObservationTable([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 5.0], np.ones((4, 1)))
    with pytest.raises(RankDeficientError):
        build_design(t)


def test_rank_check_is_unit_free():
    h = np.arange(1, 40, dtype=float) * 1e4
    check_rank(np.column_stack([np.ones_like(h), h, h * h]))


def test_shift_examples(h012):
    s = shift_education(h012, 1.0)
    np.testing.assert_array_equal(s.X[:, 1], [1, 2, 3])
    np.testing.assert_array_equal(s.X[:, 2], [1, 4, 9])
    np.testing.assert_array_equal(shift_education(h012, 0.0).X, h012.X)
    t = ObservationTable([1.0, 2.0, 0.5], [10.0, 3.0, 7.0], np.empty((3, 0)))
    s = shift_education(build_design(t), 0.01)
    assert s.X[0, 1] == pytest.approx(10.01) and s.X[0, 2] == pytest.approx(100.2001)


def test_build_design_is_deterministic():
    rng = np.random.default_rng(0)
    t = ObservationTable(rng.normal(size=30), rng.uniform(0, 18, 30), rng.normal(size=(30, 2)))
    assert build_design(t).X.tobytes() == build_design(t).X.tobytes()


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_shifts_compose(a, b):
    h = np.linspace(0, 17, 9)
    d = build_design(ObservationTable(np.sin(h), h, np.empty((9, 0))))
    lhs = shift_education(shift_education(d, a), b).X
    rhs = shift_education(d, a + b).X
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(lhs[:, 2], lhs[:, 1] ** 2)
