import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from curveseg.curves import (
    LabeledCurveSet,
    TimeGrid,
    read_curves_csv,
    split_by_class,
    write_curves_csv,
)
from curveseg.errors import CurveFormatError, DataError


def _write(tmp_path, text, name="c.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_small_file(tmp_path):
    p = _write(tmp_path, "0,1,2\n1,5,5,5\n2,0,0,0\n")
    data = read_curves_csv(p)
    assert (data.n, data.m, data.num_classes) == (2, 3, 2)
    assert data.labels.tolist() == [0, 1]
    assert data.values[0].tolist() == [5.0, 5.0, 5.0]


def test_non_increasing_grid_rejected(tmp_path):
    p = _write(tmp_path, "0,0,1\n1,5,5,5\n")
    with pytest.raises(DataError, match="strictly increasing"):
        read_curves_csv(p)


def test_ragged_row_names_row(tmp_path):
    p = _write(tmp_path, "0,1,2\n1,5,5,5\n2,0,0\n")
    with pytest.raises(CurveFormatError, match="row 3"):
        read_curves_csv(p)


def test_unparsable_cell_names_position(tmp_path):
    p = _write(tmp_path, "0,1,2\n1,5,x,5\n")
    with pytest.raises(CurveFormatError, match="row 2, column 3"):
        read_curves_csv(p)


def test_non_finite_value_rejected(tmp_path):
    p = _write(tmp_path, "0,1,2\n1,5,nan,5\n")
    with pytest.raises(DataError, match="non-finite"):
        read_curves_csv(p)


def test_bad_label_rejected(tmp_path):
    p = _write(tmp_path, "0,1,2\n0,5,5,5\n")
    with pytest.raises(CurveFormatError, match="label"):
        read_curves_csv(p)


def test_unlabeled_read(tmp_path):
    p = _write(tmp_path, "0,1,2\n5,5,5\n0,0,0\n")
    data = read_curves_csv(p, has_labels=False)
    assert data.labels.tolist() == [0, 0]
    assert data.num_classes == 1


def test_single_curve_single_class_file_has_two_rows(tmp_path):
    data = LabeledCurveSet(TimeGrid([0.0, 1.0]), [[1.0, 2.0]], [0])
    p = tmp_path / "one.csv"
    write_curves_csv(data, p, with_labels=False)
    assert len(p.read_text().splitlines()) == 2


def test_written_labels_are_one_based(tmp_path, two_class_steps):
    p = tmp_path / "w.csv"
    write_curves_csv(two_class_steps, p)
    first = {line.split(",")[0] for line in p.read_text().splitlines()[1:]}
    assert first == {"1", "2"}


def test_round_trip_150_curves(tmp_path):
    rng = np.random.default_rng(0)
    grid = TimeGrid(np.sort(rng.uniform(0, 10, 30)))
    data = LabeledCurveSet(grid, rng.normal(size=(150, 30)) * 1e3, rng.integers(0, 3, 150))
    p = tmp_path / "rt.csv"
    write_curves_csv(data, p)
    assert len(p.read_text().splitlines()) == 151
    assert read_curves_csv(p) == data


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False, width=64)


@st.composite
def curve_sets(draw):
    n = draw(st.integers(1, 8))
    m = draw(st.integers(2, 7))
    steps = draw(arrays(float, m, elements=st.floats(1e-3, 10)))
    grid = TimeGrid(np.cumsum(steps) + draw(st.floats(-5, 5)))
    values = draw(arrays(float, (n, m), elements=finite))
    labels = draw(arrays(np.int64, n, elements=st.integers(0, 3)))
    return LabeledCurveSet(grid, values, labels)


@given(curve_sets())
def test_round_trip_property(tmp_path_factory, data):
    p = tmp_path_factory.mktemp("rt") / "c.csv"
    write_curves_csv(data, p)
    back = read_curves_csv(p)
    assert back.grid == data.grid
    assert np.array_equal(back.values, data.values)
    assert np.array_equal(back.labels, data.labels)


def test_split_single_class():
    data = LabeledCurveSet(TimeGrid([0, 1]), np.zeros((4, 2)), [0, 0, 0, 0])
    groups = split_by_class(data)
    assert len(groups) == 1 and groups[0][1].shape == (4, 2)


def test_split_sizes():
    data = LabeledCurveSet(TimeGrid([0, 1]), np.arange(6.0).reshape(3, 2), [0, 1, 0])
    assert [g[1].shape[0] for g in split_by_class(data)] == [2, 1]


@given(curve_sets())
def test_split_then_merge_keeps_curves(data):
    groups = split_by_class(data)
    merged = sorted(map(tuple, np.vstack([v for _, v in groups])))
    assert merged == sorted(map(tuple, data.values))
    for g, v in groups:
        assert v.shape[0] == int(np.sum(data.labels == g))


def test_grid_validation():
    with pytest.raises(DataError):
        TimeGrid([1.0])
    with pytest.raises(DataError):
        TimeGrid([0.0, np.inf])
    g = TimeGrid([2.0, 4.0, 10.0])
    assert np.allclose(g.normalized(), [0.0, 0.25, 1.0])


def test_curve_set_validation():
    grid = TimeGrid([0, 1, 2])
    with pytest.raises(DataError, match="3"):
        LabeledCurveSet(grid, np.zeros((2, 2)), [0, 0])
    with pytest.raises(DataError, match="curve 2 at sample 3"):
        LabeledCurveSet(grid, [[0, 0, 0], [0, 0, np.nan]], [0, 0])
    with pytest.raises(DataError):
        LabeledCurveSet(grid, np.zeros((2, 3)), [0, 2], num_classes=2)


def test_values_are_read_only(two_class_steps):
    with pytest.raises(ValueError):
        two_class_steps.values[0, 0] = 1.0


def test_subset_keeps_class_count(two_class_steps):
    sub = two_class_steps.subset(np.arange(3))
    assert sub.num_classes == 2 and sub.n == 3
    assert sub.class_counts().tolist() == [3, 0]
