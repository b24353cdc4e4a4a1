import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirecourse.data import (MAR, MCAR, MNAR, BoundsError, Dataset, FeatureMeta, IncompleteInstance,
                             SchemaError, attach_quantiles, fit_quantiles, format_schema, inject_missing,
                             load_csv, load_instance, median_threshold, meta_from_dict, meta_to_dict,
                             parse_schema, split, write_csv)

SCHEMA = [FeatureMeta("age", "integer", 18, 90, "immutable"), FeatureMeta("income", "continuous", 0, 200)]


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_load_three_rows(tmp_path):
    path = _write(tmp_path, "age,income,label\n30,50,yes\n40,60,no\n50,70,yes\n")
    ds = load_csv(path, SCHEMA, "label")
    assert len(ds) == 3
    assert ds.rows.tolist() == [[30, 50], [40, 60], [50, 70]]
    assert ds.labels.tolist() == [1, -1, 1]


def test_out_of_bounds_is_an_error(tmp_path):
    path = _write(tmp_path, "age,income,label\n30,-5,1\n40,60,0\n")
    with pytest.raises(BoundsError):
        load_csv(path, SCHEMA, "label")


def test_three_label_values(tmp_path):
    path = _write(tmp_path, "age,income,label\n30,5,a\n40,60,b\n41,61,c\n")
    with pytest.raises(SchemaError):
        load_csv(path, SCHEMA, "label")


def test_unknown_column_and_malformed_row(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(_write(tmp_path, "age,income,zip,label\n30,5,1,a\n"), SCHEMA, "label")
    with pytest.raises(SchemaError):
        load_csv(_write(tmp_path, "age,income,label\n30,5\n"), SCHEMA, "label")
    with pytest.raises(SchemaError):
        load_csv(_write(tmp_path, "age,income,label\n30,abc,1\n31,2,0\n"), SCHEMA, "label")
    with pytest.raises(FileNotFoundError):
        load_csv(str(tmp_path / "absent.csv"), SCHEMA, "label")


def test_schema_round_trip():
    text = format_schema(SCHEMA, "label")
    feats, label = parse_schema(text)
    assert label == "label" and feats == SCHEMA


def test_feature_invariants():
    with pytest.raises(SchemaError):
        FeatureMeta("a", "integer", 0.5, 3)
    with pytest.raises(SchemaError):
        FeatureMeta("a", "binary", 0, 2)
    with pytest.raises(SchemaError):
        FeatureMeta("a", "continuous", 1, 1)


def test_csv_round_trip(tmp_path):
    ds = Dataset(tuple(SCHEMA), np.array([[20.0, 1.5], [30.0, 2.0 / 3.0]]), np.array([1, -1]), "y")
    path = str(tmp_path / "w.csv")
    write_csv(ds, path)
    back = load_csv(path, SCHEMA, "y")
    assert np.array_equal(back.rows, ds.rows) and np.array_equal(back.labels, ds.labels)


def test_instance_with_missing(tmp_path):
    x = load_instance(_write(tmp_path, "age,income\n30,NA\n"), SCHEMA)
    assert x.missing_set == (1,)
    x = load_instance(_write(tmp_path, "income,age\n,30\n"), SCHEMA)
    assert x.missing_set == (1,) and x.values[0] == 30


def _table(col):
    ds = Dataset((FeatureMeta("v", "continuous", 0.0, 4.0),), np.array(col, dtype=float)[:, None],
                 np.array([1, -1] * (len(col) // 2) + [1] * (len(col) % 2)))
    return fit_quantiles(ds, 0)


def test_quantile_examples():
    q = _table([1, 2, 3])
    assert 1 / 3 < q(2.0) < 2 / 3
    # regression value for the rank-smoothing rule: (2 + 0.5) / 4
    assert q(2.0) == pytest.approx(0.625)
    assert 0 < q(0.0) < q(1.0)
    assert q(3.5) < 1 and q(4.0) < 1


@given(st.lists(st.floats(0, 4, allow_nan=False), min_size=2, max_size=30), st.floats(0, 4), st.floats(0, 4))
@settings(max_examples=60, deadline=None)
def test_quantiles_monotone_and_open(col, a, b):
    if len(set(col)) < 2:
        return
    q = _table(col)
    lo, hi = sorted((a, b))
    assert 0 < q(lo) <= q(hi) < 1


def test_meta_dict_round_trip():
    ds = Dataset(tuple(SCHEMA), np.array([[20.0, 1.0], [30.0, 2.0], [25.0, 9.0]]), np.array([1, -1, 1]))
    for m in attach_quantiles(ds):
        back = meta_from_dict(meta_to_dict(m))
        assert back == m
        if m.quantiles is not None:
            assert back.quantiles(5.0) == m.quantiles(5.0)
    with pytest.raises(SchemaError):
        meta_from_dict({"name": "x"})


def _rows(n):
    return Dataset((FeatureMeta("a"),), np.linspace(0, 1, n)[:, None], np.where(np.arange(n) % 2, 1, -1))


def test_split_examples():
    tr, te = split(_rows(100), 0.25, seed=7)
    assert (len(tr), len(te)) == (75, 25)
    tr2, te2 = split(_rows(100), 0.25, seed=7)
    assert np.array_equal(tr.rows, tr2.rows) and np.array_equal(te.rows, te2.rows)
    assert sorted(np.vstack([tr.rows, te.rows])[:, 0]) == sorted(_rows(100).rows[:, 0])
    with pytest.raises(ValueError):
        split(_rows(100), 0.0)


def test_mcar_drops_exactly_dstar():
    x = np.arange(10.0)
    for seed in range(20):
        got = inject_missing(x, MCAR(2), seed=seed)
        assert len(got.missing_set) == 2
        obs = list(got.observed_set)
        assert np.array_equal(got.values[obs], x[obs])
    with pytest.raises(ValueError):
        inject_missing(x, MCAR(10))


def test_mar_and_mnar():
    x = np.array([30.0, 80.0])  # (age, income)
    assert inject_missing(x, MAR(target=1, cond=0, threshold=45.0)).missing_set == ()
    assert inject_missing(np.array([50.0, 80.0]), MAR(target=1, cond=0, threshold=45.0)).missing_set == (1,)
    assert inject_missing(x, MNAR(target=1, threshold=60.0)).missing_set == (1,)
    assert inject_missing(x, MNAR(target=1, threshold=90.0)).missing_set == ()
    with pytest.raises(ValueError):
        inject_missing(x, MAR(target=1, cond=1, threshold=0.0))


def test_median_threshold():
    ds = Dataset((FeatureMeta("a", upper=10),), np.array([[1.0], [2.0], [7.0]]), np.array([1, -1, 1]))
    assert median_threshold(ds, 0) == 2.0


def test_incomplete_instance():
    x = IncompleteInstance.from_complete([1.0, 2.0, 3.0], [0, 2])
    assert x.missing_set == (0, 2) and x.observed_set == (1,)
    assert math.isnan(x.values[0]) and not x.is_complete
