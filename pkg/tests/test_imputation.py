import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirecourse.data import Dataset, FeatureMeta, IncompleteInstance
from mirecourse.imputation import (fit_imputer, impute_chained, impute_knn, impute_mean, imputer_from_dict,
                                   imputer_to_dict, sample_candidates)

NAN = np.nan


def _state(rows, kinds=None, lower=0.0, upper=10.0):
    rows = np.asarray(rows, dtype=float)
    kinds = kinds or ["continuous"] * rows.shape[1]
    feats = tuple(FeatureMeta(f"f{d}", k, lower, upper) for d, k in enumerate(kinds))
    return fit_imputer(Dataset(feats, rows, np.where(np.arange(len(rows)) % 2, 1, -1)))


def test_mean_examples():
    st_ = _state([[1, 5], [2, 6], [3, 7]])
    assert impute_mean(IncompleteInstance(np.array([NAN, 6.0])), st_)[0] == 2.0
    x = IncompleteInstance(np.array([1.5, 6.0]))
    assert np.array_equal(impute_mean(x, st_), x.values)
    st_int = _state([[2, 0], [2, 1], [3, 2], [2, 3], [3, 4]], kinds=["integer", "continuous"])
    assert impute_mean(IncompleteInstance(np.array([NAN, 1.0])), st_int)[0] == 2.0  # mean 2.4


def test_rounding_is_half_even():
    st_int = _state([[2, 0], [3, 1]], kinds=["integer", "continuous"])  # mean 2.5
    assert impute_mean(IncompleteInstance(np.array([NAN, 0.0])), st_int)[0] == 2.0


def test_knn_examples():
    rows = [[1, 9], [4, 2], [7, 5], [4, 8]]
    st_ = _state(rows)
    assert impute_knn(IncompleteInstance(np.array([7.0, NAN])), st_, k=1)[1] == 5.0
    full = impute_knn(IncompleteInstance(np.array([3.0, NAN])), st_, k=4)
    assert full[1] == pytest.approx(impute_mean(IncompleteInstance(np.array([3.0, NAN])), st_)[1])
    # rows 1 and 3 share the observed value 4: the lower index wins
    assert impute_knn(IncompleteInstance(np.array([4.0, NAN])), st_, k=1)[1] == 2.0
    with pytest.raises(ValueError):
        impute_knn(IncompleteInstance(np.array([4.0, NAN])), st_, k=5)


def test_chained_examples():
    st_ = _state([[1, 5], [2, 6], [3, 7]])
    x = IncompleteInstance(np.array([1.5, 6.0]))
    assert np.array_equal(impute_chained(x, st_, sweeps=3), x.values)
    y = IncompleteInstance(np.array([NAN, 6.5]))
    assert np.array_equal(impute_chained(y, st_), impute_chained(y, st_))


def test_chained_recovers_linear_relation():
    x1 = np.linspace(0, 4, 30)
    st_ = _state(np.column_stack([x1, 2 * x1]))
    for v in (0.5, 1.7, 3.2):
        got = impute_chained(IncompleteInstance(np.array([v, NAN])), st_, sweeps=2)
        assert got[1] == pytest.approx(2 * v, abs=1e-6)


def test_chained_stays_in_bounds():
    rng = np.random.default_rng(0)
    st_ = _state(rng.uniform(0, 10, size=(50, 3)))
    for seed in range(20):
        v = impute_chained(IncompleteInstance(np.array([NAN, NAN, 9.9])), st_, noise=True, seed=seed)
        assert np.all((v >= 0) & (v <= 10))


def test_candidate_examples():
    rng = np.random.default_rng(0)
    st_ = _state(rng.uniform(0, 10, size=(50, 3)))
    x = IncompleteInstance(np.array([2.0, NAN, 3.0]))
    S = sample_candidates(x, "chained_draws", st_, seed=1)
    assert len(S) == 100 and np.all(S.candidates[:, [0, 2]] == [2.0, 3.0])
    full = IncompleteInstance(np.array([2.0, 1.0, 3.0]))
    assert np.all(sample_candidates(full, "chained_draws", st_, N=7).candidates == full.values)
    U = sample_candidates(x, "uniform", st_, N=10_000, seed=2).candidates[:, 1]
    assert U.min() < 0.1 and U.max() > 9.9 and U.min() >= 0 and U.max() <= 10
    assert np.array_equal(sample_candidates(x, "uniform", st_, N=5, seed=3).candidates,
                          sample_candidates(x, "uniform", st_, N=5, seed=3).candidates)
    with pytest.raises(ValueError):
        sample_candidates(x, "gaussian", st_)
    with pytest.raises(ValueError):
        sample_candidates(x, "uniform", st_, N=0)


def test_state_round_trip():
    rng = np.random.default_rng(0)
    st_ = _state(rng.uniform(0, 10, size=(20, 3)), kinds=["integer", "continuous", "continuous"])
    back = imputer_from_dict(imputer_to_dict(st_))
    x = IncompleteInstance(np.array([NAN, 4.0, NAN]))
    assert np.array_equal(impute_chained(x, back), impute_chained(x, st_))
    assert np.array_equal(impute_knn(x, back), impute_knn(x, st_))


@given(st.lists(st.booleans(), min_size=3, max_size=3), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_observed_coordinates_never_change(mask, seed):
    rng = np.random.default_rng(seed)
    st_ = _state(rng.uniform(0, 10, size=(15, 3)))
    raw = rng.uniform(0, 10, size=3)
    x = IncompleteInstance(np.where(mask, NAN, raw))
    for v in (impute_mean(x, st_), impute_knn(x, st_, k=3), impute_chained(x, st_, noise=True, seed=seed)):
        obs = list(x.observed_set)
        assert np.array_equal(v[obs], raw[obs]) and not np.isnan(v).any()
