import numpy as np
import pytest

from app.core.errors import ConfigError, DataError, ShapeError
from app.numerics.aalr import AalrScaler


def test_fit_takes_column_extrema():
    scaler = AalrScaler.fit([[2.0, -1.0], [4.0, 0.0], [3.0, 5.0]])
    np.testing.assert_array_equal(scaler.z_min, [2.0, -1.0])
    np.testing.assert_array_equal(scaler.z_max, [4.0, 5.0])


def test_fit_single_row_and_permutation_invariance():
    row = np.array([[1.5, -2.0, 0.0]])
    single = AalrScaler.fit(row)
    np.testing.assert_array_equal(single.z_min, row[0])
    np.testing.assert_array_equal(single.z_max, row[0])
    x = np.random.default_rng(0).normal(size=(20, 3))
    shuffled = x[np.random.default_rng(1).permutation(20)]
    assert AalrScaler.fit(x).fingerprint() == AalrScaler.fit(shuffled).fingerprint()


def test_transform_hand_values():
    scaler = AalrScaler.fit([[2.0], [4.0], [3.0]])
    out = scaler.transform([[3.0], [2.0]])
    assert out[0, 0] == (3.0 - 2.0) / (2.0 + 1e-8)
    assert out[0, 0] == pytest.approx(0.4999999975, abs=1e-15)
    assert out[1, 0] == 0.0


def test_transform_constant_column_maps_to_lower_bound():
    scaler = AalrScaler.fit([[7.0], [7.0]], a=0.0, b=np.pi)
    assert scaler.transform([[7.0]])[0, 0] == 0.0


def test_training_columns_land_in_interval_and_eval_rows_are_not_clipped():
    x = np.random.default_rng(3).normal(size=(15, 4))
    scaler = AalrScaler.fit(x, a=0.0, b=np.pi)
    scaled = scaler.transform(x)
    assert scaled.min() >= 0.0 and scaled.max() <= np.pi
    outside = scaler.transform(scaler.z_max[None, :] + 10.0)
    assert np.all(outside > np.pi)


def test_transform_is_monotone_and_leaves_scaler_untouched():
    x = np.random.default_rng(5).normal(size=(10, 2))
    scaler = AalrScaler.fit(x)
    before = scaler.fingerprint()
    lo = np.random.default_rng(6).normal(size=(8, 2))
    hi = lo + np.abs(np.random.default_rng(7).normal(size=(8, 2)))
    assert np.all(scaler.transform(lo) <= scaler.transform(hi))
    assert scaler.fingerprint() == before


def test_empty_and_mismatched_inputs():
    scaler = AalrScaler.fit([[0.0, 1.0], [1.0, 2.0]])
    assert scaler.transform(np.zeros((0, 2))).shape == (0, 2)
    with pytest.raises(ShapeError):
        scaler.transform([[1.0, 2.0, 3.0]])
    with pytest.raises(DataError):
        AalrScaler.fit(np.zeros((0, 2)))


def test_interval_must_be_ordered():
    with pytest.raises(ConfigError):
        AalrScaler.fit([[0.0]], a=1.0, b=1.0)
