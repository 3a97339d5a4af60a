"""One-step forecasters and the residual bootstrap."""

import numpy as np
import pytest

from nlrecon import (
    FORECASTERS,
    LinearARForecaster,
    PersistenceForecaster,
    bootstrap_predictive,
    fit_forecaster,
)


def test_persistence_predicts_a_copy():
    model = PersistenceForecaster().fit(np.zeros((3, 2)), np.ones((3, 2)))
    points = np.array([[1.0, -2.0], [0.5, 4.0]])
    out = model.predict(points)
    np.testing.assert_array_equal(out, points)
    out[0, 0] = 99.0
    assert points[0, 0] == 1.0


def test_linear_ar_recovers_affine_map_exactly():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 3))
    y = 0.7 * x + 0.3
    model = LinearARForecaster().fit(x, y)
    np.testing.assert_allclose(model.slope, [0.7, 0.7, 0.7], atol=1e-12)
    np.testing.assert_allclose(model.intercept, [0.3, 0.3, 0.3], atol=1e-12)
    probe = rng.normal(size=(7, 3))
    np.testing.assert_allclose(model.predict(probe), 0.7 * probe + 0.3, atol=1e-12)


def test_linear_ar_per_coordinate_slopes():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(80, 2))
    y = np.column_stack([2.0 * x[:, 0] - 1.0, -0.5 * x[:, 1]])
    model = LinearARForecaster().fit(x, y)
    np.testing.assert_allclose(model.slope, [2.0, -0.5], atol=1e-12)
    np.testing.assert_allclose(model.intercept, [-1.0, 0.0], atol=1e-12)


def test_linear_ar_constant_coordinate_falls_back_to_persistence():
    rng = np.random.default_rng(5)
    x = np.column_stack([np.full(30, 2.5), rng.normal(size=30)])
    y = np.column_stack([np.full(30, 2.5), 0.9 * x[:, 1] + 0.1])
    with pytest.warns(UserWarning, match=r"constant training coordinate"):
        model = LinearARForecaster().fit(x, y)
    assert model.slope[0] == 1.0
    assert model.intercept[0] == 0.0
    assert model.slope[1] == pytest.approx(0.9, abs=1e-10)
    probe = np.array([[2.5, 1.0]])
    assert model.predict(probe)[0, 0] == 2.5


def test_linear_ar_input_validation():
    model = LinearARForecaster()
    with pytest.raises(ValueError, match="matching"):
        model.fit(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError, match="matching"):
        model.fit(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError, match="matching"):
        model.fit(np.zeros((1, 2)), np.zeros((1, 2)))
    with pytest.raises(ValueError, match="not fitted"):
        model.predict(np.zeros((2, 2)))


def test_fit_forecaster_by_name_and_object():
    x = np.arange(10.0).reshape(5, 2)
    y = x + 1.0
    assert isinstance(fit_forecaster(x, y, "persistence"), PersistenceForecaster)
    assert isinstance(fit_forecaster(x, y, "linear-ar"), LinearARForecaster)

    custom = LinearARForecaster()
    assert fit_forecaster(x, y, custom) is custom

    with pytest.raises(LookupError, match="persistence"):
        fit_forecaster(x, y, "arima")
    with pytest.raises(ValueError, match="fit"):
        fit_forecaster(x, y, object())


def test_forecaster_registry_names():
    assert set(FORECASTERS) == {"persistence", "linear-ar"}
    for cls in FORECASTERS.values():
        assert hasattr(cls, "fit") and hasattr(cls, "predict")


def test_bootstrap_predictive_shape_and_support():
    rng = np.random.default_rng(6)
    x_cal = rng.normal(size=(40, 2))
    y_cal = x_cal + rng.normal(scale=0.1, size=(40, 2))
    model = fit_forecaster(x_cal, y_cal, "persistence")
    z_t = np.array([0.3, -0.2])
    atoms = bootstrap_predictive(model, x_cal, y_cal, z_t, 500, np.random.default_rng(7))
    assert atoms.shape == (500, 2)
    # every atom is point forecast + one observed residual vector
    residuals = y_cal - x_cal
    diffs = atoms - z_t
    dist = np.abs(diffs[:, None, :] - residuals[None, :, :]).max(axis=2).min(axis=1)
    assert dist.max() <= 1e-12


def test_bootstrap_predictive_deterministic_per_seed():
    rng = np.random.default_rng(8)
    x_cal = rng.normal(size=(20, 3))
    y_cal = rng.normal(size=(20, 3))
    model = fit_forecaster(x_cal, y_cal, "linear-ar")
    z_t = np.zeros(3)
    a = bootstrap_predictive(model, x_cal, y_cal, z_t, 64, np.random.default_rng([1, 2]))
    b = bootstrap_predictive(model, x_cal, y_cal, z_t, 64, np.random.default_rng([1, 2]))
    c = bootstrap_predictive(model, x_cal, y_cal, z_t, 64, np.random.default_rng([1, 3]))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bootstrap_predictive_validation():
    x = np.zeros((5, 2))
    model = fit_forecaster(x, x, "persistence")
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="at least 2 atoms"):
        bootstrap_predictive(model, x, x, np.zeros(2), 1, rng)
    with pytest.raises(ValueError, match="matching"):
        bootstrap_predictive(model, x, np.zeros((4, 2)), np.zeros(2), 8, rng)
