import math

import numpy as np
import pytest

from almabdc.errors import InputError
from almabdc.surrogate import (
    GpDataset,
    KernelSpec,
    gp_condition,
    gp_condition_hallucinated,
    gp_fit,
    gp_predict,
    gp_predict_many,
    integrated_posterior_variance,
    kernel_eval,
)

SE = KernelSpec("squared_exponential", 0.5, 2.0)
M32 = KernelSpec("matern32", 0.35, 1.0)


def dense_prediction(kernel, X, y, noise, mu, xs):
    A = np.linalg.inv(kernel.matrix(X, X) + noise**2 * np.eye(len(y)))
    ks = kernel.matrix(X, xs)
    mean = mu + ks.T @ A @ (y - mu)
    var = kernel.signal_variance - np.einsum("ij,ik,kj->j", ks, A, ks)
    return mean, var


def test_kernel_values_at_zero_and_known_distance():
    assert kernel_eval(SE, [0.0], [0.0]) == pytest.approx(2.0)
    assert kernel_eval(SE, [0.0], [0.5]) == pytest.approx(2.0 * math.exp(-0.5))
    z = math.sqrt(3.0) * 0.35 / 0.35
    assert kernel_eval(M32, [0.0, 0.0], [0.35, 0.0]) == pytest.approx((1 + z) * math.exp(-z))


def test_kernel_rejects_bad_hyperparameters():
    with pytest.raises(InputError):
        KernelSpec("squared_exponential", 0.0, 1.0)
    with pytest.raises(InputError):
        KernelSpec("matern32", 1.0, -1.0)
    with pytest.raises(ValueError):
        KernelSpec("rbf", 1.0, 1.0)


def test_empty_posterior_is_the_prior():
    post = gp_fit(GpDataset.empty(2, 0.1), SE, prior_mean=0.7)
    s = gp_predict(post, [0.3, 0.4])
    assert s.mean == 0.7 and s.variance == 2.0


@pytest.mark.parametrize("kernel", [SE, M32])
def test_predictions_match_dense_inverse(kernel):
    rng = np.random.default_rng(3)
    X = rng.random((12, 2))
    y = rng.normal(size=12)
    post = gp_fit(GpDataset(X, y, 0.1), kernel, prior_mean=0.2)
    xs = rng.random((7, 2))
    mean, var = gp_predict_many(post, xs)
    ref_mean, ref_var = dense_prediction(kernel, X, y, 0.1, 0.2, xs)
    np.testing.assert_allclose(mean, ref_mean, atol=1e-10)
    np.testing.assert_allclose(var, ref_var, atol=1e-10)


def test_rank_one_condition_equals_refit():
    rng = np.random.default_rng(5)
    X = rng.random((8, 3))
    y = rng.normal(size=8)
    post = gp_fit(GpDataset(X[:5], y[:5], 0.05), M32)
    for x, v in zip(X[5:], y[5:]):
        post = gp_condition(post, x, v)
    full = gp_fit(GpDataset(X, y, 0.05), M32)
    xs = rng.random((4, 3))
    for a, b in zip(gp_predict_many(post, xs), gp_predict_many(full, xs)):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_duplicate_noiseless_points_survive_through_jitter():
    X = np.array([[0.1], [0.1], [0.1]])
    post = gp_fit(GpDataset(X, [1.0, 1.0, 1.0], 0.0), SE)
    assert post.jitter > 0
    assert gp_predict(post, [0.1]).mean == pytest.approx(1.0, abs=1e-4)


def test_noise_free_interpolation():
    X = np.array([[0.0], [0.5], [1.0]])
    y = np.array([0.3, -0.2, 0.8])
    post = gp_fit(GpDataset(X, y, 0.0), SE)
    mean, var = gp_predict_many(post, X)
    np.testing.assert_allclose(mean, y, atol=1e-5)
    assert np.all(var < 1e-5)


def test_believer_step_keeps_mean_and_shrinks_variance():
    rng = np.random.default_rng(1)
    post = gp_fit(GpDataset(rng.random((4, 2)), rng.normal(size=4), 0.1), SE)
    x = np.array([0.9, 0.1])
    before = gp_predict(post, x)
    after = gp_predict(gp_condition_hallucinated(post, x), x)
    assert after.mean == pytest.approx(before.mean, abs=1e-10)
    assert after.variance < before.variance


def test_ipv_decreases_with_data():
    grid = np.random.default_rng(0).random((30, 2))
    post = gp_fit(GpDataset.empty(2, 0.2), M32)
    prior_ipv = integrated_posterior_variance(post, grid)
    post = gp_condition(post, [0.5, 0.5], 1.0)
    assert integrated_posterior_variance(post, grid) < prior_ipv == pytest.approx(1.0)


def test_input_validation():
    with pytest.raises(InputError):
        GpDataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(InputError):
        GpDataset(np.zeros((1, 1)), [np.nan])
    post = gp_fit(GpDataset(np.zeros((1, 2)), [0.0], 0.1), SE)
    with pytest.raises(InputError):
        gp_predict(post, [0.0, 0.0, 0.0])
    with pytest.raises(InputError):
        integrated_posterior_variance(post, np.empty((0, 2)))
