import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from csiquant.errors import ConfigError, DataError, DimensionError
from csiquant.losses import (LossConfig, adaptive_weight, adaptive_weights, codebook_loss, codeword_weights,
                             composite_loss, loss_weights)
from csiquant.quantizer import Codebook, CodebookBank, quantize_vector


def test_config_validation():
    assert LossConfig().adaptive and LossConfig().use_log
    assert not LossConfig(mode="fixed").adaptive and not LossConfig(mode="fixed").use_log
    assert LossConfig(mode="adaptive").adaptive and not LossConfig(mode="adaptive").use_log
    for kw in (dict(mode="soft"), dict(beta=0.0), dict(eps=-1.0)):
        with pytest.raises(ConfigError):
            LossConfig(**kw)


@pytest.mark.parametrize("j", [0, 1, 2, 3])
def test_adaptive_weight_unit_spacing(j):
    # interior 0.1 * 2, edges 2 * 0.1 * 1
    assert adaptive_weight(Codebook([0.0, 1.0, 2.0, 3.0]), j, 0.1) == pytest.approx(0.2)


def test_adaptive_weight_three_codewords():
    # a 3-codeword set is not a valid codebook, so check the rule on (0, 1, 2, 5)
    cb = Codebook([0.0, 1.0, 2.0, 5.0])
    assert adaptive_weight(cb, 1, 0.1) == pytest.approx(0.1 * (2 - 0))
    assert adaptive_weight(cb, 2, 0.1) == pytest.approx(0.1 * (5 - 1))
    assert adaptive_weight(cb, 3, 0.1) == pytest.approx(2 * 0.1 * (5 - 2))
    assert adaptive_weight(cb, 0, 0.1) == pytest.approx(2 * 0.1 * (1 - 0))


def test_single_codeword_weight_is_zero():
    assert adaptive_weight(Codebook([1.0]), 0, 0.1) == 0.0
    assert codeword_weights(Codebook([1.0]), 0.1).tolist() == [0.0]


@given(st.integers(1, 6), st.floats(1e-3, 10), st.floats(-5, 5), st.floats(0.01, 0.25))
def test_uniform_spacing_gives_constant_weight(bits, delta, start, beta):
    cb = Codebook(start + delta * np.arange(1 << bits))
    w = codeword_weights(cb, beta)
    np.testing.assert_allclose(w, 2 * beta * delta, rtol=1e-9)
    assert all(adaptive_weight(cb, j, beta) == w[j] for j in range(len(cb)))


@given(arrays(np.float64, 8, elements=st.floats(-100, 100), unique=True), st.floats(0.01, 1))
def test_weights_positive(vals, beta):
    cb = Codebook(np.sort(vals))
    assert np.all(codeword_weights(cb, beta) > 0)


def test_per_sample_weights_follow_selected_codeword(rng):
    bank = CodebookBank([Codebook([0.0, 1.0, 3.0, 7.0]), Codebook([-1.0, 1.0])])
    z = rng.uniform(-2, 8, size=(20, 2))
    q = quantize_vector(z, bank)
    w = adaptive_weights(q.indices, bank, 0.1)
    for i in range(20):
        for m in range(2):
            assert w[i, m] == adaptive_weight(bank[m], q.indices[i, m], 0.1)
    np.testing.assert_array_equal(loss_weights(q.indices, bank, LossConfig(0.1, mode="fixed")), 0.1)


# -- composite loss ---------------------------------------------------------------------


def test_log_loss_examples():
    x = np.zeros((1, 4))
    x_hat = np.array([[1e-2, 0, 0, 0]])
    z = np.zeros((1, 2))
    lv = composite_loss(x, x_hat, z, z, 0.1)
    assert lv.total == pytest.approx(np.log(1e-4 + 1e-12), rel=1e-12)
    assert lv.total == pytest.approx(-9.2103, abs=1e-4)
    assert not lv.grad_z.any()

    x_hat = np.array([[1.0, 0, 0, 0]])
    zq = np.array([[0.5, 0.0]])
    lv = composite_loss(x, x_hat, z, zq, np.array([[0.2, 0.2]]))
    assert lv.total == pytest.approx(0.05, abs=1e-11)


def test_fixed_mode_example():
    x = np.zeros((1, 2))
    x_hat = np.array([[1.0, 1.0]])
    z = np.zeros((1, 3))
    zq = np.array([[1.0, 1.0, 1.0]])
    lv = composite_loss(x, x_hat, z, zq, 0.1, use_log=False)
    assert lv.total == pytest.approx(2.3)
    assert lv.recon_mse == 2.0 and lv.quant == pytest.approx(0.3)


def _rand_batch(rng, n=5, d=6, M=3):
    return rng.normal(size=(n, d)), rng.normal(size=(n, d)), rng.normal(size=(n, M)), rng.normal(size=(n, M))


@pytest.mark.parametrize("use_log", [True, False])
def test_composite_gradients_match_finite_differences(rng, use_log):
    x, x_hat, z, zq = _rand_batch(rng)
    w = rng.uniform(0.01, 0.3, size=z.shape)
    lv = composite_loss(x, x_hat, z, zq, w, use_log)
    h = 1e-6
    for arr, grad in ((x_hat, lv.grad_xhat), (z, lv.grad_z)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = composite_loss(x, x_hat, z, zq, w, use_log).total
            arr[idx] = old - h
            down = composite_loss(x, x_hat, z, zq, w, use_log).total
            arr[idx] = old
            assert grad[idx] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-9)


@pytest.mark.parametrize("e", [1.0, 1e-3])
def test_log_gradient_is_plain_gradient_over_error(rng, e):
    x = np.zeros((4, 5))
    x_hat = rng.normal(size=(4, 5))
    x_hat *= np.sqrt(e * 4 / np.sum(x_hat ** 2))  # mean squared error exactly e
    z = np.zeros((4, 2))
    log_g = composite_loss(x, x_hat, z, z, 0.1, use_log=True).grad_xhat
    plain_g = composite_loss(x, x_hat, z, z, 0.1, use_log=False).grad_xhat
    np.testing.assert_allclose(log_g, plain_g / (e + 1e-12), rtol=1e-6)


def test_adaptive_equals_fixed_on_uniform_codebooks(rng):
    beta, delta = 0.05, 0.3
    bank = CodebookBank([Codebook(-0.45 + delta * np.arange(4)) for _ in range(3)])
    x, x_hat, z, _ = _rand_batch(rng)
    q = quantize_vector(z, bank)
    ad = composite_loss(x, x_hat, z, q.values, adaptive_weights(q.indices, bank, beta))
    fx = composite_loss(x, x_hat, z, q.values, 2 * beta * delta)
    assert abs(ad.total - fx.total) <= 1e-12
    np.testing.assert_allclose(ad.grad_z, fx.grad_z, atol=1e-15)


@given(arrays(np.float64, (3, 4), elements=st.floats(-1e3, 1e3)), arrays(np.float64, (3, 2), elements=st.floats(-1e3, 1e3)))
def test_loss_finite_for_finite_inputs(x, z):
    lv = composite_loss(x, x, z, z, 0.1)
    assert np.isfinite(lv.total)
    assert lv.total == pytest.approx(np.log(1e-12))


def test_composite_loss_errors():
    with pytest.raises(DataError):
        composite_loss(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 1)), np.zeros((0, 1)), 0.1)
    with pytest.raises(DimensionError):
        composite_loss(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 1)), np.zeros((2, 1)), 0.1)


# -- codebook loss ------------------------------------------------------------------------


def test_codebook_loss_examples():
    bank = CodebookBank([Codebook([0.0, 1.0])])
    loss, grads = codebook_loss(np.array([[0.4]]), np.array([[0]]), bank)
    assert loss == pytest.approx(0.16)
    np.testing.assert_allclose(grads[0], [-0.8, 0.0])
    loss, grads = codebook_loss(np.array([[0.0], [1.0]]), np.array([[0], [1]]), bank)
    assert loss == 0 and not grads[0].any()


def test_codebook_step_points_to_cluster_mean():
    # five samples, two codewords; a small descent step moves each codeword
    # toward the mean of its assigned samples, which is the K-means update
    z = np.array([[-1.2], [-0.8], [-0.1], [0.9], [2.5]])
    cb = Codebook([-0.5, 1.0])
    bank = CodebookBank([cb])
    q = quantize_vector(z, bank)
    _, grads = codebook_loss(z, q.indices, bank)
    means = np.array([z[q.indices[:, 0] == j, 0].mean() for j in range(2)])
    step = -1e-3 * grads[0]
    assert np.all(np.sign(step) == np.sign(means - cb.codewords))
    counts = np.bincount(q.indices[:, 0], minlength=2)
    # gradient = 2 * count * (w - mean) / n exactly
    np.testing.assert_allclose(grads[0], 2 * counts * (cb.codewords - means) / 5, rtol=1e-12)


def test_codebook_loss_matches_quant_residual(rng):
    bank = CodebookBank([Codebook(np.sort(rng.normal(size=4))) for _ in range(3)])
    z = rng.normal(size=(30, 3))
    q = quantize_vector(z, bank)
    loss, grads = codebook_loss(z, q.indices, bank)
    assert loss == pytest.approx(np.mean(np.sum((q.values - z) ** 2, axis=1)))
    assert [g.shape for g in grads] == [(4,)] * 3
