import math

import numpy as np
import pytest

from semnav.mlp import (
    MlpModel,
    init_mlp,
    mlp_backward,
    mlp_forward,
    sgd_step,
    softmax_cross_entropy,
    softmax_cross_entropy_batch,
    zero_mlp,
)


def test_zero_model_zero_logits():
    model = zero_mlp([3, 4, 2])
    assert np.array_equal(mlp_forward(model, np.ones(3)), np.zeros(2))


def test_identity_linear_layer():
    model = MlpModel([3, 3], [np.eye(3)], [np.zeros(3)])
    x = np.array([0.1, -2.0, 5.0])
    assert np.allclose(mlp_forward(model, x), x)


def test_tiny_model_hand_computed():
    # 2-2-2 with fixed constants, ReLU hidden, identity output.
    w1 = np.array([[1.0, -1.0], [0.5, 2.0]])
    b1 = np.array([0.0, -1.0])
    w2 = np.array([[1.0, 1.0], [-1.0, 0.5]])
    b2 = np.array([0.5, 0.0])
    model = MlpModel([2, 2, 2], [w1, w2], [b1, b2])
    x = np.array([1.0, 2.0])
    # z1 = [1-2, 0.5+4-1] = [-1, 3.5]; a1 = [0, 3.5]
    # z2 = [0+3.5+0.5, 0+1.75+0] = [4.0, 1.75]
    assert np.allclose(mlp_forward(model, x), [4.0, 1.75])


def test_batch_forward_matches_single():
    model = init_mlp([4, 6, 3], seed=9)
    xs = np.random.default_rng(0).normal(size=(5, 4))
    batch = mlp_forward(model, xs)
    for i in range(5):
        assert np.allclose(batch[i], mlp_forward(model, xs[i]))


def test_dimension_mismatch_raises():
    model = zero_mlp([3, 2])
    with pytest.raises(ValueError):
        mlp_forward(model, np.ones(4))


def test_zero_upstream_zero_grads():
    model = init_mlp([3, 5, 2], seed=1)
    x = np.ones(3)
    wg, bg, xg = mlp_backward(model, x, np.zeros(2))
    assert all(not g.any() for g in wg)
    assert all(not g.any() for g in bg)
    assert not xg.any()


def test_linear_input_gradient_is_weight_transpose():
    w = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    model = MlpModel([3, 2], [w], [np.zeros(2)])
    upstream = np.array([1.0, -1.0])
    _, _, xg = mlp_backward(model, np.ones(3), upstream)
    assert np.allclose(xg, w.T @ upstream)


def finite_difference_check(model, x, rel_tol=1e-5, abs_floor=1e-8, step=1e-5):
    """Compare analytic gradients of sum(u * logits) against central differences."""
    rng = np.random.default_rng(12345)
    upstream = rng.normal(size=model.out_dim)

    weight_grads, bias_grads, input_grad = mlp_backward(model, x, upstream)

    def objective():
        return float(np.dot(upstream, mlp_forward(model, x)))

    def check(analytic, numeric):
        denom = max(abs(analytic), abs(numeric), abs_floor)
        assert abs(analytic - numeric) / denom < rel_tol or abs(
            analytic - numeric
        ) < abs_floor

    for l, w in enumerate(model.weights):
        flat = w.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            plus = objective()
            flat[idx] = orig - step
            minus = objective()
            flat[idx] = orig
            check(weight_grads[l].ravel()[idx], (plus - minus) / (2 * step))
    for l, b in enumerate(model.biases):
        for idx in range(b.size):
            orig = b[idx]
            b[idx] = orig + step
            plus = objective()
            b[idx] = orig - step
            minus = objective()
            b[idx] = orig
            check(bias_grads[l][idx], (plus - minus) / (2 * step))
    for idx in range(x.size):
        orig = x[idx]
        x[idx] = orig + step
        plus = objective()
        x[idx] = orig - step
        minus = objective()
        x[idx] = orig
        check(input_grad[idx], (plus - minus) / (2 * step))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    for trial in range(10):
        sizes = [int(rng.integers(2, 5)) for _ in range(int(rng.integers(2, 4)))]
        model = init_mlp(sizes, seed=trial)
        x = rng.normal(size=sizes[0])
        finite_difference_check(model, x)


def test_batch_gradient_is_sum_of_singles():
    model = init_mlp([3, 4, 2], seed=5)
    rng = np.random.default_rng(8)
    xs = rng.normal(size=(4, 3))
    ups = rng.normal(size=(4, 2))
    wg, bg, xg = mlp_backward(model, xs, ups)
    wg_sum = [np.zeros_like(w) for w in model.weights]
    bg_sum = [np.zeros_like(b) for b in model.biases]
    for i in range(4):
        wgi, bgi, xgi = mlp_backward(model, xs[i], ups[i])
        for a, b_ in zip(wg_sum, wgi):
            a += b_
        for a, b_ in zip(bg_sum, bgi):
            a += b_
        assert np.allclose(xg[i], xgi)
    for a, b_ in zip(wg, wg_sum):
        assert np.allclose(a, b_)
    for a, b_ in zip(bg, bg_sum):
        assert np.allclose(a, b_)


# ---------------------------------------------------------------------------
# softmax cross entropy
# ---------------------------------------------------------------------------


def test_uniform_logits_loss_is_log_c():
    for c in (2, 3, 7):
        loss, _ = softmax_cross_entropy(np.zeros(c), 0)
        assert loss == pytest.approx(math.log(c))


def test_large_logits_stable():
    loss, grad = softmax_cross_entropy(np.array([1000.0, 0.0]), 0)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.isfinite(grad).all()


def test_gradient_sums_to_zero():
    rng = np.random.default_rng(1)
    for _ in range(20):
        logits = rng.normal(scale=5.0, size=4)
        _, grad = softmax_cross_entropy(logits, int(rng.integers(4)))
        assert abs(grad.sum()) < 1e-12


def test_loss_strictly_positive_for_finite_logits():
    rng = np.random.default_rng(2)
    for _ in range(20):
        logits = rng.normal(scale=3.0, size=3)
        loss, _ = softmax_cross_entropy(logits, 1)
        assert loss > 0.0


def test_invalid_class_id():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros(3), 3)


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=(6, 4))
    targets = rng.integers(0, 4, size=6)
    losses, grads = softmax_cross_entropy_batch(logits, targets)
    for i in range(6):
        loss, grad = softmax_cross_entropy(logits[i], int(targets[i]))
        assert losses[i] == pytest.approx(loss)
        assert np.allclose(grads[i], grad)


def test_softmax_grad_matches_finite_differences():
    logits = np.array([0.3, -1.2, 2.0])
    _, grad = softmax_cross_entropy(logits, 2)
    step = 1e-6
    for i in range(3):
        bumped = logits.copy()
        bumped[i] += step
        plus, _ = softmax_cross_entropy(bumped, 2)
        bumped[i] -= 2 * step
        minus, _ = softmax_cross_entropy(bumped, 2)
        assert grad[i] == pytest.approx((plus - minus) / (2 * step), abs=1e-6)


# ---------------------------------------------------------------------------
# init and serialization
# ---------------------------------------------------------------------------


def test_init_reproducible_and_bounded():
    a = init_mlp([9, 16, 4], seed=77)
    b = init_mlp([9, 16, 4], seed=77)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert not np.array_equal(init_mlp([9, 16, 4], seed=78).weights[0], a.weights[0])
    for sizes, w in zip([9, 16], a.weights):
        assert np.abs(w).max() <= math.sqrt(6.0 / sizes)
    for bias in a.biases:
        assert not bias.any()


def test_json_roundtrip_bit_exact():
    model = init_mlp([5, 8, 3], seed=123)
    again = MlpModel.from_json(model.to_json())
    assert again.layer_sizes == model.layer_sizes
    for wa, wb in zip(again.weights, model.weights):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(again.biases, model.biases):
        assert np.array_equal(ba, bb)
    assert model.to_json() == again.to_json()


def test_sgd_step_moves_against_gradient():
    model = zero_mlp([2, 2])
    wg = [np.ones((2, 2))]
    bg = [np.ones(2)]
    sgd_step(model, wg, bg, learning_rate=0.1)
    assert np.allclose(model.weights[0], -0.1)
    assert np.allclose(model.biases[0], -0.1)
