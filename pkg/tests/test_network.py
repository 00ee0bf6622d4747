import numpy as np
import pytest

from galleryscope.nn import (
    LayerSpec,
    NetworkSpec,
    ShapeError,
    conv,
    dense,
    dense_backward,
    finite_diff_grad_check,
    init_params,
    maxpool,
    network_backward,
    network_forward,
    relu,
    sgd_momentum_step,
    softmax_cross_entropy,
    vgg_nano,
    zero_velocity,
)


def small_net(classes=3, hw=(4, 4), channels=2):
    layers = (conv(4), relu(), maxpool(), dense(classes), LayerSpec("softmax"))
    return NetworkSpec(layers=layers, input_hw=hw, in_channels=channels, classes=classes)


def test_spec_geometry_propagation():
    spec = vgg_nano(classes=7, input_hw=(64, 64))
    shapes = spec.activation_shapes()
    assert shapes[0] == (3, 64, 64)
    assert shapes[-1] == (7,)
    assert spec.param_shapes()["dense12.w"] == (64, 32 * 4 * 4)


def test_spec_rejects_head_width_mismatch():
    layers = (dense(5), LayerSpec("softmax"))
    with pytest.raises(ShapeError):
        NetworkSpec(layers=layers, input_hw=(2, 2), in_channels=1, classes=4)


def test_spec_rejects_odd_pool_geometry():
    layers = (maxpool(), maxpool(), dense(2), LayerSpec("softmax"))
    with pytest.raises(ShapeError):
        NetworkSpec(layers=layers, input_hw=(6, 6), in_channels=1, classes=2)


def test_spec_json_round_trip():
    spec = vgg_nano(classes=5, input_hw=(32, 32))
    again = NetworkSpec.from_json(spec.to_json())
    assert again == spec


def test_single_dense_layer_backward_reduces_to_dense_formula():
    layers = (dense(3), LayerSpec("softmax"))
    spec = NetworkSpec(layers=layers, input_hw=(2, 2), in_channels=1, classes=3)
    params = init_params(spec, seed=0)
    x = np.random.default_rng(1).standard_normal((1, 2, 2), dtype=np.float32)
    scores, cache = network_forward(spec, params, x)
    _, grad_logits = softmax_cross_entropy(cache.logits[0], 1)
    grads = network_backward(spec, params, cache, grad_logits)

    flat = x.reshape(-1)
    _, dw, db = dense_backward(flat, params["dense0.w"], grad_logits)
    np.testing.assert_allclose(grads["dense0.w"], dw, atol=1e-7)
    np.testing.assert_allclose(grads["dense0.b"], db, atol=1e-7)


def test_two_layer_net_matches_finite_differences():
    spec = small_net()
    params = init_params(spec, seed=2)
    x = np.random.default_rng(3).standard_normal((2, 4, 4), dtype=np.float32)
    report = finite_diff_grad_check(spec, params, x, target=1, step=1e-3, tolerance=1e-3)
    assert report.passed, report.max_rel_error


def test_zero_grad_logits_gives_zero_gradients():
    spec = small_net()
    params = init_params(spec, seed=4)
    x = np.random.default_rng(5).standard_normal((2, 4, 4), dtype=np.float32)
    _, cache = network_forward(spec, params, x)
    grads = network_backward(spec, params, cache, np.zeros(3, dtype=np.float32))
    for name, g in grads.items():
        assert not np.any(g), name


def test_forward_referentially_transparent():
    spec = small_net()
    params = init_params(spec, seed=6)
    x = np.random.default_rng(7).standard_normal((2, 4, 4), dtype=np.float32)
    s1, _ = network_forward(spec, params, x)
    s2, _ = network_forward(spec, params, x)
    np.testing.assert_array_equal(s1, s2)


def test_cache_spec_mismatch_rejected():
    spec = small_net()
    params = init_params(spec, seed=8)
    x = np.random.default_rng(9).standard_normal((2, 4, 4), dtype=np.float32)
    _, cache = network_forward(spec, params, x)
    other = NetworkSpec(layers=(dense(3), LayerSpec("softmax")),
                        input_hw=(4, 4), in_channels=2, classes=3)
    other_params = init_params(other, seed=8)
    with pytest.raises(ShapeError):
        network_backward(other, other_params, cache, np.zeros(3, dtype=np.float32))


def test_forward_rejects_wrong_input_geometry():
    spec = small_net()
    params = init_params(spec, seed=10)
    with pytest.raises(ShapeError):
        network_forward(spec, params, np.zeros((2, 6, 6), dtype=np.float32))


def test_batched_forward_matches_per_sample():
    spec = small_net()
    params = init_params(spec, seed=11)
    xs = np.random.default_rng(12).standard_normal((5, 2, 4, 4), dtype=np.float32)
    batch_scores, _ = network_forward(spec, params, xs)
    for i in range(5):
        single, _ = network_forward(spec, params, xs[i])
        np.testing.assert_allclose(single, batch_scores[i], atol=2e-6)


# --- optimizer ---------------------------------------------------------------

def test_sgd_zero_momentum_is_plain_descent():
    params = {"w": np.array([1.0, 2.0], dtype=np.float32)}
    grads = {"w": np.array([0.5, -0.5], dtype=np.float32)}
    vel = zero_velocity(params)
    new, _ = sgd_momentum_step(params, grads, vel, lr=0.1, momentum=0.0)
    np.testing.assert_allclose(new["w"], [0.95, 2.05], atol=1e-7)


def test_sgd_zero_gradient_fixed_point():
    params = {"w": np.array([3.0], dtype=np.float32)}
    grads = {"w": np.zeros(1, dtype=np.float32)}
    vel = zero_velocity(params)
    new, new_vel = sgd_momentum_step(params, grads, vel, lr=0.1, momentum=0.9)
    np.testing.assert_array_equal(new["w"], params["w"])
    np.testing.assert_array_equal(new_vel["w"], vel["w"])


def test_sgd_two_steps_match_hand_computed_recurrence():
    # constant gradient g, momentum 0.9:
    #   v1 = -lr*g,            p1 = p0 - lr*g
    #   v2 = -lr*g*(1 + 0.9),  p2 = p0 - lr*g*(1 + 1 + 0.9)
    p0, g, lr = 1.0, 2.0, 0.1
    params = {"w": np.array([p0], dtype=np.float32)}
    grads = {"w": np.array([g], dtype=np.float32)}
    vel = zero_velocity(params)
    params, vel = sgd_momentum_step(params, grads, vel, lr=lr, momentum=0.9)
    params, vel = sgd_momentum_step(params, grads, vel, lr=lr, momentum=0.9)
    expected = p0 - lr * g - lr * g * 1.9
    np.testing.assert_allclose(params["w"], [expected], rtol=1e-6)


def test_sgd_shape_mismatch_rejected():
    params = {"w": np.zeros(2, dtype=np.float32)}
    grads = {"w": np.zeros(3, dtype=np.float32)}
    with pytest.raises(ShapeError):
        sgd_momentum_step(params, grads, zero_velocity(params), lr=0.1, momentum=0.0)


# --- gradient check harness --------------------------------------------------

def test_gradcheck_linear_one_parameter_model():
    # y = w*x through a 1-unit dense "network"; gradient is exactly representable
    layers = (dense(2), LayerSpec("softmax"))
    spec = NetworkSpec(layers=layers, input_hw=(1, 1), in_channels=1, classes=2)
    params = {"dense0.w": np.array([[2.0], [-1.0]], dtype=np.float32),
              "dense0.b": np.zeros(2, dtype=np.float32)}
    x = np.array([[[0.5]]], dtype=np.float32)
    report = finite_diff_grad_check(spec, params, x, target=0, step=1e-3, tolerance=1e-6)
    assert report.passed, report.max_rel_error


def test_gradcheck_flags_corrupted_backward():
    spec = small_net()
    params = init_params(spec, seed=13)
    x = np.random.default_rng(14).standard_normal((2, 4, 4), dtype=np.float32)
    _, cache = network_forward(spec, params, x)
    _, grad_logits = softmax_cross_entropy(cache.logits[0], 0)
    grads = network_backward(spec, params, cache, grad_logits)
    grads["conv0.w"] = grads["conv0.w"] + 0.37  # deliberate corruption
    report = finite_diff_grad_check(spec, params, x, target=0, grads=grads)
    assert not report.passed
    assert "conv0.w" in report.flagged


def test_gradcheck_rejects_nonpositive_step():
    spec = small_net()
    params = init_params(spec, seed=15)
    x = np.zeros((2, 4, 4), dtype=np.float32)
    with pytest.raises(ValueError):
        finite_diff_grad_check(spec, params, x, target=0, step=0.0)
