import math

import numpy as np
import pytest

from engine import (
    Adam,
    AdamState,
    LazyLinear,
    Linear,
    Module,
    Tensor,
    adam_step,
    conv2d,
    cross_entropy,
    gelu,
    group_norm,
    linear,
    maxpool2d,
    mse,
    no_grad,
    parameter,
)
from errors import DimensionError, NonFiniteError, OptimizerStateError, ValidationError
from helpers import numerical_grad, relative_error


def conv_oracle(x, k, bias, stride, pad):
    n, c, h, w = x.shape
    kk, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad[0], pad[0]), (pad[1], pad[1])))
    oh = (h + 2 * pad[0] - kh) // stride[0] + 1
    ow = (w + 2 * pad[1] - kw) // stride[1] + 1
    out = np.zeros((n, kk, oh, ow))
    for b in range(n):
        for f in range(kk):
            for i in range(oh):
                for j in range(ow):
                    total = bias[f] if bias is not None else 0.0
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                total += xp[b, ch, i * stride[0] + u, j * stride[1] + v] * k[f, ch, u, v]
                    out[b, f, i, j] = total
    return out


def pool_oracle(x, kernel, stride):
    n, c, h, w = x.shape
    oh = (h - kernel[0]) // stride[0] + 1
    ow = (w - kernel[1]) // stride[1] + 1
    out = np.zeros((n, c, oh, ow))
    for b in range(n):
        for ch in range(c):
            for i in range(oh):
                for j in range(ow):
                    window = x[b, ch, i * stride[0]:i * stride[0] + kernel[0], j * stride[1]:j * stride[1] + kernel[1]]
                    out[b, ch, i, j] = window.max()
    return out


def check_gradient(build, *arrays, tolerance=1e-4):
    """
    build(*tensors) -> scalar Tensor; compares backward() against central differences for every input.
    """
    params = [parameter(a) for a in arrays]
    build(*params).backward()
    for param, array in zip(params, arrays):
        numeric = numerical_grad(lambda: build(*[Tensor(a) for a in arrays]).item(), array)
        assert relative_error(param.grad, numeric) < tolerance


# ----------------------------------------------------------------------
# conv2d
# ----------------------------------------------------------------------

def test_conv2d_scaled_identity_kernel():
    out = conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.full((1, 1, 1, 1), 2.0)))
    assert out.shape == (1, 1, 3, 3)
    assert np.all(out.data == 2.0)


def test_conv2d_matches_loop_oracle_with_column_kernel(rng):
    x = rng.standard_normal((1, 1, 6, 4))
    k = rng.standard_normal((1, 1, 3, 1))
    out = conv2d(Tensor(x), Tensor(k), stride=(1, 1), padding=(1, 0))
    assert out.shape == (1, 1, 6, 4)
    np.testing.assert_allclose(out.data, conv_oracle(x, k, None, (1, 1), (1, 0)), atol=1e-10)


@pytest.mark.parametrize("stride,pad", [((1, 1), (0, 0)), ((2, 1), (1, 0)), ((2, 2), (1, 1)), ((1, 3), (2, 1))])
def test_conv2d_matches_loop_oracle_on_random_shapes(rng, stride, pad):
    x = rng.standard_normal((2, 3, 7, 5))
    k = rng.standard_normal((4, 3, 3, 2))
    b = rng.standard_normal(4)
    out = conv2d(Tensor(x), Tensor(k), Tensor(b), stride, pad)
    np.testing.assert_allclose(out.data, conv_oracle(x, k, b, stride, pad), atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_conv2d_gradients(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((2, 2, 5, 4))
    k = r.standard_normal((3, 2, 3, 2))
    b = r.standard_normal(3)
    weights = r.standard_normal((2, 3, 5, 3))
    check_gradient(lambda xt, kt, bt: (conv2d(xt, kt, bt, (1, 1), (1, 0)) * weights).sum(), x, k, b)


def test_conv2d_strided_input_gradient(rng):
    x = rng.standard_normal((1, 2, 7, 6))
    k = rng.standard_normal((2, 2, 3, 3))
    weights = rng.standard_normal((1, 2, 4, 3))
    check_gradient(lambda xt, kt: (conv2d(xt, kt, stride=(2, 2), padding=(1, 1)) * weights).sum(), x, k)


def test_conv2d_channel_mismatch_reports_both_shapes():
    with pytest.raises(DimensionError) as excinfo:
        conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 2, 2))))
    assert "(1, 2, 4, 4)" in str(excinfo.value)
    assert "(1, 3, 2, 2)" in str(excinfo.value)


def test_conv2d_kernel_larger_than_padded_input():
    with pytest.raises(DimensionError):
        conv2d(Tensor(np.zeros((1, 1, 3, 3))), Tensor(np.zeros((1, 1, 6, 1))), padding=(1, 0))


# ----------------------------------------------------------------------
# maxpool2d
# ----------------------------------------------------------------------

def test_maxpool2d_column_window():
    x = Tensor(np.array([1.0, 3.0, 2.0, 0.0]).reshape(1, 1, 4, 1))
    out = maxpool2d(x, (4, 1), (4, 1))
    assert out.shape == (1, 1, 1, 1)
    assert out.item() == 3.0


def test_maxpool2d_tie_routes_gradient_to_first_element():
    x = parameter(np.full((1, 1, 2, 2), 5.0))
    out = maxpool2d(x, (2, 2))
    assert out.item() == 5.0
    out.sum().backward()
    np.testing.assert_array_equal(x.grad, np.array([[[[1.0, 0.0], [0.0, 0.0]]]]))


@pytest.mark.parametrize("kernel,stride", [((2, 1), (2, 1)), ((4, 1), (4, 1)), ((3, 2), (1, 1)), ((2, 2), (1, 2))])
def test_maxpool2d_matches_loop_oracle(rng, kernel, stride):
    x = rng.standard_normal((2, 3, 9, 6))
    out = maxpool2d(Tensor(x), kernel, stride)
    np.testing.assert_allclose(out.data, pool_oracle(x, kernel, stride), atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_maxpool2d_gradient(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((1, 2, 8, 3))
    weights = r.standard_normal((1, 2, 4, 3))
    check_gradient(lambda xt: (maxpool2d(xt, (2, 1)) * weights).sum(), x)


def test_maxpool2d_overlapping_windows_accumulate_gradient():
    x = parameter(np.array([0.0, 9.0, 0.0, 0.0]).reshape(1, 1, 4, 1))
    maxpool2d(x, (2, 1), (1, 1)).sum().backward()
    # 9 wins the first two windows; the all-zero third window ties
    np.testing.assert_array_equal(x.grad.ravel(), [0.0, 2.0, 1.0, 0.0])


def test_maxpool2d_kernel_larger_than_input():
    with pytest.raises(DimensionError):
        maxpool2d(Tensor(np.zeros((1, 1, 3, 1))), (4, 1))


# ----------------------------------------------------------------------
# linear, gelu
# ----------------------------------------------------------------------

def test_linear_identity_and_bias(rng):
    x = rng.standard_normal((3, 4))
    out = linear(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
    np.testing.assert_array_equal(out.data, x)

    bias = rng.standard_normal(2)
    out = linear(Tensor(np.zeros((5, 4))), Tensor(rng.standard_normal((2, 4))), Tensor(bias))
    np.testing.assert_array_equal(out.data, np.tile(bias, (5, 1)))


@pytest.mark.parametrize("seed", range(10))
def test_linear_gradients(seed):
    r = np.random.default_rng(seed)
    x, w, b = r.standard_normal((4, 6)), r.standard_normal((3, 6)), r.standard_normal(3)
    weights = r.standard_normal((4, 3))
    check_gradient(lambda xt, wt, bt: (linear(xt, wt, bt) * weights).sum(), x, w, b)


def test_linear_feature_mismatch():
    with pytest.raises(DimensionError):
        linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


def test_gelu_values():
    assert gelu(Tensor(0.0)).item() == 0.0
    assert abs(gelu(Tensor(-10.0)).item()) < 1e-6
    assert gelu(Tensor(10.0)).item() == pytest.approx(10.0, abs=1e-12)
    # x * Phi(x) at x = 1
    assert gelu(Tensor(1.0)).item() == pytest.approx(0.5 * (1 + math.erf(1 / math.sqrt(2))), abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_gelu_gradient(seed):
    x = np.random.default_rng(seed).normal(scale=2.0, size=(5, 4))
    check_gradient(lambda xt: gelu(xt).sum(), x, tolerance=1e-6)


# ----------------------------------------------------------------------
# losses
# ----------------------------------------------------------------------

def test_cross_entropy_uniform_logits():
    loss = cross_entropy(Tensor(np.zeros((3, 2))), [0, 1, 1])
    assert loss.item() == pytest.approx(math.log(2), abs=1e-12)


def test_cross_entropy_saturates():
    logits = np.array([[1000.0, 0.0], [0.0, 1000.0]])
    assert cross_entropy(Tensor(logits), [0, 1]).item() < 1e-9


def test_cross_entropy_matches_softmax_oracle(rng):
    logits = rng.standard_normal((6, 4)) * 3
    labels = rng.integers(0, 4, size=6)
    probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    expected = -np.mean(np.log(probs[np.arange(6), labels]))
    assert cross_entropy(Tensor(logits), labels).item() == pytest.approx(expected, abs=1e-10)


def test_cross_entropy_shift_invariance(rng):
    logits = rng.standard_normal((5, 3))
    labels = rng.integers(0, 3, size=5)
    shift = rng.normal(scale=50.0, size=(5, 1))
    a = cross_entropy(Tensor(logits), labels).item()
    b = cross_entropy(Tensor(logits + shift), labels).item()
    assert abs(a - b) < 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_cross_entropy_gradient(seed):
    r = np.random.default_rng(seed)
    logits = r.standard_normal((5, 3))
    labels = r.integers(0, 3, size=5)
    check_gradient(lambda z: cross_entropy(z, labels), logits)


def test_cross_entropy_rejects_out_of_range_label():
    with pytest.raises(ValidationError):
        cross_entropy(Tensor(np.zeros((2, 2))), [0, 2])


def test_mse_values(rng):
    target = rng.standard_normal((3, 4))
    assert mse(Tensor(target), target).item() == 0.0
    assert mse(Tensor(target + 1.0), target).item() == pytest.approx(1.0, abs=1e-12)

    pred = rng.standard_normal((3, 4))
    total = 0.0
    for p, t in zip(pred.ravel(), target.ravel()):
        total += (p - t) ** 2
    assert mse(Tensor(pred), target).item() == pytest.approx(total / pred.size, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_mse_gradient(seed):
    r = np.random.default_rng(seed)
    pred, target = r.standard_normal((2, 3, 2)), r.standard_normal((2, 3, 2))
    check_gradient(lambda p, t: mse(p, t), pred, target)


def test_mse_shape_mismatch():
    with pytest.raises(DimensionError):
        mse(Tensor(np.zeros(3)), np.zeros(4))


def test_group_norm_gradient(rng):
    x = rng.standard_normal((2, 4, 3, 3))
    gamma, beta = rng.standard_normal(4), rng.standard_normal(4)
    weights = rng.standard_normal((2, 4, 3, 3))
    check_gradient(lambda xt, gt, bt: (group_norm(xt, 2, gt, bt) * weights).sum(), x, gamma, beta)


def test_three_layer_composite_gradient(rng):
    x = rng.standard_normal((4, 5))
    w1, b1 = rng.standard_normal((6, 5)), rng.standard_normal(6)
    w2, b2 = rng.standard_normal((4, 6)), rng.standard_normal(4)
    w3, b3 = rng.standard_normal((3, 4)), rng.standard_normal(3)
    labels = np.array([0, 2, 1, 2])

    def network(xt, w1t, b1t, w2t, b2t, w3t, b3t):
        h = gelu(linear(xt, w1t, b1t))
        h = gelu(linear(h, w2t, b2t))
        return cross_entropy(linear(h, w3t, b3t), labels)

    check_gradient(network, x, w1, b1, w2, b2, w3, b3)


# ----------------------------------------------------------------------
# Tensor plumbing
# ----------------------------------------------------------------------

def test_shared_subexpression_gradient_accumulates():
    x = parameter(np.array([3.0]))
    y = x * x + x
    y.sum().backward()
    assert x.grad[0] == pytest.approx(7.0)


def test_backward_needs_seed_for_non_scalar():
    with pytest.raises(DimensionError):
        (parameter(np.ones(3)) * 2).backward()


def test_non_finite_forward_raises():
    with np.errstate(divide="ignore"):
        with pytest.raises(NonFiniteError):
            parameter(np.array([0.0])).log()


def test_no_grad_skips_graph():
    x = parameter(np.ones(2))
    with no_grad():
        y = x * 3
    assert not y.requires_grad
    assert (x * 3).requires_grad


def test_lazy_linear_binds_once(rng):
    layer = LazyLinear(3, rng)
    assert layer.parameters() == []
    layer(Tensor(np.ones((2, 7))))
    assert layer.in_features == 7
    assert layer.weight.shape == (3, 7)
    with pytest.raises(DimensionError):
        layer(Tensor(np.ones((2, 5))))


def test_lazy_linear_weights_independent_of_bind_time():
    a = LazyLinear(4, np.random.default_rng(3))
    b = LazyLinear(4, np.random.default_rng(3))
    a.bind(6)
    Linear(2, 2, np.random.default_rng(99))
    b(Tensor(np.zeros((1, 6))))
    np.testing.assert_array_equal(a.weight.data, b.weight.data)


class _Head(Module):
    def __init__(self, rng):
        self.layers = [LazyLinear(2, rng), Linear(2, 1, rng)]


def test_state_dict_round_trip_binds_lazy_layers_in_lists(rng):
    source = _Head(rng)
    source.layers[0].bind(3)
    target = _Head(np.random.default_rng(5))
    target.load_state_dict(source.state_dict())
    assert target.layers[0].in_features == 3
    for name, values in source.state_dict().items():
        np.testing.assert_array_equal(target.state_dict()[name], values)


# ----------------------------------------------------------------------
# Adam
# ----------------------------------------------------------------------

def test_adam_zero_gradient_leaves_parameters():
    w = parameter(np.array([0.7, -0.2]))
    w.grad = np.zeros(2)
    state = AdamState(lr=0.1)
    adam_step([w], state)
    np.testing.assert_array_equal(w.data, [0.7, -0.2])
    assert state.step_count == 1


def test_adam_first_step_moves_by_lr():
    w = parameter(np.array([0.0]))
    w.grad = np.array([1.0])
    adam_step([w], AdamState(lr=0.1))
    assert w.data[0] == pytest.approx(-0.1, abs=1e-7)
    np.testing.assert_array_equal(w.grad, [0.0])


def test_adam_matches_closed_form_moments(rng):
    w0 = rng.standard_normal(5)
    grads = [rng.standard_normal(5) for _ in range(3)]
    w = parameter(w0)
    state = AdamState(lr=0.01)
    for g in grads:
        w.grad = g.copy()
        adam_step([w], state)

    m = np.zeros(5)
    v = np.zeros(5)
    expected = w0.copy()
    for t, g in enumerate(grads, 1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        expected -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(w.data, expected, atol=1e-12)
    assert state.step_count == 3


def test_adam_minimizes_quadratic():
    w = parameter(np.array([1.0]))
    optimizer = Adam([w], lr=0.1)
    for _ in range(200):
        (w * w).sum().backward()
        optimizer.step()
    assert abs(w.data[0]) < 0.05


def test_adam_requires_gradients():
    with pytest.raises(OptimizerStateError):
        adam_step([parameter(np.ones(2))], AdamState())


def test_adam_rejects_changed_parameter_set():
    state = AdamState()
    a = parameter(np.ones(2))
    a.grad = np.ones(2)
    adam_step([a], state)
    b = parameter(np.ones(3))
    b.grad = np.ones(3)
    with pytest.raises(OptimizerStateError):
        adam_step([b], state)


# ----------------------------------------------------------------------
# Reference framework cross-check (skipped without torch)
# ----------------------------------------------------------------------

def test_ops_agree_with_torch(rng):
    torch = pytest.importorskip("torch")
    functional = torch.nn.functional

    x = rng.standard_normal((2, 3, 9, 5))
    k = rng.standard_normal((4, 3, 4, 1))
    b = rng.standard_normal(4)
    ours = conv2d(Tensor(x), Tensor(k), Tensor(b), (1, 1), (2, 0)).data
    theirs = functional.conv2d(torch.from_numpy(x), torch.from_numpy(k), torch.from_numpy(b),
                               stride=(1, 1), padding=(2, 0)).numpy()
    np.testing.assert_allclose(ours, theirs, atol=1e-10)

    z = rng.standard_normal((4, 6))
    np.testing.assert_allclose(gelu(Tensor(z)).data, functional.gelu(torch.from_numpy(z)).numpy(), atol=1e-12)

    labels = np.array([0, 5, 2, 1])
    theirs = functional.cross_entropy(torch.from_numpy(z), torch.from_numpy(labels)).item()
    assert cross_entropy(Tensor(z), labels).item() == pytest.approx(theirs, abs=1e-12)

    pooled = functional.max_pool2d(torch.from_numpy(x), (2, 1), (2, 1)).numpy()
    np.testing.assert_allclose(maxpool2d(Tensor(x), (2, 1), (2, 1)).data, pooled, atol=0)
