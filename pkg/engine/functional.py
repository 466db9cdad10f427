"""
Differentiable layer operations: convolution, pooling, dense, activations, losses
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from errors import DimensionError, ValidationError
from .tensor import ArrayLike, Tensor, as_tensor

Pair = Tuple[int, int]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _pair(value) -> Pair:
    if isinstance(value, int):
        return (value, value)
    return (int(value[0]), int(value[1]))


def output_extent(size: int, kernel: int, stride: int, pad: int = 0) -> int:
    """
    Spatial extent after a sliding window: floor((size + 2*pad - kernel) / stride) + 1.
    """
    return (size + 2 * pad - kernel) // stride + 1


def _windows(x: np.ndarray, kernel: Pair, stride: Pair) -> np.ndarray:
    # (N, C, H', W', kh, kw) view over the last two axes
    view = sliding_window_view(x, kernel, axis=(2, 3))
    return view[:, :, :: stride[0], :: stride[1]]


def conv2d(
    input: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: Sequence[int] = (1, 1),
    padding: Sequence[int] = (0, 0),
) -> Tensor:
    """
    2-D cross-correlation over NCHW input, im2col layout.

    Args:
        input: Tensor of shape (N, C, H, W)
        kernel: Tensor of shape (K, C, kh, kw)
        bias: Optional tensor of shape (K,)
        stride: (stride_h, stride_w)
        padding: Zero padding (pad_h, pad_w) on both sides

    Returns:
        Tensor of shape (N, K, H', W')

    Raises:
        DimensionError: If ranks, channel counts or kernel extents do not fit
    """
    stride, padding = _pair(stride), _pair(padding)
    if input.ndim != 4 or kernel.ndim != 4:
        raise DimensionError("conv2d expects 4-D input and kernel", input.shape, kernel.shape)
    n, c, h, w = input.shape
    k, kc, kh, kw = kernel.shape
    if kc != c:
        raise DimensionError("conv2d channel mismatch", input.shape, kernel.shape)
    if kh > h + 2 * padding[0] or kw > w + 2 * padding[1]:
        raise DimensionError("conv2d kernel larger than padded input", input.shape, kernel.shape)
    if bias is not None and bias.shape != (k,):
        raise DimensionError("conv2d bias must have one entry per filter", bias.shape, kernel.shape)

    x = np.pad(input.data, ((0, 0), (0, 0), (padding[0], padding[0]), (padding[1], padding[1])))
    win = _windows(x, (kh, kw), stride)
    oh, ow = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    weights = kernel.data.reshape(k, -1)

    out = cols @ weights.T
    if bias is not None:
        out = out + bias.data
    out = out.reshape(n, oh, ow, k).transpose(0, 3, 1, 2)

    parents = (input, kernel) if bias is None else (input, kernel, bias)

    def backward(g: np.ndarray) -> None:
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, k)
        if kernel.requires_grad:
            kernel.accumulate((g2.T @ cols).reshape(kernel.shape))
        if bias is not None and bias.requires_grad:
            bias.accumulate(g2.sum(axis=0))
        if input.requires_grad:
            dcols = (g2 @ weights).reshape(n, oh, ow, c, kh, kw)
            dx = np.zeros_like(x)
            h_span = stride[0] * (oh - 1) + 1
            w_span = stride[1] * (ow - 1) + 1
            for i in range(kh):
                for j in range(kw):
                    dx[:, :, i:i + h_span:stride[0], j:j + w_span:stride[1]] += (
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            input.accumulate(dx[:, :, padding[0]:padding[0] + h, padding[1]:padding[1] + w])

    return Tensor.make(np.ascontiguousarray(out), parents, "conv2d", backward)


def maxpool2d(input: Tensor, kernel: Sequence[int], stride: Optional[Sequence[int]] = None) -> Tensor:
    """
    Max over sliding windows; ties send the gradient to the first element
    in row-major window order.
    """
    kernel = _pair(kernel)
    stride = kernel if stride is None else _pair(stride)
    if input.ndim != 4:
        raise DimensionError("maxpool2d expects 4-D input", input.shape)
    n, c, h, w = input.shape
    if kernel[0] > h or kernel[1] > w:
        raise DimensionError(f"maxpool2d kernel {kernel} larger than input", input.shape)

    win = _windows(input.data, kernel, stride)
    oh, ow = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, oh, ow, kernel[0] * kernel[1])
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray) -> None:
        rows = np.arange(oh)[None, None, :, None] * stride[0] + arg // kernel[1]
        cols = np.arange(ow)[None, None, None, :] * stride[1] + arg % kernel[1]
        ni = np.broadcast_to(np.arange(n)[:, None, None, None], arg.shape)
        ci = np.broadcast_to(np.arange(c)[None, :, None, None], arg.shape)
        dx = np.zeros_like(input.data)
        np.add.at(dx, (ni, ci, rows, cols), g)
        input.accumulate(dx)

    return Tensor.make(out, (input,), "maxpool2d", backward)


def linear(input: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Dense layer: input @ weight.T + bias.
    """
    if input.ndim != 2 or weight.ndim != 2 or input.shape[1] != weight.shape[1]:
        raise DimensionError("linear feature count mismatch", input.shape, weight.shape)
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError("linear bias must match out_features", bias.shape, weight.shape)

    out = input.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
    parents = (input, weight) if bias is None else (input, weight, bias)

    def backward(g: np.ndarray) -> None:
        input.accumulate(g @ weight.data)
        weight.accumulate(g.T @ input.data)
        if bias is not None:
            bias.accumulate(g.sum(axis=0))

    return Tensor.make(out, parents, "linear", backward)


def gelu(input: Tensor) -> Tensor:
    """
    Exact GELU, x * Phi(x) with the erf form of the normal CDF.
    """
    x = input.data
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))

    def backward(g: np.ndarray) -> None:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        input.accumulate(g * (cdf + x * pdf))

    return Tensor.make(x * cdf, (input,), "gelu", backward)


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """
    Mean negative log-softmax of the labelled class, log-sum-exp stabilized.

    Raises:
        DimensionError: If logits are not (N, K) or labels are not length N
        ValidationError: If a label is outside [0, K)
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError("cross_entropy expects (N, K) logits and N labels", logits.shape, labels.shape)
    n, k = logits.shape
    if n == 0:
        raise ValidationError("cross_entropy of an empty batch")
    if labels.min() < 0 or labels.max() >= k:
        raise ValidationError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")

    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()

    def backward(g: np.ndarray) -> None:
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        logits.accumulate(grad * (g / n))

    return Tensor.make(np.asarray(loss), (logits,), "cross_entropy", backward)


def mse(pred: Tensor, target: ArrayLike) -> Tensor:
    """
    Mean squared elementwise difference.
    """
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError("mse operands differ in shape", pred.shape, target.shape)
    diff = pred.data - target.data
    scale = 2.0 / diff.size

    def backward(g: np.ndarray) -> None:
        pred.accumulate(g * scale * diff)
        target.accumulate(-g * scale * diff)

    return Tensor.make(np.asarray(np.mean(diff * diff)), (pred, target), "mse", backward)


def group_norm(
    input: Tensor,
    groups: int,
    gamma: Tensor,
    beta: Tensor,
    eps: float = 1e-5,
) -> Tensor:
    """
    Normalize each (sample, channel group) to zero mean and unit variance,
    then apply the per-channel affine transform.
    """
    if input.ndim != 4:
        raise DimensionError("group_norm expects 4-D input", input.shape)
    n, c, h, w = input.shape
    if c % groups:
        raise DimensionError(f"{c} channels do not split into {groups} groups", input.shape)
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError("group_norm affine parameters must have one entry per channel", gamma.shape, input.shape)

    xg = input.data.reshape(n, groups, -1)
    mean = xg.mean(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(xg.var(axis=2, keepdims=True) + eps)
    xhat = ((xg - mean) * inv_std).reshape(n, c, h, w)
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g: np.ndarray) -> None:
        gamma.accumulate((g * xhat).sum(axis=(0, 2, 3)))
        beta.accumulate(g.sum(axis=(0, 2, 3)))
        if input.requires_grad:
            m = xg.shape[2]
            dxhat = (g * gamma.data[None, :, None, None]).reshape(n, groups, m)
            xh = xhat.reshape(n, groups, m)
            dx = inv_std / m * (
                m * dxhat
                - dxhat.sum(axis=2, keepdims=True)
                - xh * (dxhat * xh).sum(axis=2, keepdims=True)
            )
            input.accumulate(dx.reshape(n, c, h, w))

    return Tensor.make(out, (input, gamma, beta), "group_norm", backward)
