"""Dense float64 tensor kernels: the forward/backward primitives layers are built from.

Tensors are C-contiguous numpy float64 arrays. Images and activations use
(height, width, channels) layout; convolution weights use
(kernel_h, kernel_w, in_channels, out_channels); dense weights use
(in_features, out_features). All convolutions and poolings are "valid":
window placements lie fully inside the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, DimensionError, InputError, NumericError

Tensor = np.ndarray


@dataclass(frozen=True)
class ConvSpec:
    """Shape parameters of a valid 2-D convolution."""

    kernel_h: int
    kernel_w: int
    stride: int
    in_channels: int
    out_channels: int

    @property
    def param_count(self) -> int:
        return (self.kernel_h * self.kernel_w * self.in_channels * self.out_channels
                + self.out_channels)

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        if h < self.kernel_h or w < self.kernel_w:
            raise DimensionError(
                f"conv input {h}x{w} smaller than kernel "
                f"{self.kernel_h}x{self.kernel_w}")
        return ((h - self.kernel_h) // self.stride + 1,
                (w - self.kernel_w) // self.stride + 1)


@dataclass(frozen=True)
class PoolSpec:
    """Square valid max-pooling window and stride."""

    window: int
    stride: int

    def output_extent(self, n: int) -> int:
        if n < self.window:
            raise DimensionError(f"pool window {self.window} larger than input extent {n}")
        return (n - self.window) // self.stride + 1


@dataclass(frozen=True)
class PoolArgmax:
    """Winning input positions of a maxpool forward, consumed by the backward pass.

    indices holds, per output element, the flat row-major index into the
    (H, W, C) input of the window maximum (ties resolved to the lowest index).
    """

    input_shape: tuple[int, int, int]
    indices: np.ndarray


def _check_conv_shapes(inp: Tensor, weights: Tensor, spec: ConvSpec) -> None:
    if inp.ndim != 3:
        raise DimensionError(f"conv input must be rank 3 (H, W, C), got shape {inp.shape}")
    expected_w = (spec.kernel_h, spec.kernel_w, spec.in_channels, spec.out_channels)
    if weights.shape != expected_w:
        raise DimensionError(f"conv weights shape {weights.shape} != spec {expected_w}")
    if inp.shape[2] != spec.in_channels:
        raise DimensionError(
            f"conv input channels {inp.shape[2]} (input shape {inp.shape}) do not match "
            f"weight channels {spec.in_channels} (weight shape {weights.shape})")


def _im2col(inp: Tensor, kh: int, kw: int, stride: int) -> Tensor:
    # (H', W', kh, kw, C) windows flattened to rows of kh*kw*C, matching the
    # row-major (kh, kw, in_channels) layout of reshaped weights.
    windows = sliding_window_view(inp, (kh, kw), axis=(0, 1))[::stride, ::stride]
    windows = windows.transpose(0, 1, 3, 4, 2)
    oh, ow = windows.shape[:2]
    return np.ascontiguousarray(windows).reshape(oh * ow, kh * kw * inp.shape[2])


def conv2d_forward(inp: Tensor, weights: Tensor, bias: Tensor, spec: ConvSpec) -> Tensor:
    """Valid 2-D convolution: windowed dot product plus per-channel bias."""
    _check_conv_shapes(inp, weights, spec)
    if bias.shape != (spec.out_channels,):
        raise DimensionError(f"conv bias shape {bias.shape} != ({spec.out_channels},)")
    oh, ow = spec.output_hw(inp.shape[0], inp.shape[1])
    cols = _im2col(inp, spec.kernel_h, spec.kernel_w, spec.stride)
    out = cols @ weights.reshape(-1, spec.out_channels) + bias
    return out.reshape(oh, ow, spec.out_channels)


def conv2d_backward(inp: Tensor, weights: Tensor, grad_out: Tensor,
                    spec: ConvSpec) -> tuple[Tensor, Tensor, Tensor]:
    """Chain-rule gradients of conv2d_forward w.r.t. input, weights, and bias."""
    _check_conv_shapes(inp, weights, spec)
    oh, ow = spec.output_hw(inp.shape[0], inp.shape[1])
    if grad_out.shape != (oh, ow, spec.out_channels):
        raise DimensionError(
            f"conv grad_out shape {grad_out.shape} != forward output ({oh}, {ow}, "
            f"{spec.out_channels})")

    cols = _im2col(inp, spec.kernel_h, spec.kernel_w, spec.stride)
    g2d = grad_out.reshape(oh * ow, spec.out_channels)

    grad_bias = g2d.sum(axis=0)
    grad_weights = (cols.T @ g2d).reshape(weights.shape)

    gcols = (g2d @ weights.reshape(-1, spec.out_channels).T)
    gcols = gcols.reshape(oh, ow, spec.kernel_h, spec.kernel_w, spec.in_channels)
    grad_input = np.zeros_like(inp)
    s = spec.stride
    for di in range(spec.kernel_h):
        for dj in range(spec.kernel_w):
            grad_input[di:di + s * oh:s, dj:dj + s * ow:s, :] += gcols[:, :, di, dj, :]
    return grad_input, grad_weights, grad_bias


def maxpool_forward(inp: Tensor, spec: PoolSpec) -> tuple[Tensor, PoolArgmax]:
    """Valid max pooling; also returns the per-window argmax map for backward."""
    if inp.ndim != 3:
        raise DimensionError(f"pool input must be rank 3 (H, W, C), got shape {inp.shape}")
    h, w, c = inp.shape
    oh = spec.output_extent(h)
    ow = spec.output_extent(w)

    windows = sliding_window_view(inp, (spec.window, spec.window), axis=(0, 1))
    windows = windows[::spec.stride, ::spec.stride]          # (oh, ow, c, win, win)
    flat_windows = windows.reshape(oh, ow, c, spec.window * spec.window)
    # argmax returns the first maximum in (dy, dx) row-major order, which is
    # also the lowest flat index into the input for that window/channel.
    local = flat_windows.argmax(axis=3)
    out = np.take_along_axis(flat_windows, local[..., None], axis=3)[..., 0]

    dy, dx = local // spec.window, local % spec.window
    ys = np.arange(oh)[:, None, None] * spec.stride + dy
    xs = np.arange(ow)[None, :, None] * spec.stride + dx
    cs = np.arange(c)[None, None, :]
    indices = (ys * w + xs) * c + cs
    return out, PoolArgmax(input_shape=(h, w, c), indices=indices)


def maxpool_backward(argmax: PoolArgmax, grad_out: Tensor) -> Tensor:
    """Route gradient to each window's argmax position; zeros elsewhere."""
    if grad_out.shape != argmax.indices.shape:
        raise DimensionError(
            f"pool grad_out shape {grad_out.shape} does not match argmax map "
            f"shape {argmax.indices.shape}")
    grad_flat = np.zeros(int(np.prod(argmax.input_shape)))
    np.add.at(grad_flat, argmax.indices.ravel(), grad_out.ravel())
    return grad_flat.reshape(argmax.input_shape)


def zero_pad(inp: Tensor, pad: int) -> Tensor:
    """Pad the two spatial axes with `pad` zeros on every side."""
    if inp.ndim != 3:
        raise DimensionError(f"pad input must be rank 3 (H, W, C), got shape {inp.shape}")
    if pad == 0:
        return inp.copy()
    return np.pad(inp, ((pad, pad), (pad, pad), (0, 0)))


def dense_forward(inp: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map: out_j = sum_i inp_i * W_ij + b_j."""
    if inp.ndim != 1 or weights.ndim != 2 or weights.shape[0] != inp.shape[0]:
        raise DimensionError(
            f"dense input shape {inp.shape} incompatible with weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise DimensionError(f"dense bias shape {bias.shape} != ({weights.shape[1]},)")
    return inp @ weights + bias


def dense_backward(inp: Tensor, weights: Tensor,
                   grad_out: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients of dense_forward: dW_ij = inp_i * g_j, db = g, dx = W g."""
    if grad_out.shape != (weights.shape[1],):
        raise DimensionError(
            f"dense grad_out shape {grad_out.shape} != ({weights.shape[1]},)")
    if inp.shape != (weights.shape[0],):
        raise DimensionError(
            f"dense input shape {inp.shape} incompatible with weights {weights.shape}")
    return weights @ grad_out, np.outer(inp, grad_out), grad_out.copy()


def relu(inp: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    return np.maximum(inp, 0.0)


def relu_backward(inp: Tensor, grad_out: Tensor) -> Tensor:
    """Pass gradient where input > 0; subgradient 0 at exactly 0."""
    if grad_out.shape != inp.shape:
        raise DimensionError(
            f"relu grad_out shape {grad_out.shape} != input shape {inp.shape}")
    return grad_out * (inp > 0.0)


def flatten(inp: Tensor) -> Tensor:
    """Row-major reshape to rank 1."""
    return inp.reshape(-1).copy()


def dropout(inp: Tensor, rate: float, rng: np.random.Generator | None,
            training: bool) -> tuple[Tensor, np.ndarray]:
    """Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate).

    In inference mode the input passes through unchanged with an all-ones mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return inp, np.ones(inp.shape, dtype=bool)
    if rng is None:
        raise ConfigurationError("dropout in training mode requires an rng")
    mask = rng.random(inp.shape) >= rate
    return inp * mask / (1.0 - rate), mask


def dropout_backward(mask: np.ndarray, rate: float, grad_out: Tensor) -> Tensor:
    if grad_out.shape != mask.shape:
        raise DimensionError(
            f"dropout grad_out shape {grad_out.shape} != mask shape {mask.shape}")
    if rate == 0.0:
        return grad_out.copy()
    return grad_out * mask / (1.0 - rate)


def softmax(logits: Tensor) -> Tensor:
    """Stable softmax over a rank-1 logit vector (max-subtraction)."""
    if logits.ndim != 1 or logits.shape[0] < 2:
        raise DimensionError(f"softmax expects a vector of >= 2 logits, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NumericError(f"non-finite logits: {logits}")
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def _check_one_hot(one_hot: Tensor, k: int) -> None:
    if one_hot.shape != (k,):
        raise DimensionError(f"one-hot shape {one_hot.shape} != ({k},)")
    if not (np.all((one_hot == 0.0) | (one_hot == 1.0)) and one_hot.sum() == 1.0):
        raise InputError(f"not a valid one-hot vector: {one_hot}")


def cross_entropy(probs: Tensor, one_hot: Tensor) -> float:
    """Negative log-probability of the true class."""
    _check_one_hot(one_hot, probs.shape[0])
    p_true = float(probs[np.argmax(one_hot)])
    # p_true can underflow to exactly 0; the loss is then legitimately +inf
    with np.errstate(divide="ignore"):
        return float(-np.log(p_true))


def softmax_cross_entropy_backward(probs: Tensor, one_hot: Tensor) -> Tensor:
    """Fused gradient of cross_entropy(softmax(logits)) w.r.t. the logits."""
    _check_one_hot(one_hot, probs.shape[0])
    return probs - one_hot


def one_hot(index: int, k: int) -> Tensor:
    """Unit vector with a 1 at `index`."""
    if not 0 <= index < k:
        raise InputError(f"class index {index} out of range for {k} classes")
    v = np.zeros(k)
    v[index] = 1.0
    return v
