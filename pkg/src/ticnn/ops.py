"""Core tensor operations with matching backward passes.

Activations are float64 arrays shaped (batch, channels, height, width) or
(batch, features). Each forward op has a ``*_backward`` companion mapping
upstream gradients to input (and parameter) gradients; the pairs are checked
against central finite differences in the test suite.

Convolution is cross-correlation (no kernel flip). Padding mode 'circular'
wraps spatial indices, which makes stride-1 convolution exactly equivariant
to cyclic shifts; 'zero' is the conventional choice for full-scale builds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .validation import DimensionError, as_tensor4d

PAD_MODES = ("zero", "circular")


@dataclass(frozen=True)
class PoolSpec:
    """Spatial pooling window: mode is 'max' or 'average'; stride defaults to kernel."""

    kernel: int
    stride: int | None = None
    mode: str = "max"

    def __post_init__(self):
        if self.mode not in ("max", "average"):
            raise ValueError(f"unknown pooling mode {self.mode!r}")
        if self.kernel < 1:
            raise ValueError(f"pooling kernel must be >= 1, got {self.kernel}")
        if self.stride is None:
            object.__setattr__(self, "stride", self.kernel)
        if self.stride < 1:
            raise ValueError(f"pooling stride must be >= 1, got {self.stride}")


def resolve_pad(pad, kernel: int) -> int:
    """Turn 'same' into the integer pad amount for an odd kernel at stride 1."""
    if pad == "same":
        if kernel % 2 == 0:
            raise ValueError(f"'same' padding needs an odd kernel, got {kernel}")
        return (kernel - 1) // 2
    p = int(pad)
    if p < 0:
        raise ValueError(f"pad must be nonnegative, got {p}")
    return p


def pad_spatial(x: np.ndarray, pad: int, mode: str) -> np.ndarray:
    if mode not in PAD_MODES:
        raise ValueError(f"unknown padding mode {mode!r}")
    if pad == 0:
        return x
    if mode == "zero":
        return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    h, w = x.shape[2], x.shape[3]
    if pad > h or pad > w:
        raise ValueError(f"circular pad {pad} exceeds spatial size {h}x{w}")
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="wrap")


def _fold_axis(g: np.ndarray, pad: int, size: int, axis: int) -> np.ndarray:
    """Fold a circularly padded gradient margin back onto the core along one axis."""
    core = np.take(g, range(pad, pad + size), axis=axis).copy()
    lead = np.take(g, range(0, pad), axis=axis)
    trail = np.take(g, range(pad + size, pad + size + pad), axis=axis)
    idx = [slice(None)] * g.ndim
    idx[axis] = slice(size - pad, size)
    core[tuple(idx)] += lead
    idx[axis] = slice(0, pad)
    core[tuple(idx)] += trail
    return core


def unpad_spatial_grad(g: np.ndarray, pad: int, mode: str, h: int, w: int) -> np.ndarray:
    """Map a gradient w.r.t. the padded tensor back to the unpadded one."""
    if mode not in PAD_MODES:
        raise ValueError(f"unknown padding mode {mode!r}")
    if pad == 0:
        return g
    if mode == "zero":
        return g[:, :, pad : pad + h, pad : pad + w]
    g = _fold_axis(g, pad, h, axis=2)
    return _fold_axis(g, pad, w, axis=3)


def _check_conv_args(x, weights, bias):
    x = as_tensor4d(x, "conv input")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 4:
        raise DimensionError(f"conv weights must be 4-D, got shape {weights.shape}")
    if weights.shape[1] != x.shape[1]:
        raise DimensionError(
            f"conv weights expect {weights.shape[1]} input channels, input has {x.shape[1]}"
        )
    bias = np.asarray(bias, dtype=np.float64)
    if bias.shape != (weights.shape[0],):
        raise DimensionError(
            f"conv bias must have shape ({weights.shape[0]},), got {bias.shape}"
        )
    return x, weights, bias


def conv2d(x, weights, bias, stride: int = 1, pad=0, mode: str = "zero") -> np.ndarray:
    """2-D cross-correlation. weights is (c_out, c_in, kh, kw)."""
    x, weights, bias = _check_conv_args(x, weights, bias)
    kh, kw = weights.shape[2], weights.shape[3]
    p = resolve_pad(pad, kh)
    xp = pad_spatial(x, p, mode)
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise DimensionError(
            f"kernel {kh}x{kw} does not fit padded input {xp.shape[2]}x{xp.shape[3]}"
        )
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    y = np.tensordot(cols, weights, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2)) + bias[None, :, None, None]


def conv2d_backward(grad_out, x, weights, stride: int = 1, pad=0, mode: str = "zero"):
    """Gradients of conv2d: returns (grad_x, grad_weights, grad_bias)."""
    x, weights, _ = _check_conv_args(x, weights, np.zeros(weights.shape[0]))
    g = np.asarray(grad_out, dtype=np.float64)
    kh, kw = weights.shape[2], weights.shape[3]
    p = resolve_pad(pad, kh)
    xp = pad_spatial(x, p, mode)
    oh, ow = g.shape[2], g.shape[3]

    grad_b = g.sum(axis=(0, 2, 3))
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    grad_w = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))

    gxp = np.zeros_like(xp)
    for ky in range(kh):
        for kx in range(kw):
            contrib = np.tensordot(g, weights[:, :, ky, kx], axes=([1], [0]))
            gxp[:, :, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride] += (
                contrib.transpose(0, 3, 1, 2)
            )
    grad_x = unpad_spatial_grad(gxp, p, mode, x.shape[2], x.shape[3])
    return grad_x, grad_w, grad_b


def _pool_windows(x: np.ndarray, spec: PoolSpec) -> np.ndarray:
    h, w = x.shape[2], x.shape[3]
    if spec.kernel > h or spec.kernel > w:
        raise DimensionError(f"pool window {spec.kernel} exceeds input {h}x{w}")
    view = sliding_window_view(x, (spec.kernel, spec.kernel), axis=(2, 3))
    return view[:, :, :: spec.stride, :: spec.stride]


def pool2d(x, spec: PoolSpec) -> np.ndarray:
    """Spatial max or average pooling; ragged right/bottom edges are dropped."""
    x = as_tensor4d(x, "pool input")
    win = _pool_windows(x, spec)
    if spec.mode == "max":
        return win.max(axis=(4, 5))
    return win.mean(axis=(4, 5))


def pool2d_backward(grad_out, x, spec: PoolSpec) -> np.ndarray:
    x = as_tensor4d(x, "pool input")
    g = np.asarray(grad_out, dtype=np.float64)
    n, c = x.shape[0], x.shape[1]
    k, s = spec.kernel, spec.stride
    oh, ow = g.shape[2], g.shape[3]
    grad_x = np.zeros_like(x)
    if spec.mode == "average":
        gshare = g / (k * k)
        for ky in range(k):
            for kx in range(k):
                grad_x[:, :, ky : ky + oh * s : s, kx : kx + ow * s : s] += gshare
        return grad_x
    win = _pool_windows(x, spec).reshape(n, c, oh, ow, k * k)
    arg = win.argmax(axis=4)
    ni, ci, oy, ox = np.indices((n, c, oh, ow))
    iy = oy * s + arg // k
    ix = ox * s + arg % k
    # np.add.at so overlapping windows hitting one pixel accumulate.
    np.add.at(grad_x, (ni, ci, iy, ix), g)
    return grad_x


def global_avg_pool(x) -> np.ndarray:
    """Mean over both spatial axes: (n, c, h, w) -> (n, c, 1, 1)."""
    x = as_tensor4d(x, "pool input")
    return x.mean(axis=(2, 3), keepdims=True)


def global_avg_pool_backward(grad_out, shape) -> np.ndarray:
    n, c, h, w = shape
    g = np.asarray(grad_out, dtype=np.float64).reshape(n, c)
    return np.broadcast_to(g[:, :, None, None] / (h * w), (n, c, h, w)).copy()


def flatten(x) -> np.ndarray:
    """Row-major (c, h, w) unrolling: (n, c, h, w) -> (n, c*h*w)."""
    x = as_tensor4d(x, "flatten input")
    return x.reshape(x.shape[0], -1)


def flatten_backward(grad_out, shape) -> np.ndarray:
    return np.asarray(grad_out, dtype=np.float64).reshape(shape)


def concat(parts) -> np.ndarray:
    """Join (n, f_i) feature blocks along the feature axis, order preserved."""
    parts = list(parts)
    if not parts:
        raise ValueError("concat needs at least one part")
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts], axis=1)


def split_concat_grad(grad_out, widths) -> list[np.ndarray]:
    g = np.asarray(grad_out, dtype=np.float64)
    widths = list(widths)
    if g.shape[1] != sum(widths):
        raise DimensionError(
            f"concat gradient width {g.shape[1]} != sum of parts {sum(widths)}"
        )
    return list(np.split(g, np.cumsum(widths)[:-1], axis=1))


def dense(x, weights, bias) -> np.ndarray:
    """Affine map: (n, d_in) @ weights.T + bias, weights is (d_out, d_in)."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"dense input must be 2-D, got shape {x.shape}")
    if x.shape[1] != weights.shape[1]:
        raise DimensionError(
            f"dense weights expect {weights.shape[1]} features, input has {x.shape[1]}"
        )
    return x @ weights.T + np.asarray(bias, dtype=np.float64)


def dense_backward(grad_out, x, weights):
    g = np.asarray(grad_out, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    return g @ weights, g.T @ x, g.sum(axis=0)


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(grad_out, x) -> np.ndarray:
    return np.asarray(grad_out, dtype=np.float64) * (np.asarray(x) > 0)


def softmax(x) -> np.ndarray:
    """Row-wise softmax of (n, k) logits, shifted for stability."""
    z = np.asarray(x, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def activation(x, kind: str) -> np.ndarray:
    """Apply 'relu' elementwise or 'softmax' over the class axis of (n, k)."""
    if kind == "relu":
        return relu(x)
    if kind == "softmax":
        return softmax(x)
    raise ValueError(f"unknown activation kind {kind!r}")
