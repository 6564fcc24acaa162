"""Dense-tensor layer kernels with hand-derived forward and backward passes.

All operations work on 4-D arrays laid out as (batch, channels, height,
width).  Convolutions are stride-1 with zero same-padding, so spatial
dimensions are preserved through every layer.  The convolution is computed
by materializing patch columns and running one batched GEMM per call; a
``Workspace`` can be supplied to reuse the scratch buffers across calls,
which matters in training loops.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

TRAIN = "train"
INFER = "infer"

# When set, every op asserts its output is finite. Costs a pass over the
# data, so it is off unless the environment asks for it.
DEBUG_CHECKS = bool(os.environ.get("FRINGE_DENOISE_DEBUG"))


class ShapeError(ValueError):
    """Operand shapes are inconsistent with the operation's contract."""


@dataclass
class ConvParams:
    """Filter bank (out_channels, in_channels, k, k) plus per-filter bias."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weights.ndim != 4:
            raise ShapeError(f"conv weights must be 4-D, got {self.weights.shape}")
        m, _, kh, kw = self.weights.shape
        if kh != kw or kh % 2 == 0:
            raise ShapeError(f"kernel must be square with odd size, got {kh}x{kw}")
        if self.bias.shape != (m,):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match {m} output channels"
            )

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> int:
        return self.weights.shape[2]


@dataclass
class BatchNormParams:
    """Per-channel scale/shift with running statistics for inference."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = 1e-5
    momentum: float = 0.9

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if np.any(self.running_var < 0):
            raise ValueError("running_var must be nonnegative")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


class Workspace:
    """Reusable scratch buffers, keyed by (tag, shape, dtype).

    Results never depend on whether a workspace is supplied; it only avoids
    reallocating the im2col buffers on every convolution call.
    """

    def __init__(self) -> None:
        self._bufs: dict = {}

    def get(self, tag: str, shape: tuple, dtype) -> np.ndarray:
        key = (tag, shape, np.dtype(dtype))
        buf = self._bufs.get(key)
        if buf is None:
            buf = np.empty(shape, dtype=dtype)
            self._bufs[key] = buf
        return buf


def _finite_check(arr: np.ndarray, op: str) -> None:
    if DEBUG_CHECKS and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{op} produced non-finite values")


def _im2col(x: np.ndarray, k: int, ws: Workspace | None) -> np.ndarray:
    """Column buffer of shape (N, C*k*k, H*W) for a same-padded k x k window."""
    n, c, h, w = x.shape
    p = k // 2
    ws = ws or Workspace()
    xp = ws.get("pad", (n, c, h + 2 * p, w + 2 * p), x.dtype)
    xp[:] = 0
    xp[:, :, p : p + h, p : p + w] = x
    cols = ws.get("cols", (n, c, k, k, h, w), x.dtype)
    for u in range(k):
        for v in range(k):
            cols[:, :, u, v] = xp[:, :, u : u + h, v : v + w]
    return cols.reshape(n, c * k * k, h * w)


def conv2d_forward(
    x: np.ndarray, params: ConvParams, workspace: Workspace | None = None
) -> np.ndarray:
    """Stride-1 convolution with zero same-padding.

    out[b,m,y,x] = bias[m] + sum_{c,u,v} w[m,c,u,v] * x_padded[b,c,y+u,x+v]
    """
    if x.ndim != 4:
        raise ShapeError(f"input must be 4-D (N,C,H,W), got {x.shape}")
    if x.shape[1] != params.in_channels:
        raise ShapeError(
            f"input has {x.shape[1]} channels but filters expect "
            f"{params.in_channels} (input {x.shape}, weights {params.weights.shape})"
        )
    n, _, h, w = x.shape
    m = params.out_channels
    k = params.kernel
    cols = _im2col(x, k, workspace)
    w2 = params.weights.reshape(m, -1)
    out = np.matmul(w2, cols)  # (N, M, H*W)
    out = out.reshape(n, m, h, w)
    out += params.bias.astype(x.dtype)[None, :, None, None]
    _finite_check(out, "conv2d_forward")
    return out


def conv2d_backward(
    x: np.ndarray,
    params: ConvParams,
    grad_out: np.ndarray,
    workspace: Workspace | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of ``conv2d_forward``.

    The input gradient is the adjoint map: a same-padded convolution of
    ``grad_out`` with the filter bank rotated 180 degrees and transposed in
    its channel axes.
    """
    n, c, h, w = x.shape
    m = params.out_channels
    k = params.kernel
    if grad_out.shape != (n, m, h, w):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match output ({n},{m},{h},{w})"
        )
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    cols = _im2col(x, k, workspace)
    g2 = grad_out.reshape(n, m, h * w)
    grad_w = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(m, c, k, k)
    rot = np.ascontiguousarray(params.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    adjoint = ConvParams(weights=rot, bias=np.zeros(c, dtype=x.dtype))
    grad_x = conv2d_forward(grad_out, adjoint, workspace)
    return grad_x, grad_w, grad_bias


def leaky_relu_forward(x: np.ndarray, alpha: float) -> np.ndarray:
    """h = max(z, 0) + alpha * min(z, 0), elementwise."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    out = np.where(x > 0, x, np.asarray(alpha, dtype=x.dtype) * x)
    _finite_check(out, "leaky_relu_forward")
    return out


def leaky_relu_backward(x: np.ndarray, alpha: float, grad_out: np.ndarray) -> np.ndarray:
    # Slope at exactly 0 is taken as 1; must stay consistent with forward,
    # where 0 maps to 0 under either branch.
    if x.shape != grad_out.shape:
        raise ShapeError(f"shape mismatch: input {x.shape} vs grad {grad_out.shape}")
    slope = np.where(x >= 0, x.dtype.type(1.0), x.dtype.type(alpha))
    return grad_out * slope


def batchnorm_forward(
    x: np.ndarray, params: BatchNormParams, mode: str
) -> tuple[np.ndarray, tuple | None]:
    """Per-channel batch normalization over the (batch, H, W) axes.

    TRAIN mode normalizes with the batch statistics (population variance),
    updates the running statistics in-place (running variance stores the
    unbiased estimate), and returns a cache for the backward pass.  INFER
    mode normalizes with the running statistics and returns no cache.
    """
    if x.ndim != 4 or x.shape[1] != params.channels:
        raise ShapeError(
            f"input {x.shape} does not match {params.channels} batchnorm channels"
        )
    gamma = params.gamma.astype(x.dtype)
    beta = params.beta.astype(x.dtype)
    if mode == INFER:
        inv = 1.0 / np.sqrt(params.running_var.astype(x.dtype) + x.dtype.type(params.epsilon))
        out = (x - params.running_mean.astype(x.dtype)[None, :, None, None]) * (
            gamma * inv
        )[None, :, None, None] + beta[None, :, None, None]
        _finite_check(out, "batchnorm_forward")
        return out, None
    if mode != TRAIN:
        raise ValueError(f"mode must be {TRAIN!r} or {INFER!r}, got {mode!r}")
    n, _, h, w = x.shape
    count = n * h * w
    if count < 2:
        raise ValueError(
            f"TRAIN-mode batchnorm needs at least 2 values per channel, got {count}"
        )
    mean = x.mean(axis=(0, 2, 3))
    var = x.var(axis=(0, 2, 3))
    inv_std = 1.0 / np.sqrt(var + x.dtype.type(params.epsilon))
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * x_hat + beta[None, :, None, None]
    unbiased = var * (count / (count - 1))
    params.running_mean[:] = params.momentum * params.running_mean + (
        1.0 - params.momentum
    ) * mean.astype(params.running_mean.dtype)
    params.running_var[:] = params.momentum * params.running_var + (
        1.0 - params.momentum
    ) * unbiased.astype(params.running_var.dtype)
    _finite_check(out, "batchnorm_forward")
    cache = (x_hat, inv_std, gamma, count)
    return out, cache


def batchnorm_backward(
    cache: tuple, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of the TRAIN-mode map, including the mean/var dependence."""
    if cache is None:
        raise ValueError("batchnorm_backward requires a TRAIN-mode cache")
    x_hat, inv_std, gamma, count = cache
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    grad_gamma = (grad_out * x_hat).sum(axis=(0, 2, 3))
    g = grad_out * gamma[None, :, None, None]
    sum_g = g.sum(axis=(0, 2, 3))
    sum_gx = (g * x_hat).sum(axis=(0, 2, 3))
    grad_x = (inv_std[None, :, None, None] / count) * (
        count * g - sum_g[None, :, None, None] - x_hat * sum_gx[None, :, None, None]
    )
    return grad_x, grad_gamma, grad_beta


def he_init(shape: tuple, fan_in: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """i.i.d. N(0, 2/fan_in) weights."""
    if fan_in <= 0:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
