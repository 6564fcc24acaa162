"""Multi-stage residual denoising network built from the layer kernels.

Each stage is a fixed ladder of convolutional layers: the first layer maps
the single-channel input to the feature width and applies a leaky
rectifier, the middle layers add batch normalization between convolution
and activation, and the last layer collapses back to one channel with no
activation.  Stage 1 consumes the noisy image; each later stage consumes
the previous stage's noise estimate, and the final stage's output is the
network's noise estimate.  Denoising subtracts that estimate from the
input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    INFER,
    TRAIN,
    BatchNormParams,
    ConvParams,
    ShapeError,
    Workspace,
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    he_init,
    leaky_relu_backward,
    leaky_relu_forward,
)

NOISE_CHAIN = "noise_chain"
IMAGE_CHAIN = "image_chain"


@dataclass(frozen=True)
class NetworkConfig:
    stages: int = 3
    layers_per_stage: int = 8
    filters: int = 64
    kernel: int = 5
    alpha_first: float = 0.05
    alpha_rest: float = 0.5
    stage_wiring: str = NOISE_CHAIN

    def __post_init__(self) -> None:
        if self.stages < 1:
            raise ValueError(f"stages must be >= 1, got {self.stages}")
        if self.layers_per_stage < 3:
            raise ValueError(
                f"layers_per_stage must be >= 3 so that first, middle and last "
                f"layer kinds all exist, got {self.layers_per_stage}"
            )
        if self.filters < 1:
            raise ValueError(f"filters must be >= 1, got {self.filters}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and positive, got {self.kernel}")
        for name in ("alpha_first", "alpha_rest"):
            a = getattr(self, name)
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {a}")
        if self.stage_wiring not in (NOISE_CHAIN, IMAGE_CHAIN):
            raise ValueError(f"unknown stage_wiring {self.stage_wiring!r}")

    @property
    def receptive_radius(self) -> int:
        """Pixels an input perturbation can reach in the output."""
        return self.stages * self.layers_per_stage * (self.kernel // 2)


@dataclass
class LayerParams:
    conv: ConvParams
    bn: BatchNormParams | None
    alpha: float | None  # activation slope; None on the reconstruction layer


@dataclass
class NetworkParams:
    layers: list[list[LayerParams]] = field(default_factory=list)  # [stage][layer]

    def stage_count(self) -> int:
        return len(self.layers)


def _init_bn(channels: int, dtype) -> BatchNormParams:
    return BatchNormParams(
        gamma=np.ones(channels, dtype=dtype),
        beta=np.zeros(channels, dtype=dtype),
        running_mean=np.zeros(channels, dtype=dtype),
        running_var=np.ones(channels, dtype=dtype),
    )


def build_network(
    config: NetworkConfig, rng: np.random.Generator, dtype=np.float32
) -> NetworkParams:
    """Allocate and initialize all learnable parameters.

    Filter weights are N(0, 2/fan_in), biases start at zero, batch-norm
    scales at one and shifts at zero.  Deterministic for a fixed generator
    state.
    """
    k = config.kernel
    f = config.filters
    params = NetworkParams()
    for _ in range(config.stages):
        stage: list[LayerParams] = []
        for d in range(config.layers_per_stage):
            if d == 0:
                c_in, c_out, alpha, with_bn = 1, f, config.alpha_first, False
            elif d == config.layers_per_stage - 1:
                c_in, c_out, alpha, with_bn = f, 1, None, False
            else:
                c_in, c_out, alpha, with_bn = f, f, config.alpha_rest, True
            conv = ConvParams(
                weights=he_init((c_out, c_in, k, k), c_in * k * k, rng, dtype),
                bias=np.zeros(c_out, dtype=dtype),
            )
            bn = _init_bn(c_out, dtype) if with_bn else None
            stage.append(LayerParams(conv=conv, bn=bn, alpha=alpha))
        params.layers.append(stage)
    return params


def iter_tensors(params: NetworkParams, trainable_only: bool = False):
    """Yield (path, array) pairs in a fixed structural order."""
    for s, stage in enumerate(params.layers):
        for d, layer in enumerate(stage):
            prefix = f"s{s:02d}.l{d:02d}"
            yield f"{prefix}.conv.weights", layer.conv.weights
            yield f"{prefix}.conv.bias", layer.conv.bias
            if layer.bn is not None:
                yield f"{prefix}.bn.gamma", layer.bn.gamma
                yield f"{prefix}.bn.beta", layer.bn.beta
                if not trainable_only:
                    yield f"{prefix}.bn.running_mean", layer.bn.running_mean
                    yield f"{prefix}.bn.running_var", layer.bn.running_var


def parameter_count(params: NetworkParams) -> int:
    return sum(a.size for _, a in iter_tensors(params, trainable_only=True))


def network_forward(
    z: np.ndarray,
    params: NetworkParams,
    config: NetworkConfig,
    mode: str = INFER,
    workspace: Workspace | None = None,
) -> tuple[np.ndarray, list | None]:
    """Run all stages on a single-channel batch; returns the noise estimate.

    In TRAIN mode the per-layer inputs and batch-norm caches needed by
    ``network_backward`` are collected; INFER mode returns ``None`` caches.
    """
    if z.ndim != 4 or z.shape[1] != 1:
        raise ShapeError(f"network input must be (N,1,H,W), got {z.shape}")
    ws = workspace or Workspace()
    caches: list | None = [] if mode == TRAIN else None
    x = z
    for stage in params.layers:
        stage_in = x
        for layer in stage:
            conv_in = x
            pre = conv2d_forward(x, layer.conv, ws)
            bn_cache = None
            if layer.bn is not None:
                pre, bn_cache = batchnorm_forward(pre, layer.bn, mode)
            act_in = pre
            if layer.alpha is not None:
                x = leaky_relu_forward(pre, layer.alpha)
            else:
                x = pre
            if caches is not None:
                caches.append((conv_in, bn_cache, act_in))
        if config.stage_wiring == IMAGE_CHAIN:
            # Alternative wiring kept for experiments: each stage refines a
            # progressively denoised image.  The chain still returns a total
            # noise estimate so that input - estimate is the clean image.
            x = stage_in - x
    if config.stage_wiring == IMAGE_CHAIN:
        x = z - x
    return x, caches


def network_backward(
    caches: list,
    grad_v: np.ndarray,
    params: NetworkParams,
    config: NetworkConfig,
    workspace: Workspace | None = None,
) -> dict[str, np.ndarray]:
    """Chain gradients of the noise estimate back through every stage.

    Returns a dict keyed like ``iter_tensors(..., trainable_only=True)``.
    Only the noise-chain wiring is differentiated; the image-chain variant
    is inference-only.
    """
    if caches is None:
        raise ValueError("network_backward requires caches from a TRAIN-mode forward")
    if config.stage_wiring != NOISE_CHAIN:
        raise NotImplementedError("backward pass supports noise_chain wiring only")
    ws = workspace or Workspace()
    grads: dict[str, np.ndarray] = {}
    flat_layers = [
        (s, d, layer)
        for s, stage in enumerate(params.layers)
        for d, layer in enumerate(stage)
    ]
    g = grad_v
    for (s, d, layer), cache in zip(reversed(flat_layers), reversed(caches)):
        conv_in, bn_cache, act_in = cache
        if layer.alpha is not None:
            g = leaky_relu_backward(act_in, layer.alpha, g)
        if layer.bn is not None:
            g, g_gamma, g_beta = batchnorm_backward(bn_cache, g)
            grads[f"s{s:02d}.l{d:02d}.bn.gamma"] = g_gamma
            grads[f"s{s:02d}.l{d:02d}.bn.beta"] = g_beta
        g, g_w, g_b = conv2d_backward(conv_in, layer.conv, g, ws)
        grads[f"s{s:02d}.l{d:02d}.conv.weights"] = g_w
        grads[f"s{s:02d}.l{d:02d}.conv.bias"] = g_b
    return grads


def denoise(
    image: np.ndarray,
    params: NetworkParams,
    config: NetworkConfig,
    workspace: Workspace | None = None,
) -> np.ndarray:
    """Subtract the estimated noise from a single 2-D image (inference mode).

    The input is expected in the intensity range the model was trained on;
    no clamping is applied here so the float result is exact.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ShapeError(f"denoise expects a 2-D image, got shape {img.shape}")
    if min(img.shape) < config.kernel:
        raise ShapeError(
            f"image {img.shape} is smaller than the {config.kernel}x{config.kernel} kernel"
        )
    z = img[None, None, :, :]
    v, _ = network_forward(z, params, config, mode=INFER, workspace=workspace)
    return (z - v)[0, 0]
