"""Image-quality metrics and fringe skeleton extraction.

PSNR, mean SSIM and MAE compare a test image against a reference on the
[0, 255] intensity scale.  Skeletons come from Otsu binarization followed
by Zhang-Suen two-subiteration parallel thinning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .layers import ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricsReport:
    psnr: float
    ssim: float
    mae: float


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"image dimensions differ: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """10*log10(peak^2 / MSE); identical images report +inf."""
    _check_dims(a, b)
    mse = float(np.mean(np.square(np.asarray(a, dtype=np.float64) - b)))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def mae(a: np.ndarray, b: np.ndarray) -> float:
    _check_dims(a, b)
    return float(np.mean(np.abs(np.asarray(a, dtype=np.float64) - b)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_mean(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """Mean of the local SSIM map over all fully-interior windows.

    Gaussian-weighted 11x11 windows (sigma 1.5), stabilizers K1=0.01 and
    K2=0.03 on a dynamic range of ``peak``.  No padding: windows that would
    overhang the border are excluded, which keeps fringe boundaries from
    biasing the score.  Inputs are expected on the [0, peak] scale.
    """
    _check_dims(a, b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(
            f"image {a.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    w = gaussian_window()
    win_a = np.lib.stride_tricks.sliding_window_view(a, (SSIM_WINDOW, SSIM_WINDOW))
    win_b = np.lib.stride_tricks.sliding_window_view(b, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = np.tensordot(win_a, w, axes=([2, 3], [0, 1]))
    mu_b = np.tensordot(win_b, w, axes=([2, 3], [0, 1]))
    ea2 = np.tensordot(win_a * win_a, w, axes=([2, 3], [0, 1]))
    eb2 = np.tensordot(win_b * win_b, w, axes=([2, 3], [0, 1]))
    eab = np.tensordot(win_a * win_b, w, axes=([2, 3], [0, 1]))
    var_a = ea2 - mu_a * mu_a
    var_b = eb2 - mu_b * mu_b
    cov = eab - mu_a * mu_b
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def metrics_report(reference: np.ndarray, test: np.ndarray) -> MetricsReport:
    return MetricsReport(
        psnr=psnr(test, reference), ssim=ssim_mean(test, reference), mae=mae(test, reference)
    )


def otsu_threshold(img: np.ndarray) -> int:
    """Threshold in 0..255 maximizing between-class variance of the rounded
    intensity histogram.  Ties resolve to the lowest threshold."""
    levels = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.int64)
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    probs = hist / total
    omega0 = np.cumsum(probs)  # weight of the class at or below t
    mu_t = np.cumsum(probs * np.arange(256))
    mu_total = mu_t[-1]
    omega1 = 1.0 - omega0
    valid = (omega0 > 0) & (omega1 > 0)
    between = np.zeros(256)
    between[valid] = (mu_total * omega0[valid] - mu_t[valid]) ** 2 / (
        omega0[valid] * omega1[valid]
    )
    return int(np.argmax(between))


def binarize(img: np.ndarray) -> np.ndarray:
    """Global Otsu binarization; pixels strictly above the threshold are 1.

    A constant image has no separable classes and maps to all zeros.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.max() == img.min():
        return np.zeros(img.shape, dtype=np.uint8)
    t = otsu_threshold(img)
    return (img > t).astype(np.uint8)


def _neighbors(padded: np.ndarray) -> list[np.ndarray]:
    """P2..P9 of every pixel: N, NE, E, SE, S, SW, W, NW."""
    return [
        padded[:-2, 1:-1],
        padded[:-2, 2:],
        padded[1:-1, 2:],
        padded[2:, 2:],
        padded[2:, 1:-1],
        padded[2:, :-2],
        padded[1:-1, :-2],
        padded[:-2, :-2],
    ]


def thin(binary: np.ndarray) -> np.ndarray:
    """Zhang-Suen parallel thinning to a 1-pixel-wide, 8-connected skeleton.

    Both subiterations mark deletable border pixels from the same snapshot
    and remove them at once; iteration stops when a full pass changes
    nothing.
    """
    img = np.asarray(binary)
    if not np.isin(img, (0, 1)).all():
        raise ValueError("thin expects a binary image of 0s and 1s")
    img = img.astype(np.uint8).copy()
    while True:
        changed = False
        for step in (0, 1):
            padded = np.pad(img, 1)
            nb = _neighbors(padded)
            b = sum(n.astype(np.int32) for n in nb)
            ring = np.stack(nb + [nb[0]], axis=0).astype(np.int32)
            a = ((ring[1:] - ring[:-1]) == 1).sum(axis=0)
            if step == 0:
                cond3 = nb[0] * nb[2] * nb[4] == 0  # P2*P4*P6
                cond4 = nb[2] * nb[4] * nb[6] == 0  # P4*P6*P8
            else:
                cond3 = nb[0] * nb[2] * nb[6] == 0  # P2*P4*P8
                cond4 = nb[0] * nb[4] * nb[6] == 0  # P2*P6*P8
            remove = (
                (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & cond3 & cond4
            )
            if remove.any():
                img[remove] = 0
                changed = True
        if not changed:
            return img
