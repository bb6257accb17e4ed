"""Reconstruction quality measures and the gradient-check harness.

The loss is the Charbonnier penalty averaged over frames, with the norm
taken over the whole frame:

    loss = (1/T) sum_t sqrt(||hr_t - sr_t||^2 + eps^2)

so a perfect reconstruction scores exactly eps. Its gradient with respect
to the reconstruction is analytic and checked against central finite
differences by gradcheck, the same harness used for the attention, FFN
and fusion probes.

PSNR uses one mean square error over all channels jointly. SSIM follows
the standard single-channel form: 11 x 11 Gaussian window, sigma 1.5,
k1 = 0.01, k2 = 0.03 on dynamic range 1.0, averaged over valid window
positions only; callers convert color frames to luma first.

amplitude_spectrum reduces a frame's block-DCT coefficients to one value
per frequency band, where band b collects the coefficients with u + v = b.
The default is the mean absolute coefficient; power mode averages squared
coefficients instead, which makes band_mean * band_count sum to the total
signal energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dct import frame_to_spectral, pad_edge
from .errors import DimensionError, NumericError, ParameterError
from .numerics import GRAD_DTYPE

CHARBONNIER_EPS = 1e-3
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class LossReport:
    """Charbonnier loss broken down per frame."""

    total: float
    per_frame: tuple[float, ...]
    eps: float


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of one finite-difference comparison."""

    max_rel_error: float
    errors: np.ndarray
    step: float
    tol: float
    passed: bool


def _stack_pair(sr, hr):
    sr = [np.asarray(f) for f in sr]
    hr = [np.asarray(f) for f in hr]
    if len(sr) == 0:
        raise DimensionError("loss needs at least one frame")
    if len(sr) != len(hr):
        raise DimensionError(f"frame counts differ: {len(sr)} vs {len(hr)}")
    for i, (a, b) in enumerate(zip(sr, hr)):
        if a.shape != b.shape:
            raise DimensionError(f"frame {i} shapes differ: {a.shape} vs {b.shape}")
    return np.stack(sr), np.stack(hr)


def charbonnier_loss(sr, hr, eps: float = CHARBONNIER_EPS) -> LossReport:
    """Per-frame global Charbonnier penalty, averaged over the sequence."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    s, h = _stack_pair(sr, hr)
    diff = (h.astype(GRAD_DTYPE) - s.astype(GRAD_DTYPE)).reshape(len(s), -1)
    per_frame = np.sqrt(np.sum(diff * diff, axis=1) + eps * eps)
    return LossReport(float(per_frame.mean()), tuple(float(v) for v in per_frame), eps)


def charbonnier_grad(sr, hr, eps: float = CHARBONNIER_EPS) -> np.ndarray:
    """d(loss)/d(sr) as a float64 array stacked to match np.stack(sr)."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    s, h = _stack_pair(sr, hr)
    diff = h.astype(GRAD_DTYPE) - s.astype(GRAD_DTYPE)
    t = len(s)
    denom = np.sqrt(np.sum(diff.reshape(t, -1) ** 2, axis=1) + eps * eps)
    return -diff / denom.reshape((t,) + (1,) * (diff.ndim - 1)) / t


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over all channels jointly.

    Identical inputs return +inf.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"psnr inputs differ in shape: {a.shape} vs {b.shape}")
    if not peak > 0:
        raise ParameterError(f"peak must be positive, got {peak}")
    diff = a.astype(GRAD_DTYPE) - b.astype(GRAD_DTYPE)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def rgb_to_luma(frame: np.ndarray) -> np.ndarray:
    """BT.601 luma of a 3 x H x W frame."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise DimensionError(f"expected a 3 x H x W frame, got {frame.shape}")
    r, g, b = LUMA_WEIGHTS
    return r * frame[0] + g * frame[1] + b * frame[2]


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size, dtype=GRAD_DTYPE) - half
    one_d = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    window = np.outer(one_d, one_d)
    return window / window.sum()


def _windowed_mean(plane: np.ndarray, window: np.ndarray) -> np.ndarray:
    views = np.lib.stride_tricks.sliding_window_view(plane, window.shape)
    return np.tensordot(views, window, axes=((2, 3), (0, 1)))


def ssim(a: np.ndarray, b: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity of two single-channel frames in [0, 1]."""
    a = np.asarray(a, dtype=GRAD_DTYPE)
    b = np.asarray(b, dtype=GRAD_DTYPE)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("ssim expects 2-D single-channel frames")
    if a.shape != b.shape:
        raise DimensionError(f"ssim inputs differ in shape: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ParameterError(
            f"frame {a.shape} smaller than the {SSIM_WINDOW} x {SSIM_WINDOW} ssim window"
        )
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    window = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_a = _windowed_mean(a, window)
    mu_b = _windowed_mean(b, window)
    var_a = _windowed_mean(a * a, window) - mu_a * mu_a
    var_b = _windowed_mean(b * b, window) - mu_b * mu_b
    cov = _windowed_mean(a * b, window) - mu_a * mu_b
    score = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())


def band_counts(block_size: int) -> np.ndarray:
    """Coefficients per diagonal band u + v = b, b in [0, 2*block_size - 2]."""
    counts = np.zeros(2 * block_size - 1, dtype=int)
    for u in range(block_size):
        for v in range(block_size):
            counts[u + v] += 1
    return counts


def amplitude_spectrum(
    frame: np.ndarray,
    block_size: int = 8,
    band_range: tuple[int, int] | None = None,
    *,
    power: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean |DCT coefficient| (or coefficient^2) per frequency band.

    Returns (band indices, band means). Bands index the diagonals u + v of
    the block spectrum; band_range = (lo, hi) clips to that inclusive
    sub-range. Frames not divisible by the block size are edge-padded
    first, matching the pipeline's padding rule.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3:
        raise DimensionError(f"frame must be C x H x W, got {frame.shape}")
    top = 2 * block_size - 2
    if band_range is None:
        lo, hi = 0, top
    else:
        lo, hi = int(band_range[0]), int(band_range[1])
    if lo < 0 or hi > top or lo > hi:
        raise ParameterError(
            f"band range [{lo}, {hi}] invalid for block size {block_size} "
            f"(valid bands: 0..{top})"
        )
    padded, _ = pad_edge(frame, block_size)
    spectral = frame_to_spectral(padded.astype(GRAD_DTYPE), block_size)
    planes = spectral.data.reshape(spectral.freq_count, -1)
    magnitudes = planes * planes if power else np.abs(planes)
    bands = np.arange(lo, hi + 1)
    values = np.empty(bands.shape, dtype=GRAD_DTYPE)
    uv_sum = np.add.outer(np.arange(block_size), np.arange(block_size)).reshape(-1)
    for j, band in enumerate(bands):
        values[j] = magnitudes[uv_sum == band].mean()
    return bands, values


def gradcheck(fn, point: np.ndarray, *, step: float = 1e-5, tol: float = 1e-5) -> GradCheckReport:
    """Compare an analytic gradient against central finite differences.

    fn maps a float64 array to (scalar value, gradient array of the same
    shape). Differences are taken coordinate-wise; the relative error of
    coordinate i is |a_i - n_i| / max(|a_i|, |n_i|, 1e-12).
    """
    point = np.array(point, dtype=GRAD_DTYPE)
    value, grad = fn(point)
    grad = np.asarray(grad, dtype=GRAD_DTYPE)
    if grad.shape != point.shape:
        raise DimensionError(f"gradient shape {grad.shape} must match point {point.shape}")
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericError("gradcheck: non-finite value or analytic gradient")
    numeric = np.empty_like(point)
    flat_point = point.reshape(-1)
    flat_num = numeric.reshape(-1)
    for i in range(flat_point.size):
        orig = flat_point[i]
        flat_point[i] = orig + step
        plus, _ = fn(point)
        flat_point[i] = orig - step
        minus, _ = fn(point)
        flat_point[i] = orig
        flat_num[i] = (plus - minus) / (2.0 * step)
    if not np.all(np.isfinite(numeric)):
        raise NumericError("gradcheck: non-finite finite-difference estimate")
    scale = np.maximum(np.maximum(np.abs(grad), np.abs(numeric)), 1e-12)
    errors = np.abs(grad - numeric) / scale
    worst = float(errors.max()) if errors.size else 0.0
    return GradCheckReport(worst, errors, step, tol, worst <= tol)
