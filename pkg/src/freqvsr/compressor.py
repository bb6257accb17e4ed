"""Codec-free degradation: bicubic downsampling plus DCT quantization.

Real video codecs are out of scope; what matters for the experiments is
input material whose high-frequency content shrinks as quality drops.
Each block's coefficients are snapped to a step that grows with both the
strength q and the frequency diagonal,

    s(u, v, q) = q * (1 + u + v)

so strong settings crush high bands first, a crude echo of codec
quantization matrices. The three presets are mnemonics for weak, medium
and strong loss; no equivalence with any real encoder is implied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dct import SpectralMap, frame_to_spectral, pad_edge, spectral_to_frame, unpad
from .errors import DimensionError, ParameterError
from .numerics import bicubic_resize

PRESETS = {
    "crf15-like": 1.0 / 255.0,
    "crf25-like": 6.0 / 255.0,
    "crf35-like": 20.0 / 255.0,
}


@dataclass(frozen=True)
class DegradeConfig:
    """Downsample factor plus quantization strength (0 disables loss)."""

    scale: int = 4
    q: float = PRESETS["crf25-like"]
    block_size: int = 8

    def __post_init__(self):
        if self.scale < 1:
            raise ParameterError(f"scale must be >= 1, got {self.scale}")
        if self.q < 0:
            raise ParameterError(f"q must be >= 0, got {self.q}")
        if self.block_size < 1:
            raise ParameterError(f"block size must be >= 1, got {self.block_size}")


def quantization_steps(q: float, block_size: int) -> np.ndarray:
    """Per-frequency step sizes as an F-vector ordered like spectral planes."""
    u, v = np.divmod(np.arange(block_size * block_size), block_size)
    return q * (1.0 + u + v)


def quantize_compress(frame: np.ndarray, q: float, block_size: int = 8) -> np.ndarray:
    """Snap each DCT coefficient to its frequency-dependent step.

    q = 0 reduces to a spectral roundtrip. Frames not divisible by the
    block size are edge-padded for the transform and cropped back.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3:
        raise DimensionError(f"frame must be C x H x W, got {frame.shape}")
    if q < 0:
        raise ParameterError(f"q must be >= 0, got {q}")
    padded, record = pad_edge(frame, block_size)
    spectral = frame_to_spectral(padded, block_size)
    data = spectral.data
    if q > 0:
        steps = quantization_steps(q, block_size).astype(data.dtype)
        steps = steps.reshape(-1, 1, 1, 1)
        data = np.round(data / steps) * steps
    out = spectral_to_frame(SpectralMap(data, block_size))
    return unpad(out, record)


def degrade_sequence(frames, config: DegradeConfig | None = None) -> list[np.ndarray]:
    """Bicubic-downsample then quantize every frame of a sequence."""
    config = DegradeConfig() if config is None else config
    frames = [np.asarray(f) for f in frames]
    if len(frames) == 0:
        raise DimensionError("sequence must contain at least one frame")
    out = []
    for i, frame in enumerate(frames):
        if frame.ndim != 3:
            raise DimensionError(f"frame {i} must be C x H x W, got {frame.shape}")
        _, h, w = frame.shape
        if h % config.scale or w % config.scale:
            raise DimensionError(
                f"frame {i} dims {(h, w)} not divisible by scale {config.scale}"
            )
        small = frame if config.scale == 1 else bicubic_resize(frame, 1.0 / config.scale)
        out.append(quantize_compress(small, config.q, config.block_size))
    return out
