"""Orthonormal block DCT and the spectral-map layout.

A frame is cut into B x B tiles and every tile is transformed with the
orthonormal 2-D type-II cosine transform

    D(u, v) = c(u) c(v) sum_x sum_y P(x, y)
              cos((2x+1) u pi / (2B)) cos((2y+1) v pi / (2B))

with c(0) = sqrt(1/B) and c(u>0) = sqrt(2/B). The transform is applied
separably (rows then columns). Coefficients are regrouped so that each
frequency pair (u, v) forms its own spatial plane: a C x H x W frame with
H = B*Hb becomes an F x C x Hb x Wb map with F = B*B and plane index
f = u * B + v. The layout keeps one frequency contiguous across the whole
frame, which is what the tokenizer slices.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, IntegrityError, ParameterError
from .numerics import save_tensor, load_tensor

DEFAULT_BLOCK_SIZE = 8

# Test hook: the self-test deliberately perturbs the transform scale to prove
# the orthonormality check can fail. Never touched on production paths.
_FAULT_SCALE = 1.0


@contextlib.contextmanager
def _scale_fault(scale: float):
    global _FAULT_SCALE
    _FAULT_SCALE = float(scale)
    _cached_matrix.cache_clear()
    try:
        yield
    finally:
        _FAULT_SCALE = 1.0
        _cached_matrix.cache_clear()


@lru_cache(maxsize=None)
def _cached_matrix(block_size: int, fault: float) -> np.ndarray:
    x = np.arange(block_size, dtype=np.float64)
    u = x[:, None]
    mat = np.cos((2.0 * x[None, :] + 1.0) * u * np.pi / (2.0 * block_size))
    mat *= np.sqrt(2.0 / block_size)
    mat[0] = np.sqrt(1.0 / block_size)
    return mat * fault


def transform_matrix(block_size: int = DEFAULT_BLOCK_SIZE) -> np.ndarray:
    """Orthonormal DCT matrix M with M[u, x] = c(u) cos((2x+1) u pi / (2B))."""
    if block_size < 1:
        raise ParameterError(f"block size must be >= 1, got {block_size}")
    return _cached_matrix(int(block_size), _FAULT_SCALE).copy()


def dct2d_block(patch: np.ndarray, block_size: int | None = None) -> np.ndarray:
    """Forward 2-D DCT of one B x B patch (rows then columns)."""
    patch = np.asarray(patch)
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise DimensionError(f"patch must be square rank-2, got shape {patch.shape}")
    b = patch.shape[0] if block_size is None else block_size
    if patch.shape != (b, b):
        raise DimensionError(f"patch shape {patch.shape} does not match block size {b}")
    m = transform_matrix(b).astype(patch.dtype)
    return m @ patch @ m.T


def idct2d_block(coeffs: np.ndarray, block_size: int | None = None) -> np.ndarray:
    """Inverse of dct2d_block; exact up to rounding because M is orthonormal."""
    coeffs = np.asarray(coeffs)
    if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:
        raise DimensionError(f"coeffs must be square rank-2, got shape {coeffs.shape}")
    b = coeffs.shape[0] if block_size is None else block_size
    if coeffs.shape != (b, b):
        raise DimensionError(f"coeffs shape {coeffs.shape} does not match block size {b}")
    m = transform_matrix(b).astype(coeffs.dtype)
    return m.T @ coeffs @ m


@dataclass(frozen=True)
class PadRecord:
    """Original extents of a frame padded up to a divisor, for later cropping."""

    height: int
    width: int
    padded_height: int
    padded_width: int


def pad_edge(frame: np.ndarray, divisor: int) -> tuple[np.ndarray, PadRecord]:
    """Pad a C x H x W frame on the bottom/right with edge values to a multiple of divisor."""
    frame = np.asarray(frame)
    if frame.ndim != 3:
        raise DimensionError(f"frame must be C x H x W, got shape {frame.shape}")
    if divisor < 1:
        raise ParameterError(f"divisor must be >= 1, got {divisor}")
    _, h, w = frame.shape
    if h < 1 or w < 1:
        raise DimensionError("frame must have at least one pixel per axis")
    ph = (-h) % divisor
    pw = (-w) % divisor
    record = PadRecord(h, w, h + ph, w + pw)
    if ph == 0 and pw == 0:
        return frame, record
    return np.pad(frame, ((0, 0), (0, ph), (0, pw)), mode="edge"), record


def unpad(frame: np.ndarray, record: PadRecord) -> np.ndarray:
    """Crop away padding added by pad_edge."""
    frame = np.asarray(frame)
    if frame.shape[-2:] != (record.padded_height, record.padded_width):
        raise IntegrityError(
            f"frame dims {frame.shape[-2:]} do not match pad record "
            f"({record.padded_height}, {record.padded_width})"
        )
    return frame[..., : record.height, : record.width]


@dataclass(frozen=True)
class SpectralMap:
    """Block-DCT coefficients of one frame, grouped per frequency.

    data has shape F x C x Hb x Wb where F = block_size ** 2, Hb = H / B and
    Wb = W / B for the source frame. Plane f holds coefficient
    (u, v) = divmod(f, B) of every tile.
    """

    data: np.ndarray
    block_size: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 4:
            raise DimensionError(f"spectral data must be F x C x Hb x Wb, got {data.shape}")
        if data.shape[0] != self.block_size * self.block_size:
            raise IntegrityError(
                f"frequency count {data.shape[0]} does not equal block_size^2 "
                f"({self.block_size}^2)"
            )
        object.__setattr__(self, "data", data)

    @property
    def freq_count(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def grid(self) -> tuple[int, int]:
        return self.data.shape[2], self.data.shape[3]


def frame_to_spectral(frame: np.ndarray, block_size: int = DEFAULT_BLOCK_SIZE) -> SpectralMap:
    """Tile a C x H x W frame into B x B blocks and DCT each one.

    H and W must be multiples of block_size; pad_edge handles that upstream.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3:
        raise DimensionError(f"frame must be C x H x W, got shape {frame.shape}")
    c, h, w = frame.shape
    b = int(block_size)
    if b < 1:
        raise ParameterError(f"block size must be >= 1, got {block_size}")
    if h % b or w % b:
        raise DimensionError(f"frame dims ({h}, {w}) not divisible by block size {b}")
    hb, wb = h // b, w // b
    m = transform_matrix(b).astype(frame.dtype)
    tiles = frame.reshape(c, hb, b, wb, b).transpose(0, 1, 3, 2, 4)
    coeffs = m @ tiles @ m.T  # batched over (c, hb, wb)
    planes = coeffs.transpose(3, 4, 0, 1, 2).reshape(b * b, c, hb, wb)
    return SpectralMap(np.ascontiguousarray(planes), b)


def spectral_to_frame(spectral: SpectralMap) -> np.ndarray:
    """Inverse of frame_to_spectral."""
    b = spectral.block_size
    f, c, hb, wb = spectral.data.shape
    m = transform_matrix(b).astype(spectral.data.dtype)
    coeffs = spectral.data.reshape(b, b, c, hb, wb).transpose(2, 3, 4, 0, 1)
    tiles = m.T @ coeffs @ m
    frame = tiles.transpose(0, 1, 3, 2, 4).reshape(c, hb * b, wb * b)
    return np.ascontiguousarray(frame)


def save_spectral(path, spectral: SpectralMap) -> None:
    """Dump a spectral map plus a one-line sidecar recording the block size."""
    save_tensor(path, spectral.data)
    with open(f"{path}.meta", "w", encoding="ascii") as fh:
        fh.write(f"block_size={spectral.block_size}\n")


def load_spectral(path) -> SpectralMap:
    """Load a spectral map written by save_spectral."""
    data = load_tensor(path)
    try:
        with open(f"{path}.meta", "r", encoding="ascii") as fh:
            line = fh.readline().strip()
        key, value = line.split("=", 1)
        if key != "block_size":
            raise ValueError(key)
        block_size = int(value)
    except (OSError, ValueError) as exc:
        raise IntegrityError(f"{path}.meta: missing or malformed block size sidecar") from exc
    return SpectralMap(data, block_size)
