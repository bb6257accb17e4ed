"""Small numeric core: dtypes, sampling, softmax, and the tensor dump format.

Production paths run in float32. Every routine here is dtype-preserving, so
gradient checks can push float64 through the same code. Reductions are
delegated to numpy/BLAS, which is deterministic for a fixed build and input:
repeated calls in one environment give bit-identical results regardless of
how much concurrency the caller layers on top.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .errors import DegenerateInputError, DimensionError, NumericError, ParameterError

DEFAULT_DTYPE = np.float32
GRAD_DTYPE = np.float64

TENSOR_MAGIC = b"FQT1"


def as_f32(data) -> np.ndarray:
    """Coerce array-likes to a C-contiguous float32 ndarray."""
    return np.ascontiguousarray(np.asarray(data, dtype=DEFAULT_DTYPE))


def ensure_finite(arr: np.ndarray, context: str = "array") -> np.ndarray:
    """Raise NumericError if arr contains NaN or Inf; return arr unchanged."""
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{context}: non-finite values encountered")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two rank-2 arrays with explicit shape validation."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects rank-2 operands, got {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dims disagree: {a.shape} @ {b.shape}")
    return a @ b


def softmax(v: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Overflow-safe softmax over the last axis.

    The max is subtracted before exponentiation so magnitudes around 1e4
    stay finite. Output rows sum to 1 up to rounding.
    """
    v = np.asarray(v)
    if v.size == 0:
        raise DegenerateInputError("softmax over an empty set of scores")
    z = v * v.dtype.type(scale) if scale != 1.0 else v
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def bilinear_sample(field: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Sample a C x H x W field at per-pixel positions.

    coords is 2 x H x W holding absolute sample positions: coords[0] is x
    (along width), coords[1] is y (along height). Samples landing strictly
    outside the field contribute zero; integer in-range positions reproduce
    pixel values exactly.
    """
    field = np.asarray(field)
    coords = np.asarray(coords)
    if field.ndim != 3:
        raise DimensionError(f"field must be C x H x W, got shape {field.shape}")
    if coords.ndim != 3 or coords.shape[0] != 2:
        raise DimensionError(f"coords must be 2 x H x W, got shape {coords.shape}")
    _, h, w = field.shape
    x, y = coords[0], coords[1]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = (x - x0).astype(field.dtype)
    fy = (y - y0).astype(field.dtype)
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    out = np.zeros((field.shape[0],) + x.shape, dtype=field.dtype)
    one = field.dtype.type(1)
    for dy, wy in ((0, one - fy), (1, fy)):
        yi = y0 + dy
        vy = (yi >= 0) & (yi < h)
        yc = np.clip(yi, 0, h - 1)
        for dx, wx in ((0, one - fx), (1, fx)):
            xi = x0 + dx
            vx = (xi >= 0) & (xi < w)
            xc = np.clip(xi, 0, w - 1)
            weight = wy * wx * (vy & vx)
            out += field[:, yc, xc] * weight[None]
    return out


def _cubic_kernel(t: np.ndarray) -> np.ndarray:
    """Cubic convolution kernel with a = -0.5 (Catmull-Rom), support [-2, 2]."""
    a = -0.5
    at = np.abs(t)
    at2 = at * at
    at3 = at2 * at
    near = (a + 2.0) * at3 - (a + 3.0) * at2 + 1.0
    far = a * at3 - 5.0 * a * at2 + 8.0 * a * at - 4.0 * a
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))


def resample_matrix(n_in: int, factor: float, dtype=np.float64) -> np.ndarray:
    """Dense 1-D cubic resampling operator mapping n_in samples to ceil(factor * n_in).

    Sample centers follow the half-pixel convention
    src = (dst + 0.5) / factor - 0.5, taps outside the signal are clamped to
    the edge (replication). factor 1 yields the identity exactly.
    """
    if n_in < 1:
        raise DimensionError("resample_matrix needs at least one input sample")
    if not (factor > 0.0) or not math.isfinite(factor):
        raise ParameterError(f"resample factor must be positive and finite, got {factor}")
    n_out = math.ceil(round(factor * n_in, 9))
    centers = (np.arange(n_out, dtype=np.float64) + 0.5) / factor - 0.5
    base = np.floor(centers).astype(np.int64)
    frac = centers - base
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    for tap in (-1, 0, 1, 2):
        weight = _cubic_kernel(frac - tap)
        idx = np.clip(base + tap, 0, n_in - 1)
        np.add.at(mat, (rows, idx), weight)
    return mat.astype(dtype)


def bicubic_resize(image: np.ndarray, factor: float) -> np.ndarray:
    """Separable bicubic (a = -0.5) resize of a C x H x W image by a positive factor.

    Output dims are ceil(factor * dim). Boundaries replicate edge samples,
    so constant images stay constant.
    """
    image = np.asarray(image)
    if image.ndim != 3:
        raise DimensionError(f"image must be C x H x W, got shape {image.shape}")
    c, h, w = image.shape
    rh = resample_matrix(h, factor, dtype=image.dtype)
    rw = resample_matrix(w, factor, dtype=image.dtype)
    # rows then columns; per channel keeps the temporaries small
    out = np.empty((c, rh.shape[0], rw.shape[0]), dtype=image.dtype)
    for ch in range(c):
        out[ch] = rh @ image[ch] @ rw.T
    return out


def save_tensor(path, arr: np.ndarray) -> None:
    """Write an array in the repo dump format.

    Layout: magic 'FQT1', u32 rank, rank u32 extents, then the row-major
    payload as little-endian float32.
    """
    arr = np.asarray(arr)
    data = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(data.tobytes(order="C"))


def load_tensor(path) -> np.ndarray:
    """Read an array written by save_tensor. Raises IntegrityError on a bad file."""
    from .errors import IntegrityError

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != TENSOR_MAGIC:
        raise IntegrityError(f"{path}: missing tensor magic")
    (rank,) = struct.unpack_from("<I", blob, 4)
    header_end = 8 + 4 * rank
    if len(blob) < header_end:
        raise IntegrityError(f"{path}: truncated extent header")
    shape = struct.unpack_from(f"<{rank}I", blob, 8)
    count = 1
    for extent in shape:
        count *= extent
    payload = blob[header_end:]
    if len(payload) != 4 * count:
        raise IntegrityError(
            f"{path}: payload holds {len(payload) // 4} floats, extents imply {count}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return arr.astype(DEFAULT_DTYPE)
