"""Input checking shared by the estimator wrappers and the CLI.

Frames travel as C x H x W float arrays in [0, 1]; videos as a sequence
of frames with uniform dims, or equivalently one T x C x H x W array.
The helpers normalise both spellings to a list of float32 frames and
fail loudly on malformed input instead of letting shape errors surface
deep inside the pipeline.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DimensionError, NumericError
from .numerics import DEFAULT_DTYPE


def check_frame(x, name: str = "frame") -> np.ndarray:
    """Validate one C x H x W frame and return it as float32."""
    arr = np.asarray(x)
    if arr.ndim != 3:
        raise DimensionError(f"{name} must be C x H x W, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise DegenerateInputError(f"{name} has an empty axis: {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(DEFAULT_DTYPE)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr.astype(DEFAULT_DTYPE, copy=False)


def check_video(X, name: str = "X") -> list[np.ndarray]:
    """Validate a frame sequence (list of frames or one T x C x H x W array)."""
    if isinstance(X, np.ndarray):
        if X.ndim != 4:
            raise DimensionError(
                f"{name} must be T x C x H x W or a sequence of frames, got shape {X.shape}"
            )
        frames = list(X)
    else:
        frames = list(X)
    if len(frames) == 0:
        raise DegenerateInputError(f"{name} contains no frames")
    checked = [check_frame(f, f"{name}[{i}]") for i, f in enumerate(frames)]
    first = checked[0].shape
    for i, f in enumerate(checked):
        if f.shape != first:
            raise DimensionError(
                f"{name}[{i}] shape {f.shape} differs from {name}[0] shape {first}"
            )
    return checked
