"""Reading and writing frames as numbered image files.

PPM (binary P6, 8-bit) is the native interchange format: it is exact,
dependency-free and diffable with a hex viewer. PNG support is a thin
optional layer over Pillow for convenience; when Pillow is missing the
PNG paths raise a clear error instead of importing lazily at call sites.

Frames are C x H x W float arrays in [0, 1]; files store 8-bit RGB, so a
write/read trip quantizes to 1/255 steps.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import DimensionError, IntegrityError, ParameterError
from .numerics import DEFAULT_DTYPE

FRAME_PATTERN = "frame_%04d"

try:
    from PIL import Image as _pil_image
except ImportError:  # pragma: no cover - depends on the environment
    _pil_image = None


def have_png() -> bool:
    """True when the optional PNG backend (Pillow) is importable."""
    return _pil_image is not None


def to_bytes(frame: np.ndarray) -> np.ndarray:
    """Quantize a C x H x W float frame in [0, 1] to H x W x C uint8."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise DimensionError(f"expected a 3 x H x W frame, got {frame.shape}")
    clipped = np.clip(np.round(frame.astype(np.float64) * 255.0), 0.0, 255.0)
    return clipped.astype(np.uint8).transpose(1, 2, 0)


def from_bytes(pixels: np.ndarray) -> np.ndarray:
    """H x W x C uint8 to C x H x W float32 in [0, 1]."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3 pixel data, got {pixels.shape}")
    return (pixels.astype(DEFAULT_DTYPE) / DEFAULT_DTYPE(255.0)).transpose(2, 0, 1)


def write_ppm(path, frame: np.ndarray) -> None:
    """Write a frame as binary PPM (P6, maxval 255)."""
    pixels = to_bytes(frame)
    h, w, _ = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM (P6, maxval 255) into a float frame."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P6"):
        raise IntegrityError(f"{path}: not a binary PPM (P6) file")
    # header = magic + width + height + maxval, whitespace separated,
    # '#' comments allowed between tokens
    tokens: list[int] = []
    offset = 2
    while len(tokens) < 3:
        match = re.match(rb"(?:\s+|#[^\n]*\n)*(\d+)", blob[offset:])
        if match is None:
            raise IntegrityError(f"{path}: truncated PPM header")
        tokens.append(int(match.group(1)))
        offset += match.end()
    width, height, maxval = tokens
    if maxval != 255:
        raise IntegrityError(f"{path}: only maxval 255 supported, got {maxval}")
    offset += 1  # single whitespace byte after maxval
    expected = width * height * 3
    payload = blob[offset : offset + expected]
    if len(payload) != expected:
        raise IntegrityError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return from_bytes(pixels)


def write_png(path, frame: np.ndarray) -> None:
    """Write a frame as 8-bit RGB PNG (requires Pillow)."""
    if _pil_image is None:
        raise ParameterError("PNG output needs Pillow; install the 'png' extra or use PPM")
    _pil_image.fromarray(to_bytes(frame), mode="RGB").save(path, format="PNG")


def read_png(path) -> np.ndarray:
    """Read an image file via Pillow into a float frame."""
    if _pil_image is None:
        raise ParameterError("PNG input needs Pillow; install the 'png' extra or use PPM")
    with _pil_image.open(path) as img:
        pixels = np.asarray(img.convert("RGB"))
    return from_bytes(pixels)


def write_frame(path, frame: np.ndarray) -> None:
    """Dispatch on the file extension (.ppm or .png)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".ppm":
        write_ppm(path, frame)
    elif suffix == ".png":
        write_png(path, frame)
    else:
        raise ParameterError(f"unsupported frame format {suffix!r}, use .ppm or .png")


def read_frame(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".ppm":
        return read_ppm(path)
    if suffix == ".png":
        return read_png(path)
    raise ParameterError(f"unsupported frame format {suffix!r}, use .ppm or .png")


def list_frames(directory) -> list[Path]:
    """Frame files of a directory in name order (PPM preferred over PNG twins)."""
    root = Path(directory)
    if not root.is_dir():
        raise ParameterError(f"{directory}: not a directory")
    byname: dict[str, Path] = {}
    for path in sorted(root.iterdir()):
        if path.suffix.lower() == ".ppm":
            byname[path.stem] = path
        elif path.suffix.lower() == ".png":
            byname.setdefault(path.stem, path)
    return [byname[stem] for stem in sorted(byname)]


def write_sequence(directory, frames, *, also_png: bool = False) -> list[Path]:
    """Write frames as frame_0000.ppm ... into directory; returns the paths."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for i, frame in enumerate(frames):
        path = root / f"{FRAME_PATTERN % i}.ppm"
        write_ppm(path, frame)
        written.append(path)
        if also_png and have_png():
            write_png(root / f"{FRAME_PATTERN % i}.png", frame)
    return written


def read_sequence(directory) -> list[np.ndarray]:
    """Read every frame image of a directory in name order."""
    paths = list_frames(directory)
    if not paths:
        raise ParameterError(f"{directory}: contains no frame images")
    return [read_frame(p) for p in paths]
