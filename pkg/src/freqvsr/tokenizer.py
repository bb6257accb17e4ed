"""Slicing spectral maps into frequency tokens and back.

A token is one frequency plane restricted to a K x K block of the spectral
grid: payload shape C x K x K, addressed by (frame t, block i, frequency f).
Blocks are numbered row-major over the (Hb/K, Wb/K) grid. A stack of T maps
with N blocks and F frequencies yields exactly T * N * F tokens; tokenize
and detokenize are exact inverses of each other.

For attention the payload is flattened to a vector of length C * K * K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dct import SpectralMap, frame_to_spectral
from .errors import DegenerateInputError, DimensionError, IntegrityError, ParameterError

DEFAULT_TOKEN_SIZE = 8


@dataclass(frozen=True)
class TokenSet:
    """Frequency tokens of one or more frames.

    data has shape T x N x F x C x K x K. grid records the block layout
    (rows, cols) with rows * cols == N, needed to reassemble maps.
    """

    data: np.ndarray
    grid: tuple[int, int]
    block_size: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 6:
            raise DimensionError(f"token data must be T x N x F x C x K x K, got {data.shape}")
        if data.shape[4] != data.shape[5]:
            raise IntegrityError(f"token payload must be square, got {data.shape[4:]}")
        rows, cols = self.grid
        if rows * cols != data.shape[1]:
            raise IntegrityError(
                f"grid {self.grid} implies {rows * cols} blocks, data holds {data.shape[1]}"
            )
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def blocks(self) -> int:
        return self.data.shape[1]

    @property
    def freqs(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    @property
    def token_size(self) -> int:
        return self.data.shape[4]

    @property
    def count(self) -> int:
        return self.frames * self.blocks * self.freqs

    @property
    def vector_length(self) -> int:
        c, k = self.data.shape[3], self.data.shape[4]
        return c * k * k

    def vectors(self) -> np.ndarray:
        """Tokens flattened for dot products: shape T x N x F x (C*K*K)."""
        t, n, f = self.data.shape[:3]
        return self.data.reshape(t, n, f, self.vector_length)

    def payload(self, t: int, i: int, f: int) -> np.ndarray:
        return self.data[t, i, f]


def tokenize(maps: Sequence[SpectralMap], token_size: int = DEFAULT_TOKEN_SIZE) -> TokenSet:
    """Cut a stack of spectral maps into K x K block tokens."""
    if len(maps) == 0:
        raise DegenerateInputError("tokenize needs at least one spectral map")
    k = int(token_size)
    if k < 1:
        raise ParameterError(f"token size must be >= 1, got {token_size}")
    first = maps[0]
    for m in maps[1:]:
        if m.data.shape != first.data.shape or m.block_size != first.block_size:
            raise IntegrityError("all spectral maps must share shape and block size")
    hb, wb = first.grid
    if hb % k or wb % k:
        raise DimensionError(
            f"spectral grid ({hb}, {wb}) not divisible by token size {k}; "
            f"pad frames to multiples of block_size*token_size first"
        )
    rows, cols = hb // k, wb // k
    f, c = first.freq_count, first.channels
    stacked = np.stack([m.data for m in maps])  # T x F x C x Hb x Wb
    t = stacked.shape[0]
    blocks = stacked.reshape(t, f, c, rows, k, cols, k)
    tokens = blocks.transpose(0, 3, 5, 1, 2, 4, 6).reshape(t, rows * cols, f, c, k, k)
    return TokenSet(np.ascontiguousarray(tokens), (rows, cols), first.block_size)


def detokenize(tokens: TokenSet) -> list[SpectralMap]:
    """Reassemble spectral maps from a TokenSet; exact inverse of tokenize."""
    t, n, f, c, k, _ = tokens.data.shape
    rows, cols = tokens.grid
    blocks = tokens.data.reshape(t, rows, cols, f, c, k, k)
    data = blocks.transpose(0, 3, 4, 1, 5, 2, 6).reshape(t, f, c, rows * k, cols * k)
    return [SpectralMap(np.ascontiguousarray(data[i]), tokens.block_size) for i in range(t)]


@dataclass(frozen=True)
class QKVBundle:
    """Token sets feeding one attention step.

    query holds the target frame's tokens (always exactly one frame).
    key and value come from the learned-free upsampler view of the same
    frame and always match each other in shape. temporal carries reference
    tokens from other time steps (warped hidden state or past frames) and
    is None when no temporal source exists yet.
    """

    query: TokenSet
    key: TokenSet
    value: TokenSet
    temporal: TokenSet | None = None

    def __post_init__(self):
        if self.query.frames != 1:
            raise IntegrityError(f"query must hold one frame, got {self.query.frames}")
        if self.key.data.shape != self.value.data.shape:
            raise IntegrityError("key and value token sets must share a shape")
        if self.key.data.shape[1:] != self.query.data.shape[1:]:
            raise IntegrityError("key tokens must match query token geometry")
        if self.temporal is not None and (
            self.temporal.data.shape[1:] != self.query.data.shape[1:]
        ):
            raise IntegrityError("temporal tokens must match query token geometry")


def build_qkv(
    target_lr: np.ndarray,
    weights,
    refs: Sequence[SpectralMap] | None = None,
    *,
    scale: int = 4,
    block_size: int | None = None,
    token_size: int = DEFAULT_TOKEN_SIZE,
) -> QKVBundle:
    """Produce attention inputs for one low-resolution frame.

    Queries tokenize the plain bicubic upsample of loaded frame; keys and
    values tokenize the toy upsampler output (bicubic plus a seeded residual
    convolution, see weights.toy_upsample). refs, when given, are tokenized
    as the temporal key/value set.
    """
    from .weights import toy_upsample
    from .numerics import bicubic_resize

    b = weights.block_size if block_size is None else int(block_size)
    frame = np.asarray(target_lr)
    if frame.ndim != 3:
        raise DimensionError(f"target frame must be C x H x W, got {frame.shape}")
    up = bicubic_resize(frame, float(scale))
    refined = toy_upsample(frame, weights, scale, upsampled=up)
    query = tokenize([frame_to_spectral(up, b)], token_size)
    kv = tokenize([frame_to_spectral(refined, b)], token_size)
    temporal = None
    if refs is not None and len(refs) > 0:
        temporal = tokenize(list(refs), token_size)
    return QKVBundle(query=query, key=kv, value=kv, temporal=temporal)
