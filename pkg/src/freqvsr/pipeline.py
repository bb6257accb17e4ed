"""Recurrent super-resolution over spectral maps.

Per frame the step builds query tokens from a plain bicubic upsample and
key/value tokens from the toy upsampler, routes them through the selected
attention scheme with the flow-warped hidden state as temporal source,
and reconstructs

    sr     = rDCT(fuse(P, D) + D)      (halved in residual-normalize mode)
    hidden = fuse(D, P)

where P is the attention output map and D the key/value spectral map.
The hidden state starts empty, which makes the first frame's temporal
stage a pass-through. Frames are edge-padded so the upscaled frame tiles
exactly into blocks and tokens, and the output is cropped back to scale
times the input extents.

Flow fields are per-pixel (dx, dy) displacements in upscaled-frame pixel
units; they are resized to the hidden grid and their values scaled by
1/block_size before warping. No flow means the hidden state is used as
is, which matches zero flow exactly.

Tiling splits the input frame into a g x g grid; every tile runs its own
independent recurrence, so tiles can be processed by a thread pool
without changing any result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attention import SCHEMES, apply_scheme, fuse
from .dct import SpectralMap, frame_to_spectral, pad_edge, spectral_to_frame
from .errors import DimensionError, ParameterError
from .numerics import bicubic_resize, bilinear_sample, ensure_finite
from .tokenizer import detokenize, tokenize
from .weights import ModelWeights, toy_upsample


@dataclass(frozen=True)
class PipelineConfig:
    """Static knobs of the recurrence.

    history controls how many past hidden maps feed the temporal stage:
    1 replaces the hidden state each frame, larger values keep a sliding
    window of maps that are warped and tokenized together.
    """

    scale: int = 4
    block_size: int = 8
    token_size: int = 8
    scheme: str = "ST"
    residual_normalize: bool = True
    history: int = 1
    d_k: float | None = None
    use_ffn: bool = True

    def __post_init__(self):
        if int(self.scale) != self.scale or self.scale < 1:
            raise ParameterError(f"scale must be a positive integer, got {self.scale}")
        if self.block_size < 1 or self.token_size < 1:
            raise ParameterError(
                f"block/token sizes must be >= 1, got {self.block_size}, {self.token_size}"
            )
        if self.scheme not in SCHEMES:
            raise ParameterError(
                f"unknown attention scheme {self.scheme!r}, expected one of {SCHEMES}"
            )
        if self.history < 1:
            raise ParameterError(f"history must be >= 1, got {self.history}")

    @property
    def pad_divisor(self) -> int:
        """Smallest input-frame divisor that makes the upscaled frame tile
        exactly into block_size*token_size pixels."""
        bk = self.block_size * self.token_size
        return bk // math.gcd(int(self.scale), bk)


@dataclass(frozen=True)
class HiddenState:
    """Sliding window of past spectral-domain feature maps, newest last."""

    maps: tuple[SpectralMap, ...] = ()

    def push(self, new_map: SpectralMap, depth: int) -> "HiddenState":
        kept = (self.maps + (new_map,))[-depth:]
        return HiddenState(kept)

    @property
    def empty(self) -> bool:
        return len(self.maps) == 0


def flow_warp(hidden: SpectralMap, flow: np.ndarray) -> SpectralMap:
    """Warp a spectral map by a per-cell displacement field.

    flow is (2, Hb, Wb) on the map's own grid, flow[0] = dx, flow[1] = dy;
    the warped value at p is the bilinear sample at p + flow[p], zero where
    that lands outside the grid.
    """
    flow = np.asarray(flow)
    f, c, hb, wb = hidden.data.shape
    if flow.shape != (2, hb, wb):
        raise DimensionError(
            f"flow shape {flow.shape} does not match hidden grid (2, {hb}, {wb})"
        )
    ensure_finite(flow, "flow field")
    ys, xs = np.meshgrid(
        np.arange(hb, dtype=hidden.data.dtype),
        np.arange(wb, dtype=hidden.data.dtype),
        indexing="ij",
    )
    coords = np.stack([xs + flow[0].astype(ys.dtype), ys + flow[1].astype(ys.dtype)])
    warped = bilinear_sample(hidden.data.reshape(f * c, hb, wb), coords)
    return SpectralMap(warped.reshape(f, c, hb, wb), hidden.block_size)


def downscale_flow(flow: np.ndarray, block_size: int) -> np.ndarray:
    """Resize an upscaled-frame-resolution flow to the hidden grid.

    Both the sampling grid and the displacement values shrink by the block
    size, so a motion of one block becomes one hidden-grid cell.
    """
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise DimensionError(f"flow must be 2 x H x W, got {flow.shape}")
    if flow.shape[1] % block_size or flow.shape[2] % block_size:
        raise DimensionError(
            f"flow dims {flow.shape[1:]} not divisible by block size {block_size}"
        )
    small = bicubic_resize(flow, 1.0 / block_size)
    return small * small.dtype.type(1.0 / block_size)


def _check_weights(weights: ModelWeights, config: PipelineConfig, channels: int) -> None:
    if weights.block_size != config.block_size or weights.token_size != config.token_size:
        raise ParameterError(
            f"weights geometry (B={weights.block_size}, K={weights.token_size}) does not "
            f"match config (B={config.block_size}, K={config.token_size})"
        )
    if weights.channels != channels:
        raise ParameterError(
            f"weights expect {weights.channels} channels, frame has {channels}"
        )


def _pad_flow(flow: np.ndarray, scale: int, crop, padded) -> np.ndarray:
    """Edge-extend an upscaled-space flow to the padded upscaled extents."""
    flow = np.asarray(flow)
    want = (2, scale * crop[0], scale * crop[1])
    if flow.shape != want:
        raise DimensionError(f"flow shape {flow.shape} does not match frame, expected {want}")
    ph = scale * padded[0] - want[1]
    pw = scale * padded[1] - want[2]
    if ph == 0 and pw == 0:
        return flow
    return np.pad(flow, ((0, 0), (0, ph), (0, pw)), mode="edge")


def step(
    lr_frame: np.ndarray,
    hidden: HiddenState | None,
    weights: ModelWeights,
    config: PipelineConfig,
    flow: np.ndarray | None = None,
) -> tuple[np.ndarray, HiddenState]:
    """One recurrence step: C x H x W in, (C x sH x sW, next hidden) out.

    flow, when given, is (2, scale*H, scale*W) in upscaled-frame pixel
    units and aligns the previous hidden state to this frame.
    """
    frame = np.asarray(lr_frame)
    if frame.ndim != 3:
        raise DimensionError(f"frame must be C x H x W, got shape {frame.shape}")
    _check_weights(weights, config, frame.shape[0])
    if hidden is None:
        hidden = HiddenState()
    scale = int(config.scale)
    b, k = config.block_size, config.token_size

    padded, record = pad_edge(frame, config.pad_divisor)
    up = bicubic_resize(padded, float(scale))
    refined = toy_upsample(padded, weights, scale, upsampled=up)
    map_q = frame_to_spectral(up, b)
    map_kv = frame_to_spectral(refined, b)
    q_tokens = tokenize([map_q], k)
    kv_tokens = tokenize([map_kv], k)

    temporal = None
    if not hidden.empty:
        sources = hidden.maps
        if flow is not None:
            hr_flow = _pad_flow(
                flow,
                scale,
                (record.height, record.width),
                (record.padded_height, record.padded_width),
            )
            cell_flow = downscale_flow(hr_flow, b)
            sources = tuple(flow_warp(m, cell_flow) for m in sources)
        temporal = tokenize(list(sources), k)

    out_tokens = apply_scheme(
        config.scheme,
        q_tokens,
        kv_tokens,
        temporal,
        weights=weights,
        d_k=config.d_k,
        use_ffn=config.use_ffn,
    )
    p_map = detokenize(out_tokens)[0]

    sr_spectral = SpectralMap(fuse(p_map, map_kv, weights.fusion).data + map_kv.data, b)
    sr = spectral_to_frame(sr_spectral)
    if config.residual_normalize:
        sr = sr * sr.dtype.type(0.5)
    sr = sr[:, : scale * record.height, : scale * record.width]
    ensure_finite(sr, "sr frame")

    hidden_map = fuse(map_kv, p_map, weights.fusion)
    return sr, hidden.push(hidden_map, config.history)


def _tile_spans(extent: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous (start, stop) spans of an axis cut into near-equal parts."""
    edges = np.linspace(0, extent, parts + 1).round().astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(parts)]


def _check_sequence(frames) -> list[np.ndarray]:
    frames = [np.asarray(f) for f in frames]
    if len(frames) == 0:
        raise ParameterError("sequence must contain at least one frame")
    first = frames[0].shape
    for i, f in enumerate(frames):
        if f.ndim != 3:
            raise DimensionError(f"frame {i} must be C x H x W, got shape {f.shape}")
        if f.shape != first:
            raise DimensionError(
                f"frame {i} shape {f.shape} differs from frame 0 shape {first}"
            )
    return frames


def _run_directional(frames, weights, config, flows, tiles, threads):
    scale = int(config.scale)
    _, h, w = frames[0].shape
    if tiles == 1:
        state: HiddenState | None = None
        out = []
        for t, frame in enumerate(frames):
            flow = None if flows is None or t == 0 else flows[t]
            sr, state = step(frame, state, weights, config, flow)
            out.append(sr)
        return out

    rows = _tile_spans(h, tiles)
    cols = _tile_spans(w, tiles)
    min_side = config.block_size * config.token_size
    for y0, y1 in rows:
        for x0, x1 in cols:
            if y1 - y0 < min_side or x1 - x0 < min_side:
                raise ParameterError(
                    f"tile {(y1 - y0, x1 - x0)} smaller than block*token "
                    f"({min_side}) pixels; lower the tile count"
                )
    spans = [(y0, y1, x0, x1) for y0, y1 in rows for x0, x1 in cols]
    states: list[HiddenState | None] = [None] * len(spans)
    out = []
    for t, frame in enumerate(frames):
        flow = None if flows is None or t == 0 else flows[t]

        def run_tile(j, frame=frame, flow=flow):
            y0, y1, x0, x1 = spans[j]
            tile_flow = None
            if flow is not None:
                tile_flow = np.ascontiguousarray(
                    flow[:, scale * y0 : scale * y1, scale * x0 : scale * x1]
                )
            return step(frame[:, y0:y1, x0:x1], states[j], weights, config, tile_flow)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run_tile, range(len(spans))))
        else:
            results = [run_tile(j) for j in range(len(spans))]

        canvas = np.empty((frame.shape[0], scale * h, scale * w), dtype=results[0][0].dtype)
        for j, (sr_tile, new_state) in enumerate(results):
            y0, y1, x0, x1 = spans[j]
            canvas[:, scale * y0 : scale * y1, scale * x0 : scale * x1] = sr_tile
            states[j] = new_state
        out.append(canvas)
    return out


def run_sequence(
    frames,
    weights: ModelWeights,
    config: PipelineConfig | None = None,
    flows=None,
    *,
    bidirectional: bool = False,
    tiles: int = 1,
    threads: int = 1,
) -> list[np.ndarray]:
    """Upscale an ordered frame sequence.

    flows, when given, must hold one entry per frame (entry 0 is never
    used; individual entries may be None for zero motion). bidirectional
    runs an independent pass over the reversed sequence with negated
    flows and averages the two outputs per frame.
    """
    config = PipelineConfig() if config is None else config
    frames = _check_sequence(frames)
    if int(tiles) != tiles or tiles < 1:
        raise ParameterError(f"tiles must be a positive integer, got {tiles}")
    if int(threads) != threads or threads < 1:
        raise ParameterError(f"threads must be a positive integer, got {threads}")
    if flows is not None and len(flows) != len(frames):
        raise ParameterError(
            f"flows must match the sequence length ({len(frames)}), got {len(flows)}"
        )
    forward = _run_directional(frames, weights, config, flows, tiles, threads)
    if not bidirectional:
        return forward
    rev_flows = None
    if flows is not None:
        # entry t aligns state from frame t-1; in the reversed pass the step
        # into reversed position j crosses the original t+1 -> t boundary,
        # approximated by the negated forward flow of that boundary
        tail = [None if f is None else -np.asarray(f) for f in flows[1:]]
        rev_flows = [None] + tail[::-1]
    backward = _run_directional(frames[::-1], weights, config, rev_flows, tiles, threads)
    out = []
    for fwd, bwd in zip(forward, backward[::-1]):
        avg = (fwd + bwd) * fwd.dtype.type(0.5)
        out.append(avg)
    return out


def tiled_inference(
    frame: np.ndarray,
    weights: ModelWeights,
    config: PipelineConfig | None = None,
    tiles: int = 4,
    threads: int = 1,
) -> np.ndarray:
    """Single-frame upscaling on a tiles x tiles grid of independent crops."""
    config = PipelineConfig() if config is None else config
    return run_sequence([frame], weights, config, tiles=tiles, threads=threads)[0]
