"""Attention over frequency tokens.

Every token is a flattened C*K*K vector. All schemes share one primitive,

    out = sum_j softmax_j(q . k_j / sqrt(d_k)) v_j

and differ only in which tokens a query may attend to:

    S     per-frame: each query sees every (block, frequency) token of the
          spatial key/value set.
    T     per-block: each query sees tokens of the same block across all
          temporal sources and frequencies.
    TxS   joint: each query sees every temporal token of every block.
    ST    S first, then T on its output (the divided form).
    TS    the divided form with stages swapped.
    Base  plain spatial attention with no mixing across frequencies: a
          query at frequency f only sees same-f tokens. With F = 1 this
          coincides with S.

Schemes with a temporal stage skip that stage and pass its input through
unchanged when no temporal source exists yet (the hidden state starts out
empty); attending over nothing would only inject a spurious zero.

A feed-forward layer (x + W2 relu(W1 x), no bias) follows each attention
stage when weights are supplied. Projections are identity unless the weight
bundle carries seeded Q/K/V matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dct import SpectralMap
from .errors import DegenerateInputError, DimensionError, IntegrityError, ParameterError
from .numerics import softmax
from .tokenizer import TokenSet
from .weights import ModelWeights

SCHEMES = ("S", "T", "TxS", "TS", "ST", "Base")


@dataclass(frozen=True)
class AttentionConfig:
    """Scheme selection plus optional overrides for the attention stages."""

    scheme: str = "ST"
    d_k: float | None = None
    use_ffn: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown attention scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.d_k is not None and not self.d_k > 0:
            raise ParameterError(f"d_k must be positive, got {self.d_k}")


def _project(vectors: np.ndarray, matrix: np.ndarray | None) -> np.ndarray:
    if matrix is None:
        return vectors
    return vectors @ matrix.astype(vectors.dtype).T


def _resolve_dk(length: int, d_k: float | None) -> float:
    if d_k is None:
        return float(length)
    if not d_k > 0:
        raise ParameterError(f"d_k must be positive, got {d_k}")
    return float(d_k)


def freq_attention(
    query: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    *,
    d_k: float | None = None,
    weights: ModelWeights | None = None,
) -> np.ndarray:
    """Scaled dot-product attention for one query vector.

    query is (L,), keys and values are (M, L). Returns the convex
    combination of value vectors weighted by softmax(q . k / sqrt(d_k)).
    """
    query = np.asarray(query)
    keys = np.asarray(keys)
    values = np.asarray(values)
    if query.ndim != 1:
        raise DimensionError(f"query must be a vector, got shape {query.shape}")
    if keys.ndim != 2 or values.ndim != 2:
        raise DimensionError("keys and values must be M x L arrays")
    if keys.shape[0] == 0:
        raise DegenerateInputError("attention needs at least one key")
    if keys.shape != values.shape or keys.shape[1] != query.shape[0]:
        raise DimensionError(
            f"shape mismatch: query {query.shape}, keys {keys.shape}, values {values.shape}"
        )
    out = _attend(query[None, :], keys, values, d_k=d_k, weights=weights)
    return out[0]


def _attend(
    queries: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    *,
    d_k: float | None,
    weights: ModelWeights | None,
) -> np.ndarray:
    """Batched core: queries (.., L) x keys/values (M, L) -> (.., L)."""
    q = _project(queries, None if weights is None else weights.proj_query)
    k = _project(keys, None if weights is None else weights.proj_key)
    v = _project(values, None if weights is None else weights.proj_value)
    scale = 1.0 / np.sqrt(_resolve_dk(queries.shape[-1], d_k))
    logits = (q @ k.T) * q.dtype.type(scale)
    return softmax(logits) @ v


def _require_single_frame(tokens: TokenSet, role: str) -> None:
    if tokens.frames != 1:
        raise IntegrityError(f"{role} token set must hold exactly one frame, got {tokens.frames}")


def _check_geometry(a: TokenSet, b: TokenSet, role: str) -> None:
    if a.data.shape[1:] != b.data.shape[1:]:
        raise DimensionError(
            f"{role} token geometry {b.data.shape[1:]} does not match query {a.data.shape[1:]}"
        )
    if a.grid != b.grid:
        raise DimensionError(f"{role} block grid {b.grid} does not match query grid {a.grid}")


def _rewrap(tokens: TokenSet, vectors: np.ndarray) -> TokenSet:
    t, n, f, c, k, _ = tokens.data.shape
    return TokenSet(
        np.ascontiguousarray(vectors.reshape(t, n, f, c, k, k)), tokens.grid, tokens.block_size
    )


def space_freq_attention(
    query: TokenSet,
    kv: TokenSet,
    *,
    weights: ModelWeights | None = None,
    d_k: float | None = None,
) -> TokenSet:
    """Per-frame attention: every query token attends over all kv tokens.

    kv supplies both keys and values (they are the same token set; seeded
    projections are what tell them apart when present).
    """
    _require_single_frame(query, "query")
    if kv.frames != 1:
        raise IntegrityError(f"spatial kv must hold exactly one frame, got {kv.frames}")
    _check_geometry(query, kv, "kv")
    qv = query.vectors()[0]  # N x F x L
    kvv = kv.vectors()[0]
    n, f, length = qv.shape
    flat_q = qv.reshape(n * f, length)
    flat_kv = kvv.reshape(n * f, length)
    out = _attend(flat_q, flat_kv, flat_kv, d_k=d_k, weights=weights)
    return _rewrap(query, out)


def band_attention(
    query: TokenSet,
    kv: TokenSet,
    *,
    weights: ModelWeights | None = None,
    d_k: float | None = None,
) -> TokenSet:
    """Spatial attention restricted to a query's own frequency band.

    The traditional-attention baseline: no mixing across frequencies.
    """
    _require_single_frame(query, "query")
    if kv.frames != 1:
        raise IntegrityError(f"spatial kv must hold exactly one frame, got {kv.frames}")
    _check_geometry(query, kv, "kv")
    qv = query.vectors()[0]  # N x F x L
    kvv = kv.vectors()[0]
    w = weights
    q = _project(qv, None if w is None else w.proj_query)
    k = _project(kvv, None if w is None else w.proj_key)
    v = _project(kvv, None if w is None else w.proj_value)
    scale = 1.0 / np.sqrt(_resolve_dk(qv.shape[-1], d_k))
    logits = np.einsum("nfl,mfl->fnm", q, k) * qv.dtype.type(scale)
    mix = softmax(logits)  # per frequency: queries n over keys m
    out = np.einsum("fnm,mfl->nfl", mix, v)
    return _rewrap(query, out)


def time_freq_attention(
    query: TokenSet,
    temporal: TokenSet,
    *,
    weights: ModelWeights | None = None,
    d_k: float | None = None,
) -> TokenSet:
    """Per-block attention across temporal sources and frequencies.

    The query token at block i attends over every (source, frequency) token
    at the same block i of the temporal set.
    """
    _require_single_frame(query, "query")
    if temporal.frames == 0:
        raise DegenerateInputError("temporal attention needs at least one source frame")
    _check_geometry(query, temporal, "temporal")
    qv = query.vectors()[0]  # N x F x L
    tv = temporal.vectors()  # T x N x F x L
    t, n, f, length = tv.shape
    per_block = tv.transpose(1, 0, 2, 3).reshape(n, t * f, length)
    w = weights
    q = _project(qv, None if w is None else w.proj_query)
    k = _project(per_block, None if w is None else w.proj_key)
    v = _project(per_block, None if w is None else w.proj_value)
    scale = 1.0 / np.sqrt(_resolve_dk(length, d_k))
    logits = np.einsum("nfl,nml->nfm", q, k) * qv.dtype.type(scale)
    mix = softmax(logits)
    out = np.einsum("nfm,nml->nfl", mix, v)
    return _rewrap(query, out)


def joint_space_time_attention(
    query: TokenSet,
    temporal: TokenSet,
    *,
    weights: ModelWeights | None = None,
    d_k: float | None = None,
) -> TokenSet:
    """Joint attention: every query token attends over every temporal token."""
    _require_single_frame(query, "query")
    if temporal.frames == 0:
        raise DegenerateInputError("joint attention needs at least one temporal frame")
    _check_geometry(query, temporal, "temporal")
    qv = query.vectors()[0]
    tv = temporal.vectors()
    t, n, f, length = tv.shape
    flat_q = qv.reshape(-1, length)
    flat_kv = tv.reshape(t * n * f, length)
    out = _attend(flat_q, flat_kv, flat_kv, d_k=d_k, weights=weights)
    return _rewrap(query, out)


def ffn(x: np.ndarray, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Feed-forward residual block on the last axis: x + W2 relu(W1 x)."""
    x = np.asarray(x)
    w1 = np.asarray(w1, dtype=x.dtype)
    w2 = np.asarray(w2, dtype=x.dtype)
    if w1.ndim != 2 or w2.ndim != 2 or w1.shape[1] != x.shape[-1] or w2.shape[0] != x.shape[-1]:
        raise DimensionError(
            f"ffn weights {w1.shape}, {w2.shape} incompatible with input {x.shape}"
        )
    if w2.shape[1] != w1.shape[0]:
        raise DimensionError(f"ffn hidden dims disagree: {w1.shape} vs {w2.shape}")
    hidden = np.maximum(x @ w1.T, 0.0)
    return x + hidden @ w2.T


def ffn_tokens(tokens: TokenSet, weights: ModelWeights | None) -> TokenSet:
    """Apply the feed-forward block to every token vector."""
    if weights is None:
        return tokens
    t, n, f = tokens.data.shape[:3]
    vectors = tokens.vectors()
    return _rewrap(tokens, ffn(vectors, weights.ffn_w1, weights.ffn_w2))


def fuse(attn_out: SpectralMap, d_lr: SpectralMap, fusion: np.ndarray) -> SpectralMap:
    """Per-position channel concatenation followed by a linear reduction.

    Both maps are F x C x Hb x Wb; at every grid position their F*C feature
    vectors are concatenated (attn_out first) and reduced back to F*C with
    the fusion matrix (d x 2d).
    """
    if attn_out.data.shape != d_lr.data.shape or attn_out.block_size != d_lr.block_size:
        raise IntegrityError("fuse needs two spectral maps of identical geometry")
    f, c, hb, wb = attn_out.data.shape
    d = f * c
    fusion = np.asarray(fusion)
    if fusion.shape != (d, 2 * d):
        raise DimensionError(f"fusion matrix must be ({d}, {2 * d}), got {fusion.shape}")
    left = attn_out.data.reshape(d, hb * wb)
    right = d_lr.data.reshape(d, hb * wb)
    stacked = np.concatenate([left, right], axis=0)
    reduced = fusion.astype(stacked.dtype) @ stacked
    return SpectralMap(reduced.reshape(f, c, hb, wb), attn_out.block_size)


def apply_scheme(
    scheme: str,
    query: TokenSet,
    spatial_kv: TokenSet,
    temporal: TokenSet | None,
    *,
    weights: ModelWeights | None = None,
    d_k: float | None = None,
    use_ffn: bool = True,
) -> TokenSet:
    """Route one frame's tokens through the selected attention composition.

    temporal is the tokenized warped hidden state (schemes T, ST, TS) or
    the accumulated past key/value tokens (TxS); None means no source yet,
    which makes purely temporal stages pass their input through.
    """
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown attention scheme {scheme!r}, expected one of {SCHEMES}")
    w = weights if use_ffn else None

    def stage_ffn(tokens: TokenSet) -> TokenSet:
        return ffn_tokens(tokens, w)

    if scheme == "S":
        return stage_ffn(space_freq_attention(query, spatial_kv, weights=weights, d_k=d_k))
    if scheme == "Base":
        return stage_ffn(band_attention(query, spatial_kv, weights=weights, d_k=d_k))
    if scheme == "T":
        if temporal is None:
            return query
        return stage_ffn(time_freq_attention(query, temporal, weights=weights, d_k=d_k))
    if scheme == "TxS":
        if temporal is None:
            return query
        return stage_ffn(joint_space_time_attention(query, temporal, weights=weights, d_k=d_k))
    return divided_attention(
        query, spatial_kv, temporal, scheme, weights=weights, d_k=d_k, use_ffn=use_ffn
    )


def divided_attention(
    query: TokenSet,
    spatial_kv: TokenSet,
    temporal: TokenSet | None,
    order: str = "ST",
    *,
    weights: ModelWeights | None = None,
    d_k: float | None = None,
    use_ffn: bool = True,
) -> TokenSet:
    """Two-stage attention, spatial and temporal in the requested order.

    The second stage takes the first stage's output as its query; each
    stage keeps its own key/value source. A missing temporal source makes
    the temporal stage an identity.
    """
    if order not in ("ST", "TS"):
        raise ParameterError(f"divided attention order must be 'ST' or 'TS', got {order!r}")
    w = weights if use_ffn else None

    def stage_ffn(tokens: TokenSet) -> TokenSet:
        return ffn_tokens(tokens, w)

    if order == "ST":
        r = stage_ffn(space_freq_attention(query, spatial_kv, weights=weights, d_k=d_k))
        if temporal is None:
            return r
        return stage_ffn(time_freq_attention(r, temporal, weights=weights, d_k=d_k))
    if temporal is None:
        r = query
    else:
        r = stage_ffn(time_freq_attention(query, temporal, weights=weights, d_k=d_k))
    return stage_ffn(space_freq_attention(r, spatial_kv, weights=weights, d_k=d_k))


def freq_attention_probe(
    query: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    probe: np.ndarray,
    *,
    d_k: float | None = None,
    weights: ModelWeights | None = None,
) -> tuple[float, np.ndarray]:
    """Scalarised attention with its analytic query gradient.

    Returns (probe . attention(query), d/dquery of that scalar). Used by
    the gradient-check harness; supports the seeded projection mode.
    """
    query = np.asarray(query)
    keys = np.asarray(keys)
    values = np.asarray(values)
    probe = np.asarray(probe)
    if keys.shape[0] == 0:
        raise DegenerateInputError("attention needs at least one key")
    wq = None if weights is None else weights.proj_query
    wk = None if weights is None else weights.proj_key
    wv = None if weights is None else weights.proj_value
    q = _project(query, wq)
    k = _project(keys, wk)
    v = _project(values, wv)
    scale = 1.0 / np.sqrt(_resolve_dk(query.shape[-1], d_k))
    mix = softmax((k @ q) * scale)
    contrib = v @ probe  # per-key scalar
    value = float(mix @ contrib)
    grad_projected = ((mix * (contrib - value)) @ k) * scale
    if wq is not None:
        grad = wq.astype(query.dtype).T @ grad_projected
    else:
        grad = grad_projected
    return value, grad


def ffn_probe(
    x: np.ndarray, w1: np.ndarray, w2: np.ndarray, probe: np.ndarray
) -> tuple[float, np.ndarray]:
    """Scalarised feed-forward block with its analytic input gradient."""
    x = np.asarray(x)
    pre = x @ np.asarray(w1, dtype=x.dtype).T
    hidden = np.maximum(pre, 0.0)
    out = x + hidden @ np.asarray(w2, dtype=x.dtype).T
    value = float(out @ probe)
    gate = (pre > 0.0).astype(x.dtype)
    grad = probe + w1.T @ (gate * (w2.T @ probe))
    return value, grad


def fuse_probe(
    attn_out: SpectralMap, d_lr: SpectralMap, fusion: np.ndarray, probe: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Scalarised fuse with analytic gradients for both input maps."""
    fused = fuse(attn_out, d_lr, fusion)
    probe = np.asarray(probe)
    if probe.shape != fused.data.shape:
        raise DimensionError(f"probe shape {probe.shape} must match map shape {fused.data.shape}")
    value = float(np.sum(fused.data * probe))
    f, c, hb, wb = fused.data.shape
    d = f * c
    flat_probe = probe.reshape(d, hb * wb)
    back = np.asarray(fusion, dtype=flat_probe.dtype).T @ flat_probe  # (2d, P)
    grad_attn = back[:d].reshape(f, c, hb, wb)
    grad_dlr = back[d:].reshape(f, c, hb, wb)
    return value, grad_attn, grad_dlr
