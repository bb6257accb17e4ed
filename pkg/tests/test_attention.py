import math

import numpy as np
import pytest

from freqvsr import weights as wt
from freqvsr.attention import (
    apply_scheme,
    band_attention,
    divided_attention,
    ffn,
    ffn_probe,
    freq_attention,
    freq_attention_probe,
    fuse,
    fuse_probe,
    joint_space_time_attention,
    space_freq_attention,
    time_freq_attention,
)
from freqvsr.dct import SpectralMap
from freqvsr.errors import DegenerateInputError, DimensionError, IntegrityError, ParameterError
from freqvsr.tokenizer import TokenSet

from conftest import make_tokens

# ---------------------------------------------------------------------------
# Brute-force reference: explicit loops over (t, i, f) token indices, one
# query at a time, float64 throughout. Kept deliberately independent of the
# vectorised production code.
# ---------------------------------------------------------------------------


def _ref_single(q, pairs, dk):
    logits = [float(np.dot(q, k)) / math.sqrt(dk) for k, _ in pairs]
    top = max(logits)
    exps = [math.exp(l - top) for l in logits]
    total = sum(exps)
    out = np.zeros_like(pairs[0][1], dtype=np.float64)
    for e, (_, v) in zip(exps, pairs):
        out += (e / total) * v
    return out


def _proj(vec, mat):
    if mat is None:
        return np.asarray(vec, dtype=np.float64)
    return np.asarray(mat, dtype=np.float64) @ np.asarray(vec, dtype=np.float64)


def _ref_ffn(x, weights):
    if weights is None:
        return x
    w1 = np.asarray(weights.ffn_w1, dtype=np.float64)
    w2 = np.asarray(weights.ffn_w2, dtype=np.float64)
    hidden = np.maximum(w1 @ x, 0.0)
    return x + w2 @ hidden


def _ref_stage(kind, query_vectors, source_vectors, weights, use_ffn=True):
    """query_vectors: N x F x L; source_vectors: spatial N x F x L or temporal T x N x F x L."""
    wq = wk = wv = (None, None, None)
    if weights is not None:
        wq, wk, wv = weights.proj_query, weights.proj_key, weights.proj_value
    else:
        wq = wk = wv = None
    n, f, length = query_vectors.shape
    dk = float(length)
    out = np.zeros((n, f, length), dtype=np.float64)
    for i in range(n):
        for g in range(f):
            if kind == "S":
                pairs = [
                    (_proj(source_vectors[j, h], wk), _proj(source_vectors[j, h], wv))
                    for j in range(n)
                    for h in range(f)
                ]
            elif kind == "Base":
                pairs = [
                    (_proj(source_vectors[j, g], wk), _proj(source_vectors[j, g], wv))
                    for j in range(n)
                ]
            elif kind == "T":
                pairs = [
                    (_proj(source_vectors[t, i, h], wk), _proj(source_vectors[t, i, h], wv))
                    for t in range(source_vectors.shape[0])
                    for h in range(f)
                ]
            elif kind == "TxS":
                pairs = [
                    (_proj(source_vectors[t, j, h], wk), _proj(source_vectors[t, j, h], wv))
                    for t in range(source_vectors.shape[0])
                    for j in range(n)
                    for h in range(f)
                ]
            else:
                raise AssertionError(kind)
            out[i, g] = _ref_single(_proj(query_vectors[i, g], wq), pairs, dk)
    if use_ffn and weights is not None:
        for i in range(n):
            for g in range(f):
                out[i, g] = _ref_ffn(out[i, g], weights)
    return out


def _ref_scheme(scheme, query, spatial, temporal, weights):
    qv = query.vectors()[0].astype(np.float64)
    sv = spatial.vectors()[0].astype(np.float64)
    tv = None if temporal is None else temporal.vectors().astype(np.float64)
    if scheme == "S":
        return _ref_stage("S", qv, sv, weights)
    if scheme == "Base":
        return _ref_stage("Base", qv, sv, weights)
    if scheme == "T":
        return qv if tv is None else _ref_stage("T", qv, tv, weights)
    if scheme == "TxS":
        return qv if tv is None else _ref_stage("TxS", qv, tv, weights)
    if scheme == "ST":
        r = _ref_stage("S", qv, sv, weights)
        return r if tv is None else _ref_stage("T", r, tv, weights)
    if scheme == "TS":
        r = qv if tv is None else _ref_stage("T", qv, tv, weights)
        return _ref_stage("S", r, sv, weights)
    raise AssertionError(scheme)


def _instance(rng, with_temporal=True):
    t = int(rng.integers(1, 4))
    rows = int(rng.integers(1, 3))
    cols = int(rng.integers(1, 3))
    freqs = int(rng.integers(1, 9))
    k = int(rng.integers(1, 3))
    c = int(rng.integers(1, 3))
    query = make_tokens(rng, t=1, grid=(rows, cols), freqs=freqs, channels=c, k=k)
    spatial = make_tokens(rng, t=1, grid=(rows, cols), freqs=freqs, channels=c, k=k)
    temporal = (
        make_tokens(rng, t=t, grid=(rows, cols), freqs=freqs, channels=c, k=k)
        if with_temporal
        else None
    )
    return query, spatial, temporal


class TestFreqAttentionCore:
    def test_single_pair_copies_value(self, rng):
        q = rng.normal(size=6).astype(np.float32)
        k = rng.normal(size=(1, 6)).astype(np.float32)
        v = rng.normal(size=(1, 6)).astype(np.float32)
        assert np.allclose(freq_attention(q, k, v), v[0], atol=1e-7)

    def test_identical_keys_average_values(self, rng):
        q = rng.normal(size=4).astype(np.float32)
        k = np.tile(rng.normal(size=4).astype(np.float32), (5, 1))
        v = rng.normal(size=(5, 4)).astype(np.float32)
        assert np.allclose(freq_attention(q, k, v), v.mean(axis=0), atol=1e-6)

    def test_two_key_closed_form(self):
        # logits work out to [0, log 2], so the mix is (v1 + 2 v2) / 3
        q = np.array([2.0, 0.0])
        keys = np.array([[0.0, 1.0], [math.log(2.0), 0.0]])
        values = np.array([[1.0, 0.0], [0.0, 1.0]])
        out = freq_attention(q, keys, values, d_k=4.0)
        assert np.allclose(out, [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)

    def test_output_in_convex_hull(self, rng):
        for _ in range(10):
            q = rng.normal(size=8)
            k = rng.normal(size=(7, 8))
            v = rng.normal(size=(7, 8))
            out = freq_attention(q, k, v)
            assert np.all(out <= v.max(axis=0) + 1e-6)
            assert np.all(out >= v.min(axis=0) - 1e-6)

    def test_joint_permutation_invariance(self, rng):
        q = rng.normal(size=5)
        k = rng.normal(size=(9, 5))
        v = rng.normal(size=(9, 5))
        perm = rng.permutation(9)
        a = freq_attention(q, k, v)
        b = freq_attention(q, k[perm], v[perm])
        assert np.allclose(a, b, atol=1e-6)

    def test_default_dk_is_vector_length(self, rng):
        q = rng.normal(size=6)
        k = rng.normal(size=(4, 6))
        v = rng.normal(size=(4, 6))
        assert np.array_equal(freq_attention(q, k, v), freq_attention(q, k, v, d_k=6.0))

    def test_empty_keys_rejected(self):
        with pytest.raises(DegenerateInputError):
            freq_attention(np.zeros(3), np.zeros((0, 3)), np.zeros((0, 3)))

    def test_mismatched_dims_rejected(self):
        with pytest.raises(DimensionError):
            freq_attention(np.zeros(3), np.zeros((2, 4)), np.zeros((2, 4)))


class TestSchemesAgainstBruteForce:
    @pytest.mark.parametrize("scheme", ["S", "T", "TxS", "TS", "ST", "Base"])
    def test_minimal_mode(self, scheme):
        rng = np.random.default_rng(99)
        for _ in range(8):
            query, spatial, temporal = _instance(rng)
            got = apply_scheme(scheme, query, spatial, temporal, weights=None)
            want = _ref_scheme(scheme, query, spatial, temporal, None)
            assert np.max(np.abs(got.vectors()[0] - want)) < 1e-5

    @pytest.mark.parametrize("scheme", ["S", "T", "TxS", "TS", "ST", "Base"])
    def test_seeded_projections_and_ffn(self, scheme):
        rng = np.random.default_rng(7)
        for seed in range(4):
            rows, cols, freqs_block, c, k = 2, 1, 2, 1, 2
            query = make_tokens(rng, t=1, grid=(rows, cols), freqs=4, channels=c, k=k)
            spatial = make_tokens(rng, t=1, grid=(rows, cols), freqs=4, channels=c, k=k)
            temporal = make_tokens(rng, t=2, grid=(rows, cols), freqs=4, channels=c, k=k)
            weights = wt.seeded(c, freqs_block, k, seed=seed, projections=True)
            got = apply_scheme(scheme, query, spatial, temporal, weights=weights)
            want = _ref_scheme(scheme, query, spatial, temporal, weights)
            assert np.max(np.abs(got.vectors()[0] - want)) < 1e-5

    def test_base_equals_spatial_when_single_frequency(self, rng):
        query = make_tokens(rng, t=1, grid=(2, 2), freqs=1, channels=2, k=2)
        spatial = make_tokens(rng, t=1, grid=(2, 2), freqs=1, channels=2, k=2)
        a = band_attention(query, spatial)
        b = space_freq_attention(query, spatial)
        assert np.allclose(a.data, b.data, atol=1e-6)

    def test_temporal_single_source_single_freq_copies_value(self, rng):
        query = make_tokens(rng, t=1, grid=(2, 2), freqs=1, channels=1, k=2)
        temporal = make_tokens(rng, t=1, grid=(2, 2), freqs=1, channels=1, k=2)
        out = time_freq_attention(query, temporal)
        assert np.allclose(out.data[0], temporal.data[0], atol=1e-6)

    def test_temporal_blocks_stay_isolated(self, rng):
        # changing the temporal tokens of block 1 must not move block 0's output
        query = make_tokens(rng, t=1, grid=(1, 2), freqs=3, channels=1, k=2)
        temporal = make_tokens(rng, t=2, grid=(1, 2), freqs=3, channels=1, k=2)
        out_a = time_freq_attention(query, temporal)
        bumped = temporal.data.copy()
        bumped[:, 1] += 1.5
        out_b = time_freq_attention(query, TokenSet(bumped, temporal.grid, temporal.block_size))
        assert np.array_equal(out_a.data[0, 0], out_b.data[0, 0])
        assert not np.allclose(out_a.data[0, 1], out_b.data[0, 1])

    def test_divided_single_temporal_source_copies_spatial_output(self, rng):
        # when the temporal set equals the spatial stage output, the second
        # stage of ST sees one source whose tokens it reproduces at F = 1
        query = make_tokens(rng, t=1, grid=(2, 1), freqs=1, channels=1, k=2)
        spatial = make_tokens(rng, t=1, grid=(2, 1), freqs=1, channels=1, k=2)
        r = space_freq_attention(query, spatial)
        temporal = TokenSet(r.data.copy(), r.grid, r.block_size)
        out = divided_attention(query, spatial, temporal, "ST")
        assert np.allclose(out.data, r.data, atol=1e-6)

    def test_pass_through_without_temporal_source(self, rng):
        query = make_tokens(rng, t=1, grid=(2, 2), freqs=4, channels=1, k=2)
        spatial = make_tokens(rng, t=1, grid=(2, 2), freqs=4, channels=1, k=2)
        for scheme in ("T", "TxS"):
            out = apply_scheme(scheme, query, spatial, None)
            assert out is query
        st = apply_scheme("ST", query, spatial, None)
        want = space_freq_attention(query, spatial)
        assert np.array_equal(st.data, want.data)

    def test_unknown_scheme_rejected(self, rng):
        query = make_tokens(rng)
        with pytest.raises(ParameterError):
            apply_scheme("STX", query, query, None)
        with pytest.raises(ParameterError):
            divided_attention(query, query, None, "SS")

    def test_geometry_mismatch_rejected(self, rng):
        query = make_tokens(rng, grid=(2, 2))
        other = make_tokens(rng, grid=(2, 1))
        with pytest.raises(DimensionError):
            space_freq_attention(query, other)
        with pytest.raises(IntegrityError):
            space_freq_attention(query, make_tokens(rng, t=2, grid=(2, 2)))
        with pytest.raises(DegenerateInputError):
            time_freq_attention(
                query,
                TokenSet(np.zeros((0,) + query.data.shape[1:], dtype=np.float32), query.grid, 2),
            )


class TestFFN:
    def test_zero_weights_identity(self, rng):
        x = rng.normal(size=(3, 5)).astype(np.float32)
        w1 = np.zeros((4, 5), dtype=np.float32)
        w2 = np.zeros((5, 4), dtype=np.float32)
        assert np.array_equal(ffn(x, w1, w2), x)

    def test_zero_input_zero_output(self, rng):
        w1 = rng.normal(size=(4, 5)).astype(np.float32)
        w2 = rng.normal(size=(5, 4)).astype(np.float32)
        assert np.array_equal(ffn(np.zeros(5, dtype=np.float32), w1, w2), np.zeros(5))

    def test_manual_small_case(self):
        x = np.array([1.0, -1.0])
        w1 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        w2 = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 3.0]])
        # w1 @ x = [1, -1, 0] -> relu [1, 0, 0] -> w2 @ h = [1, 0]
        assert np.allclose(ffn(x, w1, w2), [2.0, -1.0], atol=1e-12)

    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            ffn(np.zeros(5), np.zeros((4, 6)), np.zeros((5, 4)))
        with pytest.raises(DimensionError):
            ffn(np.zeros(5), np.zeros((4, 5)), np.zeros((5, 3)))


class TestFuse:
    def _maps(self, rng, f=4, c=2, grid=(2, 3)):
        a = SpectralMap(rng.normal(size=(f, c) + grid).astype(np.float32), 2)
        b = SpectralMap(rng.normal(size=(f, c) + grid).astype(np.float32), 2)
        return a, b

    def test_left_identity_selects_first(self, rng):
        a, b = self._maps(rng)
        d = 8
        fusion = np.concatenate([np.eye(d), np.zeros((d, d))], axis=1).astype(np.float32)
        out = fuse(a, b, fusion)
        assert np.allclose(out.data, a.data, atol=1e-7)

    def test_right_identity_selects_second(self, rng):
        a, b = self._maps(rng)
        d = 8
        fusion = np.concatenate([np.zeros((d, d)), np.eye(d)], axis=1).astype(np.float32)
        out = fuse(a, b, fusion)
        assert np.allclose(out.data, b.data, atol=1e-7)

    def test_matches_per_position_loop(self, rng):
        a, b = self._maps(rng)
        d = 8
        fusion = rng.normal(size=(d, 2 * d)).astype(np.float32)
        out = fuse(a, b, fusion)
        f, c, hb, wb = a.data.shape
        for y in range(hb):
            for x in range(wb):
                va = a.data[:, :, y, x].reshape(-1).astype(np.float64)
                vb = b.data[:, :, y, x].reshape(-1).astype(np.float64)
                want = fusion.astype(np.float64) @ np.concatenate([va, vb])
                got = out.data[:, :, y, x].reshape(-1)
                assert np.max(np.abs(got - want)) < 1e-5

    def test_geometry_checks(self, rng):
        a, b = self._maps(rng)
        with pytest.raises(DimensionError):
            fuse(a, b, np.zeros((8, 15)))
        c = SpectralMap(rng.normal(size=(4, 2, 2, 2)).astype(np.float32), 2)
        with pytest.raises(IntegrityError):
            fuse(a, c, np.zeros((8, 16)))


class TestProbeGradients:
    def _fd(self, fn, x, step=1e-6):
        grad = np.zeros_like(x)
        flat = grad.reshape(-1)
        xf = x.reshape(-1)
        for i in range(xf.size):
            orig = xf[i]
            xf[i] = orig + step
            plus = fn()
            xf[i] = orig - step
            minus = fn()
            xf[i] = orig
            flat[i] = (plus - minus) / (2.0 * step)
        return grad

    def test_attention_probe_gradient(self, rng):
        q = rng.normal(size=6)
        keys = rng.normal(size=(5, 6))
        values = rng.normal(size=(5, 6))
        probe = rng.normal(size=6)
        value, grad = freq_attention_probe(q, keys, values, probe)
        fd = self._fd(lambda: freq_attention_probe(q, keys, values, probe)[0], q)
        assert np.max(np.abs(grad - fd)) < 1e-8

    def test_attention_probe_gradient_with_projections(self, rng):
        weights = wt.seeded(1, 2, 2, seed=5, projections=True).astype(np.float64)
        q = rng.normal(size=4)
        keys = rng.normal(size=(3, 4))
        values = rng.normal(size=(3, 4))
        probe = rng.normal(size=4)
        value, grad = freq_attention_probe(q, keys, values, probe, weights=weights)
        fd = self._fd(lambda: freq_attention_probe(q, keys, values, probe, weights=weights)[0], q)
        assert np.max(np.abs(grad - fd)) < 1e-8

    def test_ffn_probe_gradient(self, rng):
        x = rng.normal(size=7)
        w1 = rng.normal(size=(9, 7))
        w2 = rng.normal(size=(7, 9))
        probe = rng.normal(size=7)
        value, grad = ffn_probe(x, w1, w2, probe)
        fd = self._fd(lambda: ffn_probe(x, w1, w2, probe)[0], x)
        assert np.max(np.abs(grad - fd)) < 1e-7

    def test_fuse_probe_gradients(self, rng):
        f, c, grid = 4, 1, (2, 2)
        a = SpectralMap(rng.normal(size=(f, c) + grid), 2)
        b = SpectralMap(rng.normal(size=(f, c) + grid), 2)
        fusion = rng.normal(size=(4, 8))
        probe = rng.normal(size=(f, c) + grid)
        value, grad_a, grad_b = fuse_probe(a, b, fusion, probe)
        fd_a = self._fd(
            lambda: fuse_probe(a, b, fusion, probe)[0], a.data
        )
        fd_b = self._fd(
            lambda: fuse_probe(a, b, fusion, probe)[0], b.data
        )
        assert np.max(np.abs(grad_a - fd_a)) < 1e-8
        assert np.max(np.abs(grad_b - fd_b)) < 1e-8
