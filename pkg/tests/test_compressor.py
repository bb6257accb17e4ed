import numpy as np
import pytest

from freqvsr.compressor import (
    PRESETS,
    DegradeConfig,
    degrade_sequence,
    quantization_steps,
    quantize_compress,
)
from freqvsr.dct import frame_to_spectral
from freqvsr.errors import DimensionError, ParameterError
from freqvsr.metrics import amplitude_spectrum, psnr


def _texture(seed, c=3, h=64, w=64):
    """Noise with a decaying spectrum plus structure, like camera content."""
    local = np.random.default_rng(seed)
    base = local.uniform(0.0, 1.0, size=(c, h, w))
    smooth = base.copy()
    for _ in range(2):
        smooth = 0.25 * (
            np.roll(smooth, 1, axis=1)
            + np.roll(smooth, -1, axis=1)
            + np.roll(smooth, 1, axis=2)
            + np.roll(smooth, -1, axis=2)
        )
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    waves = 0.5 + 0.5 * np.sin(xs / 3.0) * np.cos(ys / 5.0)
    out = 0.55 * smooth + 0.25 * waves + 0.2 * base
    return np.clip(out, 0.0, 1.0)


class TestQuantizationSteps:
    def test_growth_pattern(self):
        steps = quantization_steps(0.1, 4)
        grid = steps.reshape(4, 4)
        assert np.allclose(grid[0, 0], 0.1)
        assert np.allclose(grid[3, 3], 0.7)
        for u in range(4):
            for v in range(4):
                assert np.isclose(grid[u, v], 0.1 * (1 + u + v))


class TestQuantizeCompress:
    def test_zero_strength_is_roundtrip(self, rng):
        frame = rng.uniform(size=(3, 32, 32)).astype(np.float32)
        out = quantize_compress(frame, 0.0)
        assert out.shape == frame.shape
        assert np.max(np.abs(out - frame)) < 1e-5

    def test_constant_frame_survives(self):
        q = PRESETS["crf35-like"]
        frame = np.full((3, 16, 16), 0.52)
        out = quantize_compress(frame, q)
        assert np.max(np.abs(out - frame)) <= q / 2.0 + 1e-9

    def test_psnr_monotone_in_strength(self):
        for seed in range(5):
            frame = _texture(seed)
            scores = [
                psnr(frame, quantize_compress(frame, PRESETS[name]))
                for name in ("crf15-like", "crf25-like", "crf35-like")
            ]
            assert scores[0] > scores[1] > scores[2], (seed, scores)

    def test_per_coefficient_shrinkage_bound(self, rng):
        frame = rng.uniform(size=(3, 32, 32))
        q = PRESETS["crf25-like"]
        out = quantize_compress(frame, q)
        before = frame_to_spectral(frame, 8).data
        after = frame_to_spectral(out, 8).data
        steps = quantization_steps(q, 8).reshape(-1, 1, 1, 1)
        assert np.all(np.abs(after) <= np.abs(before) + steps / 2.0 + 1e-9)

    def test_high_band_amplitudes_never_grow(self):
        q = PRESETS["crf35-like"]
        for seed in range(3):
            frame = _texture(seed)
            _, original = amplitude_spectrum(frame, 8)
            _, squeezed = amplitude_spectrum(quantize_compress(frame, q), 8)
            assert np.all(squeezed[1:] <= original[1:] + 1e-6)

    def test_pads_indivisible_frames(self, rng):
        frame = rng.uniform(size=(3, 30, 29)).astype(np.float32)
        out = quantize_compress(frame, PRESETS["crf25-like"])
        assert out.shape == frame.shape

    def test_determinism(self, rng):
        frame = rng.uniform(size=(3, 16, 16)).astype(np.float32)
        a = quantize_compress(frame, 0.05)
        b = quantize_compress(frame, 0.05)
        assert np.array_equal(a, b)

    def test_validation(self):
        with pytest.raises(ParameterError):
            quantize_compress(np.zeros((3, 8, 8)), -0.1)
        with pytest.raises(DimensionError):
            quantize_compress(np.zeros((8, 8)), 0.1)


class TestDegradeSequence:
    def test_shape_contract(self, rng):
        frames = [rng.uniform(size=(3, 256, 256)) for _ in range(2)]
        out = degrade_sequence(frames, DegradeConfig(scale=4))
        assert all(f.shape == (3, 64, 64) for f in out)

    def test_identity_config(self, rng):
        frames = [rng.uniform(size=(3, 16, 16)).astype(np.float32)]
        out = degrade_sequence(frames, DegradeConfig(scale=1, q=0.0))
        assert np.max(np.abs(out[0] - frames[0])) < 1e-5

    def test_high_band_energy_drops_with_strength(self):
        frame = _texture(0, h=128, w=128)
        block = 8
        means = []
        for q in (0.0, PRESETS["crf15-like"], PRESETS["crf25-like"], PRESETS["crf35-like"]):
            lr = degrade_sequence([frame], DegradeConfig(scale=4, q=q))[0]
            _, values = amplitude_spectrum(lr, block, (block + 1, 2 * block - 2))
            means.append(float(values.mean()))
        assert means[0] > means[1] > means[2] > means[3], means

    def test_indivisible_dims_rejected(self, rng):
        with pytest.raises(DimensionError):
            degrade_sequence([rng.uniform(size=(3, 30, 32))], DegradeConfig(scale=4))

    def test_empty_sequence_rejected(self):
        with pytest.raises(DimensionError):
            degrade_sequence([], DegradeConfig())

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            DegradeConfig(scale=0)
        with pytest.raises(ParameterError):
            DegradeConfig(q=-1.0)
        with pytest.raises(ParameterError):
            DegradeConfig(block_size=0)
