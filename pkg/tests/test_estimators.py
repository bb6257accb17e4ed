import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from freqvsr.errors import DegenerateInputError, DimensionError, NumericError, ParameterError
from freqvsr.estimators import CompressionDegrader, FrequencyTransformerSR
from freqvsr.validation import check_frame, check_video


class TestValidation:
    def test_frame_passthrough_and_cast(self, rng):
        frame = rng.uniform(size=(3, 4, 4)).astype(np.float32)
        out = check_frame(frame)
        assert out.dtype == np.float32
        assert np.array_equal(out, frame)
        as_int = (frame * 255).astype(np.uint8)
        assert check_frame(as_int).dtype == np.float32

    def test_frame_rejections(self):
        with pytest.raises(DimensionError):
            check_frame(np.zeros((4, 4)))
        with pytest.raises(DegenerateInputError):
            check_frame(np.zeros((0, 4, 4)))
        bad = np.zeros((1, 2, 2))
        bad[0, 0, 0] = np.inf
        with pytest.raises(NumericError):
            check_frame(bad)

    def test_video_accepts_stack_and_list(self, rng):
        stack = rng.uniform(size=(3, 1, 4, 4)).astype(np.float32)
        frames = check_video(stack)
        assert len(frames) == 3
        assert np.array_equal(frames[1], stack[1])
        assert len(check_video(list(stack))) == 3

    def test_video_rejections(self, rng):
        with pytest.raises(DegenerateInputError):
            check_video([])
        with pytest.raises(DimensionError):
            check_video(rng.uniform(size=(3, 4, 4)))
        with pytest.raises(DimensionError):
            check_video([np.zeros((1, 4, 4)), np.zeros((1, 4, 5))])


class TestFrequencyTransformerSR:
    def _video(self, rng, t=2, c=3, h=8, w=8):
        return rng.uniform(0.0, 1.0, size=(t, c, h, w)).astype(np.float32)

    def test_params_roundtrip_and_clone(self):
        est = FrequencyTransformerSR(scale=2, block_size=4, token_size=4, seed=9)
        params = est.get_params()
        assert params["scale"] == 2 and params["seed"] == 9
        est.set_params(seed=11)
        assert est.seed == 11
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_fit_returns_self_and_learns_channels(self, rng):
        est = FrequencyTransformerSR(scale=4, block_size=4, token_size=4)
        video = self._video(rng)
        assert est.fit(video) is est
        assert est.channels_ == 3
        assert est.weights_.block_size == 4

    def test_predict_shape_contract(self, rng):
        est = FrequencyTransformerSR(scale=4, block_size=4, token_size=4, seed=1)
        video = self._video(rng, t=3, h=8, w=8)
        out = est.fit(video).predict(video)
        assert out.shape == (3, 3, 32, 32)
        assert out.dtype == np.float32

    def test_unfitted_predict_rejected(self, rng):
        with pytest.raises(NotFittedError):
            FrequencyTransformerSR().predict(self._video(rng))

    def test_channel_mismatch_rejected(self, rng):
        est = FrequencyTransformerSR(scale=4, block_size=4, token_size=4)
        est.fit(self._video(rng, c=3))
        with pytest.raises(ParameterError):
            est.predict(self._video(rng, c=1))

    def test_same_seed_same_output(self, rng):
        video = self._video(rng)
        a = FrequencyTransformerSR(4, 4, 4, seed=5).fit(video).predict(video)
        b = FrequencyTransformerSR(4, 4, 4, seed=5).fit(video).predict(video)
        assert np.array_equal(a, b)
        c = FrequencyTransformerSR(4, 4, 4, seed=6).fit(video).predict(video)
        assert not np.array_equal(a, c)

    def test_transform_is_predict(self, rng):
        video = self._video(rng)
        est = FrequencyTransformerSR(4, 4, 4).fit(video)
        assert np.array_equal(est.transform(video), est.predict(video))

    def test_invalid_scheme_fails_at_fit(self, rng):
        est = FrequencyTransformerSR(scheme="bogus", block_size=4, token_size=4)
        with pytest.raises(ParameterError):
            est.fit(self._video(rng))


class TestCompressionDegrader:
    def test_preset_name_resolution(self, rng):
        video = rng.uniform(size=(2, 3, 32, 32)).astype(np.float32)
        out = CompressionDegrader(scale=4, q="crf35-like").fit(video).transform(video)
        assert out.shape == (2, 3, 8, 8)

    def test_numeric_strength(self, rng):
        video = rng.uniform(size=(1, 3, 16, 16)).astype(np.float32)
        out = CompressionDegrader(scale=2, q=0.0).fit(video).transform(video)
        assert out.shape == (1, 3, 8, 8)

    def test_unknown_preset_rejected(self):
        with pytest.raises(ParameterError):
            CompressionDegrader(q="crf99-like").fit(None)

    def test_unfitted_transform_rejected(self, rng):
        with pytest.raises(NotFittedError):
            CompressionDegrader().transform(rng.uniform(size=(1, 3, 8, 8)))

    def test_pipeline_composition(self, rng):
        hr = rng.uniform(0.0, 1.0, size=(2, 3, 32, 32)).astype(np.float32)
        pipe = Pipeline(
            [
                ("degrade", CompressionDegrader(scale=4, q="crf25-like")),
                ("sr", FrequencyTransformerSR(scale=4, block_size=4, token_size=4, seed=7)),
            ]
        )
        out = pipe.fit(hr).predict(hr)
        assert out.shape == hr.shape
        assert np.all(np.isfinite(out))
