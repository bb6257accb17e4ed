"""Estimator front doors over the functional core.

Both classes follow the scikit-learn contract: constructor arguments are
stored verbatim, all validation and derived state lives in fit, learned
attributes get a trailing underscore, and get_params/set_params/clone
work out of the box. That makes degradation and super-resolution
composable with standard tooling:

    pipe = Pipeline([
        ("degrade", CompressionDegrader(scale=4, q="crf25-like")),
        ("sr", FrequencyTransformerSR(scale=4, seed=7)),
    ])
    sr_frames = pipe.fit(hr_frames).predict(hr_frames)

Nothing is trained; "fitting" draws the seeded weights for the channel
count seen in X and freezes the run configuration.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import weights as weight_bank
from .compressor import PRESETS, DegradeConfig, degrade_sequence
from .errors import ParameterError
from .pipeline import PipelineConfig, run_sequence
from .validation import check_video


class FrequencyTransformerSR(TransformerMixin, BaseEstimator):
    """Video super-resolution estimator around run_sequence.

    predict (and transform) map a T x C x H x W stack, or a list of
    C x H x W frames, to the upscaled T x C x scale*H x scale*W stack.
    Optional per-frame flows are deliberately not part of the estimator
    surface; use run_sequence directly when motion fields are available.
    """

    def __init__(
        self,
        scale: int = 4,
        block_size: int = 8,
        token_size: int = 8,
        scheme: str = "ST",
        seed: int = 0,
        residual_normalize: bool = True,
        history: int = 1,
        projections: bool = False,
        bidirectional: bool = False,
        tiles: int = 1,
        threads: int = 1,
    ):
        self.scale = scale
        self.block_size = block_size
        self.token_size = token_size
        self.scheme = scheme
        self.seed = seed
        self.residual_normalize = residual_normalize
        self.history = history
        self.projections = projections
        self.bidirectional = bidirectional
        self.tiles = tiles
        self.threads = threads

    def fit(self, X, y=None):
        """Freeze the configuration and draw seeded weights for X's channels."""
        frames = check_video(X)
        self.config_ = PipelineConfig(
            scale=self.scale,
            block_size=self.block_size,
            token_size=self.token_size,
            scheme=self.scheme,
            residual_normalize=self.residual_normalize,
            history=self.history,
        )
        self.channels_ = frames[0].shape[0]
        self.weights_ = weight_bank.seeded(
            self.channels_,
            self.block_size,
            self.token_size,
            seed=self.seed,
            projections=self.projections,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError(
                "this FrequencyTransformerSR instance is not fitted yet; call fit first"
            )

    def predict(self, X) -> np.ndarray:
        """Upscale a sequence; returns a stacked T x C x sH x sW array."""
        self._check_fitted()
        frames = check_video(X)
        if frames[0].shape[0] != self.channels_:
            raise ParameterError(
                f"fitted for {self.channels_} channels, got {frames[0].shape[0]}"
            )
        out = run_sequence(
            frames,
            self.weights_,
            self.config_,
            bidirectional=self.bidirectional,
            tiles=self.tiles,
            threads=self.threads,
        )
        return np.stack(out)

    def transform(self, X) -> np.ndarray:
        return self.predict(X)


class CompressionDegrader(TransformerMixin, BaseEstimator):
    """Transformer producing compressed low-resolution input videos.

    q accepts either a number or one of the preset names
    ('crf15-like', 'crf25-like', 'crf35-like').
    """

    def __init__(self, scale: int = 4, q="crf25-like", block_size: int = 8):
        self.scale = scale
        self.q = q
        self.block_size = block_size

    def fit(self, X=None, y=None):
        if isinstance(self.q, str):
            if self.q not in PRESETS:
                raise ParameterError(
                    f"unknown preset {self.q!r}, expected one of {sorted(PRESETS)}"
                )
            strength = PRESETS[self.q]
        else:
            strength = float(self.q)
        self.config_ = DegradeConfig(scale=self.scale, q=strength, block_size=self.block_size)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "config_"):
            raise NotFittedError(
                "this CompressionDegrader instance is not fitted yet; call fit first"
            )
        frames = check_video(X)
        return np.stack(degrade_sequence(frames, self.config_))
