"""Frequency-domain transformer for video super-resolution, numpy edition.

Training-free forward machinery: block-DCT spectral maps, frequency
tokens, the attention schemes over them, a recurrent upscaling pipeline,
quality metrics, and a toy compression degrader, plus estimator wrappers
and a command line.
"""

from .errors import (
    DegenerateInputError,
    DimensionError,
    FreqVSRError,
    IntegrityError,
    NumericError,
    ParameterError,
)
from .numerics import (
    bicubic_resize,
    bilinear_sample,
    ensure_finite,
    load_tensor,
    matmul,
    save_tensor,
    softmax,
)
from .dct import (
    SpectralMap,
    dct2d_block,
    frame_to_spectral,
    idct2d_block,
    load_spectral,
    pad_edge,
    save_spectral,
    spectral_to_frame,
    transform_matrix,
    unpad,
)
from .tokenizer import QKVBundle, TokenSet, build_qkv, detokenize, tokenize
from .attention import (
    SCHEMES,
    AttentionConfig,
    apply_scheme,
    band_attention,
    divided_attention,
    ffn,
    freq_attention,
    fuse,
    joint_space_time_attention,
    space_freq_attention,
    time_freq_attention,
)
from .weights import (
    ModelWeights,
    identity,
    load_weights,
    save_weights,
    seeded,
    toy_upsample,
)
from .pipeline import (
    HiddenState,
    PipelineConfig,
    downscale_flow,
    flow_warp,
    run_sequence,
    step,
    tiled_inference,
)
from .metrics import (
    GradCheckReport,
    LossReport,
    amplitude_spectrum,
    charbonnier_grad,
    charbonnier_loss,
    gradcheck,
    psnr,
    rgb_to_luma,
    ssim,
)
from .compressor import PRESETS, DegradeConfig, degrade_sequence, quantize_compress
from .estimators import CompressionDegrader, FrequencyTransformerSR
from .frameio import read_frame, read_sequence, write_frame, write_sequence
from .selftest import CheckResult, run_all

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig",
    "CheckResult",
    "CompressionDegrader",
    "DegenerateInputError",
    "DegradeConfig",
    "DimensionError",
    "FreqVSRError",
    "FrequencyTransformerSR",
    "GradCheckReport",
    "HiddenState",
    "IntegrityError",
    "LossReport",
    "ModelWeights",
    "NumericError",
    "PRESETS",
    "ParameterError",
    "PipelineConfig",
    "QKVBundle",
    "SCHEMES",
    "SpectralMap",
    "TokenSet",
    "amplitude_spectrum",
    "apply_scheme",
    "band_attention",
    "bicubic_resize",
    "bilinear_sample",
    "build_qkv",
    "charbonnier_grad",
    "charbonnier_loss",
    "dct2d_block",
    "degrade_sequence",
    "detokenize",
    "divided_attention",
    "downscale_flow",
    "ensure_finite",
    "ffn",
    "flow_warp",
    "frame_to_spectral",
    "freq_attention",
    "fuse",
    "gradcheck",
    "idct2d_block",
    "identity",
    "joint_space_time_attention",
    "load_spectral",
    "load_tensor",
    "load_weights",
    "matmul",
    "pad_edge",
    "psnr",
    "quantize_compress",
    "read_frame",
    "read_sequence",
    "rgb_to_luma",
    "run_all",
    "run_sequence",
    "save_spectral",
    "save_tensor",
    "save_weights",
    "seeded",
    "softmax",
    "space_freq_attention",
    "spectral_to_frame",
    "ssim",
    "step",
    "tiled_inference",
    "time_freq_attention",
    "tokenize",
    "toy_upsample",
    "transform_matrix",
    "unpad",
    "write_frame",
    "write_sequence",
]
