"""Data-driven block thresholding (SureBlock) wavelet regression and its benchmark harness."""

__version__ = "0.1.0"

from .dwt import CoefficientPyramid, WaveletFilter, forward, get_filter, inverse
from .pipeline import DenoiseConfig, DenoiseReport, Method, denoise, estimate_sigma
from .shrinkage import (
    Branch,
    SureSelection,
    block_js,
    candidate_thresholds,
    garrote,
    minimize_sure,
    sure,
    sureblock_estimate,
)

__all__ = [
    "Branch",
    "CoefficientPyramid",
    "DenoiseConfig",
    "DenoiseReport",
    "Method",
    "SureSelection",
    "WaveletFilter",
    "block_js",
    "candidate_thresholds",
    "denoise",
    "estimate_sigma",
    "forward",
    "garrote",
    "get_filter",
    "inverse",
    "minimize_sure",
    "sure",
    "sureblock_estimate",
]
