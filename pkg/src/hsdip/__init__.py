"""Unsupervised mixed-noise removal for hyperspectral cubes.

Fits a separable-3D-convolution encoder-decoder to a single noisy cube
under an MSE + TV + spatial-spectral-TV objective, with an automatic
relative-error stopping rule. Cubes are [H, W, B] float64 arrays.
"""

from .ndtensor import Rng, Tensor, derive_seed
from .noisegen import CASE_PRESETS, NoiseSpec, case_preset, corrupt
from .pipeline import (CASE_LAMBDA_OVER_N, RunConfig, RunReport, StopConfig,
                       rel_err, run, run_dip_baseline)
from .quality import MetricsReport, psnr, sam, ssim
from .regloss import LossWeights, mse, sstv, total_loss, tv
from .s3dnet import NetworkConfig, ParamSet, build_network, forward
from .synthetic import piecewise_constant_cube

__all__ = [
    "CASE_LAMBDA_OVER_N", "CASE_PRESETS", "LossWeights", "MetricsReport",
    "NetworkConfig", "NoiseSpec", "ParamSet", "Rng", "RunConfig", "RunReport",
    "StopConfig", "Tensor", "build_network", "case_preset", "corrupt",
    "derive_seed", "forward", "mse", "piecewise_constant_cube", "psnr",
    "rel_err", "run", "run_dip_baseline", "sam", "ssim", "sstv",
    "total_loss", "tv",
]

__version__ = "0.1.0"
