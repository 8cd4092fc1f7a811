"""Reconstruction quality metrics for hyperspectral cubes.

PSNR is the mean of per-band PSNRs against a unit peak (the band-wise
convention used throughout the HSI denoising literature). SSIM is the
original windowed index (11x11 Gaussian window, sigma 1.5, stabilizers
(0.01*L)^2 and (0.03*L)^2 with L = 1), averaged over bands. SAM is the
mean spectral angle in radians over spatial pixels. Estimates are used
as-is; nothing is clipped before measuring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ndtensor import ShapeError, _check_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class MetricsReport:
    psnr: float   # dB, +inf only for identical cubes
    ssim: float   # in [-1, 1]
    sam: float    # radians, >= 0

    @classmethod
    def compute(cls, ref: np.ndarray, est: np.ndarray) -> "MetricsReport":
        return cls(psnr=psnr(ref, est), ssim=ssim(ref, est), sam=sam(ref, est))

    def to_json_dict(self) -> dict:
        return {"psnr": "inf" if np.isinf(self.psnr) else self.psnr,
                "ssim": self.ssim, "sam": self.sam}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetricsReport":
        p = d["psnr"]
        return cls(psnr=float("inf") if p == "inf" else float(p),
                   ssim=float(d["ssim"]), sam=float(d["sam"]))


def psnr(ref: np.ndarray, est: np.ndarray) -> float:
    """Mean over bands of 10*log10(1 / band MSE); +inf for identical cubes.

    Zero-MSE bands of a non-identical pair are excluded from the mean.
    """
    _check_same_shape(ref, est)
    band_mse = np.mean((ref - est) ** 2, axis=(0, 1))
    if np.all(band_mse == 0.0):
        return float("inf")
    valid = band_mse > 0.0
    return float(np.mean(10.0 * np.log10(1.0 / band_mse[valid])))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return k / k.sum()


def _corr_valid(a: np.ndarray, kern: np.ndarray, axis: int) -> np.ndarray:
    n = a.shape[axis]
    m = kern.size
    b = np.moveaxis(a, axis, 0)
    out = kern[0] * b[0:n - m + 1]
    for t in range(1, m):
        out = out + kern[t] * b[t:t + n - m + 1]
    return np.moveaxis(out, 0, axis)


def _windowed_mean(a: np.ndarray, kern: np.ndarray) -> np.ndarray:
    return _corr_valid(_corr_valid(a, kern, 0), kern, 1)


def ssim(ref: np.ndarray, est: np.ndarray) -> float:
    """Mean structural similarity over bands (valid windows only)."""
    _check_same_shape(ref, est)
    H, W, _ = ref.shape
    if H < SSIM_WINDOW or W < SSIM_WINDOW:
        raise ShapeError(f"ssim needs spatial extents >= {SSIM_WINDOW}, got {H}x{W}")
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    kern = _gaussian_window()
    mu1 = _windowed_mean(ref, kern)
    mu2 = _windowed_mean(est, kern)
    var1 = _windowed_mean(ref * ref, kern) - mu1 * mu1
    var2 = _windowed_mean(est * est, kern) - mu2 * mu2
    cov = _windowed_mean(ref * est, kern) - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    return float(np.mean(num / den))


def sam(ref: np.ndarray, est: np.ndarray) -> float:
    """Mean spectral angle (radians) over pixels; zero-norm spectra are skipped."""
    _check_same_shape(ref, est)
    dot = np.sum(ref * est, axis=2)
    n_ref = np.sqrt(np.sum(ref * ref, axis=2))
    n_est = np.sqrt(np.sum(est * est, axis=2))
    if np.all(n_ref == 0.0):
        raise ValueError("every reference spectrum has zero norm")
    valid = (n_ref > 0.0) & (n_est > 0.0)
    cosine = np.clip(dot[valid] / (n_ref[valid] * n_est[valid]), -1.0, 1.0)
    return float(np.mean(np.arccos(cosine)))
