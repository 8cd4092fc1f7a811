"""Mixed-noise simulator: Gaussian, salt-and-pepper impulse, stripes, deadlines.

The five standard corruption recipes (case 1..5) are expressed as
:class:`NoiseSpec` presets. Composition order is fixed: Gaussian, then
impulse, then stripes, then deadlines, so dead columns always read exactly
zero. Outputs are deliberately not clipped to [0, 1]; the corruption is
purely additive/substitutive and clipping would change its statistics.

Stripes are full-height constant column offsets drawn uniform in
[-0.25, 0.25] (one offset per stripe); count ranges are inclusive integer
ranges; band and column selections are without replacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ndtensor import Rng

STRIPE_AMPLITUDE = 0.25


@dataclass(frozen=True)
class NoiseSpec:
    gaussian_sigma: float = 0.0
    impulse_rate: float = 0.0
    stripe_band_fraction: float = 0.0
    stripe_count_range: tuple[int, int] = (0, 0)
    deadline_band_fraction: float = 0.0
    deadline_count_range: tuple[int, int] = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "stripe_count_range", tuple(self.stripe_count_range))
        object.__setattr__(self, "deadline_count_range", tuple(self.deadline_count_range))
        if self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be >= 0")
        if not 0.0 <= self.impulse_rate <= 1.0:
            raise ValueError("impulse_rate must be in [0, 1]")
        for frac in (self.stripe_band_fraction, self.deadline_band_fraction):
            if not 0.0 <= frac <= 1.0:
                raise ValueError("band fractions must be in [0, 1]")
        for lo, hi in (self.stripe_count_range, self.deadline_count_range):
            if lo < 0 or lo > hi:
                raise ValueError(f"count range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")


CASE_PRESETS: dict[int, NoiseSpec] = {
    1: NoiseSpec(gaussian_sigma=0.2),
    2: NoiseSpec(gaussian_sigma=0.1, impulse_rate=0.1),
    3: NoiseSpec(gaussian_sigma=0.1, impulse_rate=0.1,
                 stripe_band_fraction=0.4, stripe_count_range=(6, 15)),
    4: NoiseSpec(gaussian_sigma=0.1, impulse_rate=0.1,
                 deadline_band_fraction=0.5, deadline_count_range=(6, 10)),
    5: NoiseSpec(gaussian_sigma=0.1, impulse_rate=0.1,
                 stripe_band_fraction=0.4, stripe_count_range=(6, 15),
                 deadline_band_fraction=0.5, deadline_count_range=(6, 10)),
}


def case_preset(case: int) -> NoiseSpec:
    if case not in CASE_PRESETS:
        raise ValueError(f"case must be in 1..5, got {case}")
    return CASE_PRESETS[case]


def add_gaussian(x: np.ndarray, sigma: float, rng: Rng) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return x + rng.gaussian(x.shape, 0.0, sigma)


def add_impulse(x: np.ndarray, p: float, rng: Rng) -> np.ndarray:
    """Replace each element independently with probability p by 0 or 1 (even odds)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("impulse rate must be in [0, 1]")
    hit = rng.uniform(x.shape) < p
    salt = rng.integers(0, 1, x.shape).astype(np.float64)
    y = x.copy()
    y[hit] = salt[hit]
    return y


def _corrupted_bands(shape, band_fraction, count_range, rng: Rng):
    """Yield (band, columns) picks; bands and in-band columns are distinct."""
    _, W, B = shape
    lo, hi = count_range
    if hi > W:
        raise ValueError(f"count range [{lo}, {hi}] exceeds width {W}")
    n_bands = math.ceil(band_fraction * B)
    for band in rng.choice_without_replacement(B, n_bands):
        count = int(rng.integers(lo, hi))
        cols = rng.choice_without_replacement(W, count)
        yield int(band), cols


def add_stripes(x: np.ndarray, band_fraction: float, count_range, rng: Rng) -> np.ndarray:
    y = x.copy()
    for band, cols in _corrupted_bands(x.shape, band_fraction, count_range, rng):
        if len(cols) == 0:
            continue
        offsets = rng.uniform((len(cols),), -STRIPE_AMPLITUDE, STRIPE_AMPLITUDE)
        y[:, cols, band] += offsets[None, :]
    return y


def add_deadlines(x: np.ndarray, band_fraction: float, count_range, rng: Rng) -> np.ndarray:
    y = x.copy()
    for band, cols in _corrupted_bands(x.shape, band_fraction, count_range, rng):
        y[:, cols, band] = 0.0
    return y


def corrupt(x: np.ndarray, spec: NoiseSpec, rng: Rng) -> np.ndarray:
    """Apply the full recipe: gaussian -> impulse -> stripes -> deadlines."""
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("clean cube must lie in [0, 1]")
    y = add_gaussian(x, spec.gaussian_sigma, rng)
    y = add_impulse(y, spec.impulse_rate, rng)
    y = add_stripes(y, spec.stripe_band_fraction, spec.stripe_count_range, rng)
    y = add_deadlines(y, spec.deadline_band_fraction, spec.deadline_count_range, rng)
    return y
