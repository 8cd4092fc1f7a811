"""Seeded synthetic cubes for experiments and the desk-scale test bed.

Spatially piecewise-constant regions (recursive random rectangle splits)
with per-region spectra that vary smoothly over bands: a base level plus
a linear ramp plus a low-amplitude sinusoid, parameterized to stay inside
[0, 1] without clipping.
"""

from __future__ import annotations

import numpy as np

from .ndtensor import Rng


def _split_rects(rng: Rng, h: int, w: int, regions: int) -> np.ndarray:
    """Label map [h, w] from repeated splits of the largest rectangle."""
    rects = [(0, 0, h, w)]
    while len(rects) < regions:
        rects.sort(key=lambda r: r[2] * r[3], reverse=True)
        r0, c0, rh, rw = rects.pop(0)
        if max(rh, rw) < 2:
            rects.append((r0, c0, rh, rw))
            break
        if rh >= rw:
            cut = 1 + int(rng.integers(0, rh - 2)) if rh > 2 else 1
            rects += [(r0, c0, cut, rw), (r0 + cut, c0, rh - cut, rw)]
        else:
            cut = 1 + int(rng.integers(0, rw - 2)) if rw > 2 else 1
            rects += [(r0, c0, rh, cut), (r0, c0 + cut, rh, rw - cut)]
    labels = np.zeros((h, w), dtype=np.intp)
    for i, (r0, c0, rh, rw) in enumerate(rects):
        labels[r0:r0 + rh, c0:c0 + rw] = i
    return labels


def piecewise_constant_cube(shape=(32, 32, 8), seed: int = 0, regions: int = 8) -> np.ndarray:
    """Piecewise-constant [H, W, B] cube with smooth spectral ramps, in [0, 1]."""
    h, w, b = shape
    rng = Rng(seed)
    labels = _split_rects(rng, h, w, regions)
    n = labels.max() + 1
    t = np.linspace(0.0, 1.0, b) if b > 1 else np.zeros(1)
    spectra = np.empty((n, b))
    for i in range(n):
        base = float(rng.uniform((1,), 0.25, 0.75)[0])
        slope = float(rng.uniform((1,), -0.3, 0.3)[0])
        amp = float(rng.uniform((1,), 0.0, 0.08)[0])
        freq = float(rng.integers(1, 2))
        phase = float(rng.uniform((1,), 0.0, 2.0 * np.pi)[0])
        spectra[i] = base + slope * (t - 0.5) + amp * np.sin(2.0 * np.pi * freq * t + phase)
    cube = spectra[labels]
    assert cube.min() >= 0.0 and cube.max() <= 1.0
    return np.ascontiguousarray(cube)
