"""Dense float64 tensor primitives and seeded random generation.

Every array in this package is a contiguous row-major float64 ndarray;
hyperspectral cubes are [H, W, B] with the band axis last (fastest), so
spectral operations stride unit memory. Binary operations require exactly
matching shapes -- there is no broadcasting.
"""

from __future__ import annotations

import numpy as np

Tensor = np.ndarray


class ShapeError(ValueError):
    """Raised on invalid shapes or shape mismatches."""


def _check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ShapeError("shape must have rank >= 1")
    if any(s < 1 for s in shape):
        raise ShapeError(f"all extents must be >= 1, got {shape}")
    return shape


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def as_tensor(data) -> Tensor:
    """Coerce to a contiguous float64 array."""
    return np.ascontiguousarray(data, dtype=np.float64)


def zeros(shape) -> Tensor:
    return np.zeros(_check_shape(shape), dtype=np.float64)


def full(shape, value: float) -> Tensor:
    return np.full(_check_shape(shape), float(value), dtype=np.float64)


def ew_add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return a + b


def ew_sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return a - b


def ew_mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return a * b


def scale(a: Tensor, c: float) -> Tensor:
    return a * float(c)


def sum(a: Tensor) -> float:  # noqa: A001 - mirrors the op name, used qualified
    return float(np.sum(a))


def sum_abs(a: Tensor) -> float:
    return float(np.sum(np.abs(a)))


def sum_sq(a: Tensor) -> float:
    return float(np.sum(a * a))


def slice_shift_diff(a: Tensor, axis: int) -> Tensor:
    """Forward difference along ``axis``: out[..., i, ...] = a[..., i+1, ...] - a[..., i, ...].

    Output extent along ``axis`` is one less than the input extent. On an
    [H, W, B] cube, axis 0/1/2 gives the vertical/horizontal/spectral
    difference operator.
    """
    if a.shape[axis] < 2:
        raise ShapeError(f"extent along axis {axis} must be >= 2, got {a.shape[axis]}")
    return np.diff(a, axis=axis)


def linear_index(shape, idx) -> int:
    """Row-major linearization of a multi-index (checked)."""
    shape = tuple(shape)
    if len(idx) != len(shape):
        raise ShapeError(f"index rank {len(idx)} != tensor rank {len(shape)}")
    k = 0
    for i, n in zip(idx, shape):
        if not 0 <= i < n:
            raise IndexError(f"index {tuple(idx)} out of range for shape {shape}")
        k = k * n + i
    return k


def multi_index(shape, k: int) -> tuple[int, ...]:
    """Inverse of :func:`linear_index`."""
    shape = tuple(shape)
    size = int(np.prod(shape))
    if not 0 <= k < size:
        raise IndexError(f"linear index {k} out of range for shape {shape}")
    out = []
    for n in reversed(shape):
        out.append(k % n)
        k //= n
    return tuple(reversed(out))


def derive_seed(seed: int, tag: int) -> int:
    """Derive a decorrelated 64-bit seed from (seed, tag), deterministically."""
    ss = np.random.SeedSequence([int(seed), int(tag)])
    return int(ss.generate_state(1, np.uint64)[0])


class Rng:
    """Seeded random source backed by the counter-based Philox generator.

    Equal seeds produce bit-identical sample streams; a single Rng instance
    is not meant to be shared across threads. Use :func:`derive_seed` to
    split independent streams off one master seed.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def uniform(self, shape, lo: float = 0.0, hi: float = 1.0) -> Tensor:
        if not lo < hi:
            raise ValueError(f"uniform requires lo < hi, got [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size=_check_shape(shape))

    def gaussian(self, shape, mean: float = 0.0, sigma: float = 1.0) -> Tensor:
        if sigma < 0:
            raise ValueError(f"gaussian requires sigma >= 0, got {sigma}")
        return self._gen.normal(mean, sigma, size=_check_shape(shape))

    def integers(self, lo: int, hi: int, shape=None):
        """Uniform integers in the inclusive range [lo, hi]."""
        return self._gen.integers(lo, hi, size=shape, endpoint=True)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct integers drawn uniformly from range(n)."""
        return self._gen.choice(n, size=k, replace=False)


def uniform(rng: Rng, shape, lo: float, hi: float) -> Tensor:
    return rng.uniform(shape, lo, hi)


def gaussian(rng: Rng, shape, mean: float, sigma: float) -> Tensor:
    return rng.gaussian(shape, mean, sigma)
