"""Composite training objective: data-fidelity MSE plus a hybrid
spatial/spatial-spectral total-variation penalty.

``mse``, ``tv`` and ``sstv`` accept either plain arrays (returning floats)
or tape nodes (returning nodes), so the same definitions serve metrics,
tests and the differentiable training loss. TV and SSTV are anisotropic
l1 sums of finite differences, unnormalized; the fidelity term is divided
by the element count, so the regularization weight is conventionally
quoted as a multiple of 1/N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .ndtensor import ShapeError, _check_same_shape


@dataclass(frozen=True)
class LossWeights:
    lam: float
    alpha1: float = 0.01
    alpha2: float = 1.0

    def __post_init__(self):
        if self.lam < 0 or self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("loss weights must be >= 0")


def mse(a, b):
    """Mean squared error (1/N) * sum((a-b)^2); array or node arguments."""
    if isinstance(a, Node) or isinstance(b, Node):
        tape = a.tape if isinstance(a, Node) else b.tape
        a = a if isinstance(a, Node) else tape.leaf(a)
        b = b if isinstance(b, Node) else tape.leaf(b)
        _check_same_shape(a.value, b.value)
        return ad.sum_sq(a - b) * (1.0 / a.value.size)
    _check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def tv(x):
    """Anisotropic spatial total variation: |D_v x|_1 + |D_h x|_1."""
    if isinstance(x, Node):
        return ad.sum_abs(ad.diff(x, 0)) + ad.sum_abs(ad.diff(x, 1))
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ShapeError(f"tv needs spatial extents >= 2, got {x.shape}")
    return float(np.sum(np.abs(np.diff(x, axis=0))) + np.sum(np.abs(np.diff(x, axis=1))))


def sstv(x):
    """Spatial-spectral total variation: |D_v(D_b x)|_1 + |D_h(D_b x)|_1."""
    if isinstance(x, Node):
        db = ad.diff(x, 2)
        return ad.sum_abs(ad.diff(db, 0)) + ad.sum_abs(ad.diff(db, 1))
    if x.shape[0] < 2 or x.shape[1] < 2 or x.shape[2] < 2:
        raise ShapeError(f"sstv needs all extents >= 2, got {x.shape}")
    db = np.diff(x, axis=2)
    return float(np.sum(np.abs(np.diff(db, axis=0))) + np.sum(np.abs(np.diff(db, axis=1))))


def total_loss(out: Node, y, w: LossWeights) -> Node:
    """Tape node for mse(out, y) + lam * (alpha1*tv(out) + alpha2*sstv(out)).

    Zero-weight terms are skipped outright, so lam == 0 reduces exactly to
    the plain data-fidelity objective.
    """
    loss = mse(out, y)
    if w.lam * w.alpha1 > 0:
        loss = loss + tv(out) * (w.lam * w.alpha1)
    if w.lam * w.alpha2 > 0:
        loss = loss + sstv(out) * (w.lam * w.alpha2)
    return loss
