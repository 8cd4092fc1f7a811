"""ADAM parameter updates with bias correction.

Only the learning rate is tuned for this method (0.005, which is what
keeps the optimization from blowing up); the momentum constants stay at
the published defaults. Gradients are consumed as found on each parameter
and zeroed by the caller, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AdamState:
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0


def step(params, state: AdamState) -> None:
    """One ADAM update over every parameter in ``params`` (any iterable).

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;
    theta <- theta - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps).
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    m_corr = 1.0 - b1 ** state.t
    v_corr = 1.0 - b2 ** state.t
    for p in params:
        if p.grad is None:
            raise ValueError(f"parameter {p.name!r} has no gradient")
        g = p.grad
        if p.m is None:
            p.m = np.zeros_like(p.value)
            p.v = np.zeros_like(p.value)
        p.m *= b1
        p.m += (1.0 - b1) * g
        p.v *= b2
        p.v += (1.0 - b2) * (g * g)
        m_hat = p.m / m_corr
        v_hat = p.v / v_corr
        p.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
