import numpy as np
import pytest

from hsdip import adamopt
from hsdip.adamopt import AdamState
from hsdip.ndtensor import Rng
from hsdip.s3dnet import Parameter


def make_param(value, grad=None):
    p = Parameter("p", np.asarray(value, dtype=np.float64))
    if grad is not None:
        p.grad = np.asarray(grad, dtype=np.float64)
    return p


class TestStep:
    def test_first_step_magnitude(self):
        # bias correction makes m_hat = v_hat = g at t=1
        p = make_param([0.0], grad=[1.0])
        adamopt.step([p], AdamState(lr=0.005))
        assert abs(p.value[0] - (-0.005 / (1.0 + 1e-8))) < 1e-12
        assert abs(abs(p.value[0]) - 0.005) < 1e-6

    def test_zero_gradient_leaves_value(self):
        p = make_param([1.5], grad=[0.0])
        state = AdamState()
        adamopt.step([p], state)
        assert p.value[0] == 1.5
        assert state.t == 1

    def test_zero_gradient_decays_moments(self):
        p = make_param([0.0], grad=[1.0])
        state = AdamState()
        adamopt.step([p], state)
        m1, v1 = p.m.copy(), p.v.copy()
        p.grad = np.array([0.0])
        adamopt.step([p], state)
        assert p.m[0] == pytest.approx(0.9 * m1[0])
        assert p.v[0] == pytest.approx(0.999 * v1[0])

    def test_missing_gradient_raises(self):
        p = make_param([1.0])
        with pytest.raises(ValueError, match="no gradient"):
            adamopt.step([p], AdamState())

    def test_quadratic_convergence(self):
        # L(theta) = (theta - 2)^2, the update recursion is its own oracle
        p = make_param([0.0])
        state = AdamState(lr=0.005)
        for _ in range(2000):
            p.grad = 2.0 * (p.value - 2.0)
            adamopt.step([p], state)
        assert abs(p.value[0] - 2.0) < 1e-3

    def test_first_step_sign_property(self):
        rng = Rng(0)
        g = rng.uniform([64], -1, 1)
        g[g == 0] = 0.5
        p = make_param(np.zeros(64), grad=g)
        adamopt.step([p], AdamState(lr=0.005))
        assert np.all(np.sign(p.value) == -np.sign(g))
        assert np.all(np.abs(p.value) <= 0.005 + 1e-12)

    def test_determinism(self):
        def run():
            p = make_param(Rng(1).uniform([8], -1, 1))
            state = AdamState()
            for k in range(50):
                p.grad = Rng(k).uniform([8], -1, 1)
                adamopt.step([p], state)
            return p.value.copy()
        assert np.array_equal(run(), run())

    def test_moment_shapes_match(self):
        p = make_param(np.zeros((3, 4)), grad=np.ones((3, 4)))
        adamopt.step([p], AdamState())
        assert p.m.shape == (3, 4)
        assert p.v.shape == (3, 4)
