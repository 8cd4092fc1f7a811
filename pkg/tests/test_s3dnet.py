import numpy as np
import pytest

from hsdip import autodiff as ad
from hsdip import s3dnet
from hsdip.autodiff import Tape, backward
from hsdip.ndtensor import Rng, ShapeError
from hsdip.s3dnet import (Conv1dSpectral, Conv2dPerBand, NetworkConfig,
                          build_network, forward)
from oracles import conv_spatial_oracle, conv_spectral_oracle


class TestConvSpatial:
    def test_identity_kernel(self):
        x = Rng(0).uniform([2, 4, 4, 3], 0, 1)
        k = np.zeros((2, 2, 3, 3))
        k[0, 0, 1, 1] = 1.0
        k[1, 1, 1, 1] = 1.0
        layer = Conv2dPerBand(k, np.zeros(2))
        np.testing.assert_allclose(s3dnet.conv_spatial(x, layer), x, atol=1e-15)

    def test_constant_input_everywhere(self):
        # reflect padding makes the constant response hold at the borders too
        x = np.full((1, 3, 3, 2), 0.7)
        k = Rng(1).uniform([2, 1, 3, 3], -1, 1)
        b = np.array([0.3, -0.2])
        out = s3dnet.conv_spatial(x, Conv2dPerBand(k, b))
        for o in range(2):
            expected = b[o] + k[o].sum() * 0.7
            np.testing.assert_allclose(out[o], expected, atol=1e-12)

    def test_against_loop_oracle(self):
        rng = Rng(2)
        x = rng.uniform([2, 4, 4, 3], -1, 1)
        k = rng.uniform([3, 2, 3, 3], -1, 1)
        b = rng.uniform([3], -1, 1)
        got = s3dnet.conv_spatial(x, Conv2dPerBand(k, b))
        assert np.max(np.abs(got - conv_spatial_oracle(x, k, b))) < 1e-12

    def test_channel_mismatch(self):
        layer = Conv2dPerBand(np.zeros((2, 3, 3, 3)), np.zeros(2))
        with pytest.raises(ShapeError):
            s3dnet.conv_spatial(np.zeros((2, 4, 4, 2)), layer)

    def test_kernel_shape_validated(self):
        with pytest.raises(ShapeError):
            Conv2dPerBand(np.zeros((2, 2, 5, 5)), np.zeros(2))


class TestConvSpectral:
    def test_delta_kernel(self):
        x = Rng(3).uniform([2, 3, 3, 6], 0, 1)
        k = np.zeros((2, 2, 5))
        k[0, 0, 2] = 1.0
        k[1, 1, 2] = 1.0
        out = s3dnet.conv_spectral(x, Conv1dSpectral(k, np.zeros(2)))
        np.testing.assert_allclose(out, x, atol=1e-15)

    def test_single_band_constant(self):
        # B=1 reflect-pads to five identical bands
        x = np.full((1, 2, 2, 1), 0.4)
        k = Rng(4).uniform([1, 1, 5], -1, 1)
        b = np.array([0.1])
        out = s3dnet.conv_spectral(x, Conv1dSpectral(k, b))
        np.testing.assert_allclose(out, 0.1 + k.sum() * 0.4, atol=1e-12)

    def test_against_loop_oracle(self):
        rng = Rng(5)
        x = rng.uniform([2, 3, 4, 6], -1, 1)
        k = rng.uniform([4, 2, 5], -1, 1)
        b = rng.uniform([4], -1, 1)
        got = s3dnet.conv_spectral(x, Conv1dSpectral(k, b))
        assert np.max(np.abs(got - conv_spectral_oracle(x, k, b))) < 1e-12

    def test_translation_equivariance_interior(self):
        # shifting bands shifts outputs identically away from the boundary
        rng = Rng(6)
        x = rng.uniform([1, 3, 3, 12], -1, 1)
        k = rng.uniform([1, 1, 5], -1, 1)
        layer = Conv1dSpectral(k, np.zeros(1))
        out = s3dnet.conv_spectral(x, layer)
        shifted = np.roll(x, 1, axis=3)
        out_shifted = s3dnet.conv_spectral(shifted, layer)
        np.testing.assert_allclose(out_shifted[..., 3:-3], np.roll(out, 1, axis=3)[..., 3:-3],
                                   atol=1e-12)


class TestPoolUpsample:
    def test_pool_window_max(self):
        x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 2, 2, 1)
        assert s3dnet.maxpool2d_per_band(x).ravel().tolist() == [4.0]

    def test_upsample_replicates(self):
        x = np.array([[4.0]]).reshape(1, 1, 1, 1)
        out = s3dnet.upsample2d_per_band(x)
        assert out.shape == (1, 2, 2, 1)
        assert np.all(out == 4.0)

    def test_pool_then_upsample_constant(self):
        x = np.full((3, 4, 4, 2), 1.25)
        np.testing.assert_array_equal(
            s3dnet.upsample2d_per_band(s3dnet.maxpool2d_per_band(x)), x)

    def test_pool_odd_extent_rejected(self):
        with pytest.raises(ShapeError):
            s3dnet.maxpool2d_per_band(np.zeros((1, 3, 4, 2)))

    def test_band_axis_untouched(self):
        x = Rng(7).uniform([2, 4, 4, 5], 0, 1)
        assert s3dnet.maxpool2d_per_band(x).shape == (2, 2, 2, 5)
        assert s3dnet.upsample2d_per_band(x).shape == (2, 8, 8, 5)


class TestBuild:
    def test_registry_matches_closed_form(self):
        cfg = NetworkConfig()
        net = build_network(cfg, Rng(0))
        assert net.total_parameters() == s3dnet.separable_param_count(cfg)

    def test_separable_smaller_than_full3d(self):
        for cfg in (NetworkConfig(), NetworkConfig(depth=1, channels=(4,)),
                    NetworkConfig(depth=2, channels=(8, 16))):
            assert s3dnet.separable_param_count(cfg) < s3dnet.full3d_param_count(cfg)

    def test_block_invariant_every_width(self):
        # 9C^2 + 5C^2 + 2C < 27C^2 + C for all C >= 1
        for c in range(1, 65):
            separable = 9 * c * c + c + 5 * c * c + c
            full = 27 * c * c + c
            assert separable < full

    def test_equal_seeds_identical_builds(self):
        a = build_network(NetworkConfig(), Rng(99))
        b = build_network(NetworkConfig(), Rng(99))
        assert a.names() == b.names()
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.value, pb.value)

    def test_registry_order_stable(self):
        net = build_network(NetworkConfig(depth=2, channels=(4, 8)), Rng(0))
        names = net.names()
        assert names[0] == "enc0.block0.spatial.kernel"
        assert names[-2:] == ["head.kernel", "head.bias"]

    def test_duplicate_registration_rejected(self):
        net = s3dnet.ParamSet(NetworkConfig())
        net._register("x", np.zeros(1))
        with pytest.raises(ValueError):
            net._register("x", np.zeros(1))

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            NetworkConfig(depth=0, channels=())
        with pytest.raises(ValueError):
            NetworkConfig(depth=2, channels=(4,))


class TestForward:
    def test_shape_preserved(self):
        net = build_network(NetworkConfig(depth=2, channels=(4, 8)), Rng(0))
        z = Rng(1).uniform([32, 32, 8], 0, 0.1)
        assert forward(net, z).shape == (32, 32, 8)

    def test_odd_extents_padded_and_cropped(self):
        net = build_network(NetworkConfig(depth=2, channels=(4, 8)), Rng(0))
        z = Rng(1).uniform([19, 21, 3], 0, 0.1)
        assert forward(net, z).shape == (19, 21, 3)

    def test_output_in_unit_interval(self):
        net = build_network(NetworkConfig(depth=1, channels=(4,)), Rng(5))
        out = forward(net, Rng(6).uniform([8, 8, 4], 0, 0.1))
        assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_forward_deterministic(self):
        net = build_network(NetworkConfig(depth=1, channels=(4,)), Rng(5))
        z = Rng(6).uniform([8, 8, 4], 0, 0.1)
        np.testing.assert_array_equal(forward(net, z), forward(net, z))

    def test_gradients_flow_to_every_parameter(self):
        net = build_network(NetworkConfig(depth=1, channels=(3,)), Rng(2))
        z = Rng(3).uniform([4, 4, 3], 0, 0.1)
        tape = Tape()
        leaves = s3dnet.make_leaves(tape, net)
        out = s3dnet.forward_on_tape(tape, net, leaves, z)
        backward(ad.sum_sq(out))
        for p in net:
            g = leaves[p.name].grad
            assert g is not None and g.shape == p.value.shape

    def test_forward_kernel_gradients_match_finite_differences(self):
        net = build_network(NetworkConfig(depth=1, channels=(2,)), Rng(4))
        z = Rng(5).uniform([4, 4, 3], 0, 0.1)

        tape = Tape()
        leaves = s3dnet.make_leaves(tape, net)
        backward(ad.sum_all(s3dnet.forward_on_tape(tape, net, leaves, z)))

        def value():
            t = Tape()
            ls = s3dnet.make_leaves(t, net, requires_grad=False)
            return float(np.sum(s3dnet.forward_on_tape(t, net, ls, z).value))

        h = 1e-5
        for name in ("enc0.block0.spatial.kernel", "dec0.block0.spectral.kernel",
                     "head.kernel", "bottleneck.block1.norm.gamma"):
            p = net.param(name)
            flat = p.value.ravel()
            analytic = leaves[name].grad.ravel()
            for idx in range(0, flat.size, max(1, flat.size // 4)):
                orig = flat[idx]
                flat[idx] = orig + h
                fp = value()
                flat[idx] = orig - h
                fm = value()
                flat[idx] = orig
                fd = (fp - fm) / (2 * h)
                if abs(fd) > 1e-6:
                    assert abs(analytic[idx] - fd) / abs(fd) < 1e-3
