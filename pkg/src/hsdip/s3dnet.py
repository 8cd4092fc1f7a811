"""Separable-3D-convolution encoder-decoder network.

Feature stacks are [C, H, W, B]. Each separable block factors a dense
3x3x3 kernel into a per-band 3x3 spatial convolution followed by a
per-pixel length-5 spectral convolution, which is strictly cheaper in
parameters at equal channel widths; a per-channel normalization and a
leaky rectifier close the block. The encoder halves H and W per stage
(bands stay full resolution); the decoder mirrors it with nearest-neighbor
upsampling and skip concatenation; encoder stages carry two blocks for
every one in the decoder.

The normalization is load-bearing: without it, coherent early ADAM steps
compound multiplicatively through the stack until the output sigmoid
saturates and gradients underflow to exact zero, after which the fit can
never recover.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Tape
from .ndtensor import Rng, ShapeError


@dataclass(frozen=True)
class NetworkConfig:
    depth: int = 3
    channels: tuple[int, ...] = (16, 32, 64)
    in_channels: int = 1
    out_channels: int = 1
    leaky_slope: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if len(self.channels) != self.depth:
            raise ValueError(f"need {self.depth} channel widths, got {len(self.channels)}")
        if any(c < 1 for c in self.channels):
            raise ValueError("channel widths must be >= 1")


@dataclass
class Conv2dPerBand:
    """3x3x1 factor: one 3x3 kernel applied identically to every band."""

    kernel: np.ndarray  # [C_out, C_in, 3, 3]
    bias: np.ndarray    # [C_out]

    def __post_init__(self):
        if self.kernel.ndim != 4 or self.kernel.shape[2:] != (3, 3):
            raise ShapeError(f"spatial kernel must be [C_out, C_in, 3, 3], got {self.kernel.shape}")


@dataclass
class Conv1dSpectral:
    """1x1x5 factor: one length-5 kernel applied identically at every pixel."""

    kernel: np.ndarray  # [C_out, C_in, 5]
    bias: np.ndarray    # [C_out]

    def __post_init__(self):
        if self.kernel.ndim != 3 or self.kernel.shape[2] != 5:
            raise ShapeError(f"spectral kernel must be [C_out, C_in, 5], got {self.kernel.shape}")


@dataclass
class SeparableBlock:
    spatial: Conv2dPerBand
    spectral: Conv1dSpectral
    slope: float = 0.1

    def param_count(self) -> int:
        return (self.spatial.kernel.size + self.spatial.bias.size
                + self.spectral.kernel.size + self.spectral.bias.size)


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray | None = None
    m: np.ndarray | None = None  # ADAM first moment
    v: np.ndarray | None = None  # ADAM second moment


class ParamSet:
    """Flat, stably ordered registry of every kernel and bias in the network."""

    def __init__(self, cfg: NetworkConfig):
        self.cfg = cfg
        self._params: dict[str, Parameter] = {}

    def _register(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def param(self, name: str) -> Parameter:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def total_parameters(self) -> int:
        return sum(p.value.size for p in self)

    def zero_grads(self) -> None:
        for p in self:
            p.grad = None

    def block(self, prefix: str) -> SeparableBlock:
        """View of one separable block's parameters (arrays are shared)."""
        return SeparableBlock(
            spatial=Conv2dPerBand(self._params[f"{prefix}.spatial.kernel"].value,
                                  self._params[f"{prefix}.spatial.bias"].value),
            spectral=Conv1dSpectral(self._params[f"{prefix}.spectral.kernel"].value,
                                    self._params[f"{prefix}.spectral.bias"].value),
            slope=self.cfg.leaky_slope,
        )


# ---------------------------------------------------------------------------
# eager ops


def conv_spatial(x: np.ndarray, layer: Conv2dPerBand) -> np.ndarray:
    return ad.conv_spatial_fwd(x, layer.kernel, layer.bias)


def conv_spectral(x: np.ndarray, layer: Conv1dSpectral) -> np.ndarray:
    return ad.conv_spectral_fwd(x, layer.kernel, layer.bias)


def maxpool2d_per_band(x: np.ndarray) -> np.ndarray:
    C, H, W, B = x.shape
    if H % 2 or W % 2:
        raise ShapeError(f"maxpool2d requires even spatial extents, got {H}x{W}")
    return x.reshape(C, H // 2, 2, W // 2, 2, B).max(axis=(2, 4))


def upsample2d_per_band(x: np.ndarray) -> np.ndarray:
    return x.repeat(2, axis=1).repeat(2, axis=2)


# ---------------------------------------------------------------------------
# construction


def _block_plan(cfg: NetworkConfig) -> list[tuple[str, int, int]]:
    """(prefix, c_in, c_out) for every separable block, in registry order."""
    plan = []
    c_prev = cfg.in_channels
    for i, c in enumerate(cfg.channels):
        plan.append((f"enc{i}.block0", c_prev, c))
        plan.append((f"enc{i}.block1", c, c))
        c_prev = c
    plan.append(("bottleneck.block0", c_prev, c_prev))
    plan.append(("bottleneck.block1", c_prev, c_prev))
    for i in reversed(range(cfg.depth)):
        skip = cfg.channels[i]
        plan.append((f"dec{i}.block0", c_prev + skip, skip))
        c_prev = skip
    return plan


def separable_param_count(cfg: NetworkConfig) -> int:
    """Closed-form parameter total of the separable build (C_mid = C_out)."""
    total = 0
    for _, cin, cout in _block_plan(cfg):
        total += 9 * cin * cout + cout + 5 * cout * cout + cout  # conv pair
        total += 2 * cout                                        # norm affine
    total += cfg.channels[0] * cfg.out_channels + cfg.out_channels
    return total


def full3d_param_count(cfg: NetworkConfig) -> int:
    """Parameter total with every separable conv pair replaced by one dense
    3x3x3 convolution at the same channel widths (norm and head unchanged)."""
    total = 0
    for _, cin, cout in _block_plan(cfg):
        total += 27 * cin * cout + cout
        total += 2 * cout
    total += cfg.channels[0] * cfg.out_channels + cfg.out_channels
    return total


def build_network(cfg: NetworkConfig, rng: Rng) -> ParamSet:
    """Create and initialize all parameters; equal seeds give identical builds.

    Kernels and biases draw uniform from +-1/sqrt(fan_in), in registry order.
    """
    net = ParamSet(cfg)

    def init(name, shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        net._register(name, rng.uniform(shape, -bound, bound))

    for prefix, cin, cout in _block_plan(cfg):
        init(f"{prefix}.spatial.kernel", (cout, cin, 3, 3), 9 * cin)
        init(f"{prefix}.spatial.bias", (cout,), 9 * cin)
        init(f"{prefix}.spectral.kernel", (cout, cout, 5), 5 * cout)
        init(f"{prefix}.spectral.bias", (cout,), 5 * cout)
        net._register(f"{prefix}.norm.gamma", np.ones(cout))
        net._register(f"{prefix}.norm.beta", np.zeros(cout))
    init("head.kernel", (cfg.out_channels, cfg.channels[0]), cfg.channels[0])
    init("head.bias", (cfg.out_channels,), cfg.channels[0])
    return net


# ---------------------------------------------------------------------------
# forward map


def make_leaves(tape: Tape, net: ParamSet, requires_grad: bool = True) -> dict[str, Node]:
    return {p.name: tape.leaf(p.value, requires_grad=requires_grad) for p in net}


def _trailing_reflect_indices(n: int, pad: int) -> np.ndarray:
    if pad == 0:
        return np.arange(n, dtype=np.intp)
    return ad.reflect_indices(n, pad)[pad:]


def pad_cube_to_multiple(z: np.ndarray, mult: int) -> np.ndarray:
    """Reflect-pad H and W at the trailing edge up to the next multiple."""
    H, W, _ = z.shape
    hp = -H % mult
    wp = -W % mult
    if hp == 0 and wp == 0:
        return z
    return z[_trailing_reflect_indices(H, hp)][:, _trailing_reflect_indices(W, wp)]


def forward_on_tape(tape: Tape, net: ParamSet, leaves: dict[str, Node], z: np.ndarray) -> Node:
    """Differentiable forward pass; returns the output cube node [H, W, B]."""
    cfg = net.cfg
    if z.ndim != 3:
        raise ShapeError(f"network input must be a cube [H, W, B], got shape {z.shape}")
    if cfg.in_channels != 1:
        raise ShapeError("cube input requires in_channels == 1")
    H, W, _ = z.shape
    zp = pad_cube_to_multiple(z, 2 ** cfg.depth)
    x = tape.leaf(zp[None])  # lift to [1, H', W', B]

    def block(x, prefix):
        x = ad.conv_spatial(x, leaves[f"{prefix}.spatial.kernel"],
                            leaves[f"{prefix}.spatial.bias"])
        x = ad.conv_spectral(x, leaves[f"{prefix}.spectral.kernel"],
                             leaves[f"{prefix}.spectral.bias"])
        x = ad.channel_norm(x, leaves[f"{prefix}.norm.gamma"],
                            leaves[f"{prefix}.norm.beta"])
        return ad.leaky_relu(x, cfg.leaky_slope)

    skips = []
    for i in range(cfg.depth):
        x = block(x, f"enc{i}.block0")
        x = block(x, f"enc{i}.block1")
        skips.append(x)
        x = ad.maxpool2d_per_band(x)
    x = block(x, "bottleneck.block0")
    x = block(x, "bottleneck.block1")
    for i in reversed(range(cfg.depth)):
        x = ad.upsample2d_per_band(x)
        x = ad.concat_channels([x, skips[i]])
        x = block(x, f"dec{i}.block0")
    x = ad.conv_channel_mix(x, leaves["head.kernel"], leaves["head.bias"])
    x = ad.sigmoid(x)
    return ad.crop_to_cube(x, H, W)


def forward(net: ParamSet, z: np.ndarray) -> np.ndarray:
    """Eager forward map: cube in, denoised-estimate cube out, values in (0, 1)."""
    tape = Tape()
    leaves = make_leaves(tape, net, requires_grad=False)
    return forward_on_tape(tape, net, leaves, z).value
