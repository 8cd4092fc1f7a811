"""Tape-based reverse-mode automatic differentiation over float64 arrays.

A :class:`Tape` records nodes in creation order, which is by construction a
valid topological order, so the backward sweep is a single reversed pass.
Gradients accumulate by summation over all paths; the tape is rebuilt every
optimization step rather than compiled once.

The l1 subgradient at 0 is defined as 0 (``sign(0) == 0``).
"""

from __future__ import annotations

import numpy as np

from .ndtensor import ShapeError, _check_same_shape


class TapeError(RuntimeError):
    """Misuse of the tape: cross-tape operands, repeated backward, non-scalar loss."""


class Node:
    __slots__ = ("tape", "value", "parents", "backward_fn", "grad", "requires_grad")

    def __init__(self, tape, value, parents, backward_fn, requires_grad):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def grad_value(self) -> np.ndarray:
        """Accumulated gradient, or exact zeros if no path reached this node."""
        if self.grad is None:
            return np.zeros_like(self.value)
        return self.grad

    # operator sugar; non-Node scalars only via scale()
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return mul(self, other)
        return scale(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Workspace:
    """Shape-keyed recycler for large scratch arrays.

    An optimization loop that rebuilds its tape every iteration allocates
    the same big conv buffers over and over; routing them through a
    workspace and calling :meth:`recycle` once the tape is dead avoids the
    page-faulting cost of fresh allocations. Arrays taken from a workspace
    must not outlive the tape they were taken for.
    """

    def __init__(self):
        self._free: dict[tuple, list[np.ndarray]] = {}
        self._lent: list[np.ndarray] = []

    def take(self, shape) -> np.ndarray:
        stack = self._free.get(shape)
        arr = stack.pop() if stack else np.empty(shape)
        self._lent.append(arr)
        return arr

    def recycle(self) -> None:
        """Return every lent array to the pool; caller guarantees no live users."""
        for arr in self._lent:
            self._free.setdefault(arr.shape, []).append(arr)
        self._lent.clear()


class Tape:
    def __init__(self, workspace: Workspace | None = None):
        self.nodes: list[Node] = []
        self.workspace = workspace
        self._backward_done = False

    def leaf(self, value: np.ndarray, requires_grad: bool = False) -> Node:
        value = np.asarray(value, dtype=np.float64)
        node = Node(self, value, (), None, requires_grad)
        self.nodes.append(node)
        return node

    def scratch(self, shape) -> np.ndarray:
        if self.workspace is None:
            return np.empty(shape)
        return self.workspace.take(shape)


def _record(tape: Tape, value, parents, backward_fn) -> Node:
    requires_grad = any(p.requires_grad for p in parents)
    if not requires_grad:
        # constant subtree: keep the value, drop graph bookkeeping
        node = Node(tape, value, (), None, False)
    else:
        node = Node(tape, value, tuple(parents), backward_fn, True)
    tape.nodes.append(node)
    return node


def _tape_of(*nodes: Node) -> Tape:
    tape = nodes[0].tape
    for n in nodes[1:]:
        if n.tape is not tape:
            raise TapeError("operands live on different tapes")
    return tape


def _acc(node: Node, g: np.ndarray) -> None:
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = g
    else:
        node.grad = node.grad + g


def backward(loss: Node) -> None:
    """Populate gradients of every reachable grad-requiring node w.r.t. ``loss``."""
    tape = loss.tape
    if tape._backward_done:
        raise TapeError("backward already invoked on this tape")
    if loss.value.size != 1:
        raise TapeError(f"loss must be scalar, got shape {loss.value.shape}")
    tape._backward_done = True
    loss.grad = np.ones_like(loss.value)
    for node in reversed(tape.nodes):
        if node.grad is None or node.backward_fn is None:
            continue
        node.backward_fn(node.grad)
    # untouched grad-requiring leaves get exact zeros
    for node in tape.nodes:
        if node.requires_grad and not node.parents and node.grad is None:
            node.grad = np.zeros_like(node.value)


# ---------------------------------------------------------------------------
# elementwise and reduction ops


def add(a: Node, b: Node) -> Node:
    tape = _tape_of(a, b)
    _check_same_shape(a.value, b.value)

    def bw(g):
        _acc(a, g)
        _acc(b, g)

    return _record(tape, a.value + b.value, (a, b), bw)


def sub(a: Node, b: Node) -> Node:
    tape = _tape_of(a, b)
    _check_same_shape(a.value, b.value)

    def bw(g):
        _acc(a, g)
        _acc(b, -g)

    return _record(tape, a.value - b.value, (a, b), bw)


def mul(a: Node, b: Node) -> Node:
    tape = _tape_of(a, b)
    _check_same_shape(a.value, b.value)

    def bw(g):
        _acc(a, g * b.value)
        _acc(b, g * a.value)

    return _record(tape, a.value * b.value, (a, b), bw)


def scale(a: Node, c: float) -> Node:
    c = float(c)

    def bw(g):
        _acc(a, g * c)

    return _record(a.tape, a.value * c, (a,), bw)


def sum_all(a: Node) -> Node:
    def bw(g):
        _acc(a, np.full_like(a.value, float(g)))

    return _record(a.tape, np.sum(a.value), (a,), bw)


def sum_abs(a: Node) -> Node:
    def bw(g):
        _acc(a, np.sign(a.value) * float(g))

    return _record(a.tape, np.sum(np.abs(a.value)), (a,), bw)


def sum_sq(a: Node) -> Node:
    def bw(g):
        _acc(a, (2.0 * float(g)) * a.value)

    return _record(a.tape, np.sum(a.value * a.value), (a,), bw)


def diff(a: Node, axis: int) -> Node:
    """Tracked forward difference along ``axis`` (extent shrinks by one)."""
    if a.value.shape[axis] < 2:
        raise ShapeError(f"extent along axis {axis} must be >= 2")

    def bw(g):
        gx = np.zeros_like(a.value)
        gm = np.moveaxis(gx, axis, 0)
        gg = np.moveaxis(g, axis, 0)
        gm[1:] += gg
        gm[:-1] -= gg
        _acc(a, gx)

    return _record(a.tape, np.diff(a.value, axis=axis), (a,), bw)


# ---------------------------------------------------------------------------
# activations


def leaky_relu(a: Node, slope: float) -> Node:
    slope = float(slope)
    mask = a.value >= 0

    def bw(g):
        _acc(a, g * np.where(mask, 1.0, slope))

    return _record(a.tape, np.where(mask, a.value, slope * a.value), (a,), bw)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Node) -> Node:
    s = _sigmoid(a.value)

    def bw(g):
        _acc(a, g * (s * (1.0 - s)))

    return _record(a.tape, s, (a,), bw)


def channel_norm_fwd(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                     eps: float = 1e-5) -> np.ndarray:
    mu = x.mean(axis=(1, 2, 3), keepdims=True)
    var = x.var(axis=(1, 2, 3), keepdims=True)
    xhat = (x - mu) / np.sqrt(var + eps)
    return gamma[:, None, None, None] * xhat + beta[:, None, None, None]


def channel_norm(x: Node, gamma: Node, beta: Node, eps: float = 1e-5) -> Node:
    """Normalize each channel to zero mean / unit variance over (H, W, B),
    then apply the learnable per-channel affine. The renormalization keeps
    activation scales pinned across optimizer steps, which is what lets an
    untrained encoder-decoder survive aggressive ADAM updates."""
    tape = _tape_of(x, gamma, beta)
    if gamma.value.shape != (x.value.shape[0],) or beta.value.shape != (x.value.shape[0],):
        raise ShapeError("gamma/beta must be per-channel vectors")
    xv = x.value
    m = xv[0].size
    mu = xv.mean(axis=(1, 2, 3), keepdims=True)
    var = xv.var(axis=(1, 2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mu) * inv
    out = gamma.value[:, None, None, None] * xhat + beta.value[:, None, None, None]

    def bw(g):
        _acc(beta, g.sum(axis=(1, 2, 3)))
        _acc(gamma, (g * xhat).sum(axis=(1, 2, 3)))
        if x.requires_grad:
            dxhat = g * gamma.value[:, None, None, None]
            s1 = dxhat.sum(axis=(1, 2, 3), keepdims=True)
            s2 = (dxhat * xhat).sum(axis=(1, 2, 3), keepdims=True)
            _acc(x, (inv / m) * (m * dxhat - s1 - xhat * s2))

    return _record(tape, out, (x, gamma, beta), bw)


# ---------------------------------------------------------------------------
# structural ops on [C, H, W, B] feature stacks


def concat_channels(nodes: list[Node]) -> Node:
    tape = _tape_of(*nodes)
    sizes = [n.value.shape[0] for n in nodes]

    def bw(g):
        ofs = 0
        for n, c in zip(nodes, sizes):
            _acc(n, g[ofs:ofs + c])
            ofs += c

    return _record(tape, np.concatenate([n.value for n in nodes], axis=0), tuple(nodes), bw)


def maxpool2d_per_band(a: Node) -> Node:
    """2x2 stride-2 spatial max pooling, bands untouched. H and W must be even."""
    C, H, W, B = a.value.shape
    if H % 2 or W % 2:
        raise ShapeError(f"maxpool2d requires even spatial extents, got {H}x{W}")
    h2, w2 = H // 2, W // 2
    windows = (a.value.reshape(C, h2, 2, w2, 2, B)
               .transpose(0, 1, 3, 5, 2, 4)
               .reshape(C, h2, w2, B, 4))
    idx = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def bw(g):
        gw = np.zeros((C, h2, w2, B, 4))
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
        gx = (gw.reshape(C, h2, w2, B, 2, 2)
              .transpose(0, 1, 4, 2, 5, 3)
              .reshape(C, H, W, B))
        _acc(a, gx)

    return _record(a.tape, out, (a,), bw)


def upsample2d_per_band(a: Node) -> Node:
    """Nearest-neighbor 2x spatial upsampling, bands untouched."""
    C, H, W, B = a.value.shape
    out = a.value.repeat(2, axis=1).repeat(2, axis=2)

    def bw(g):
        _acc(a, g.reshape(C, H, 2, W, 2, B).sum(axis=(2, 4)))

    return _record(a.tape, out, (a,), bw)


def crop_to_cube(a: Node, h: int, w: int) -> Node:
    """Drop the (single) channel axis and keep the leading h x w spatial window."""
    if a.value.shape[0] != 1:
        raise ShapeError(f"crop_to_cube needs a single channel, got {a.value.shape[0]}")

    def bw(g):
        gx = np.zeros_like(a.value)
        gx[0, :h, :w, :] = g
        _acc(a, gx)

    return _record(a.tape, a.value[0, :h, :w, :].copy(), (a,), bw)


# ---------------------------------------------------------------------------
# convolutions (reflect-padded, shape-preserving)


def reflect_indices(n: int, pad: int) -> np.ndarray:
    """Source indices of a reflect pad (no edge repeat) of width ``pad``."""
    if n == 1:
        return np.zeros(1 + 2 * pad, dtype=np.intp)
    q = np.arange(-pad, n + pad)
    m = 2 * (n - 1)
    q = np.mod(q, m)
    return np.where(q < n, q, m - q).astype(np.intp)


def _unpad_adjoint(g: np.ndarray, n: int, pad: int, axis: int) -> np.ndarray:
    """Adjoint of the reflect pad along ``axis``: scatter-add padded rows home."""
    idx = reflect_indices(n, pad)
    gm = np.moveaxis(g, axis, 0)
    out = gm[pad:pad + n].copy()
    for q in range(pad):
        out[idx[q]] += gm[q]
    for q in range(pad + n, n + 2 * pad):
        out[idx[q]] += gm[q]
    return np.moveaxis(out, 0, axis)


def pad_spatial_reflect(x: np.ndarray, pad: int) -> np.ndarray:
    ih = reflect_indices(x.shape[1], pad)
    iw = reflect_indices(x.shape[2], pad)
    return x[:, ih[:, None], iw[None, :], :]


def pad_bands_reflect(x: np.ndarray, pad: int) -> np.ndarray:
    return x[..., reflect_indices(x.shape[3], pad)]


def _spatial_cols(x: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
    """im2col for the 3x3 spatial taps: [C, 3, 3, H, W, B], reflect padded."""
    C, H, W, B = x.shape
    xp = pad_spatial_reflect(x, 1)
    if cols is None:
        cols = np.empty((C, 3, 3, H, W, B))
    for i in range(3):
        for j in range(3):
            cols[:, i, j] = xp[:, i:i + H, j:j + W, :]
    return cols


def _spectral_cols(x: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
    """im2col for the 5 band taps: [C, 5, H, W, B], reflect padded."""
    C, H, W, B = x.shape
    xp = pad_bands_reflect(x, 2)
    if cols is None:
        cols = np.empty((C, 5, H, W, B))
    for t in range(5):
        cols[:, t] = xp[..., t:t + B]
    return cols


def _check_channels(x: np.ndarray, kernel: np.ndarray) -> None:
    if x.shape[0] != kernel.shape[1]:
        raise ShapeError(f"channel mismatch: input {x.shape[0]} vs kernel {kernel.shape[1]}")


def conv_spatial_fwd(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """out[o,h,w,b] = bias[o] + sum_{c,i,j} kernel[o,c,i,j] * xpad[c,h+i,w+j,b]."""
    _check_channels(x, kernel)
    C, H, W, B = x.shape
    cols = _spatial_cols(x)
    out = kernel.reshape(-1, C * 9) @ cols.reshape(C * 9, -1)
    out += bias[:, None]
    return out.reshape(kernel.shape[0], H, W, B)


def conv_spectral_fwd(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """out[o,h,w,b] = bias[o] + sum_{c,t} kernel[o,c,t] * xpad[c,h,w,b+t]."""
    _check_channels(x, kernel)
    C, H, W, B = x.shape
    cols = _spectral_cols(x)
    out = kernel.reshape(-1, C * 5) @ cols.reshape(C * 5, -1)
    out += bias[:, None]
    return out.reshape(kernel.shape[0], H, W, B)


def conv_channel_mix_fwd(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Pointwise (1x1x1) channel mix: out[o] = bias[o] + sum_c kernel[o,c] * x[c]."""
    _check_channels(x, kernel)
    C = x.shape[0]
    out = kernel @ np.ascontiguousarray(x).reshape(C, -1)
    out += bias[:, None]
    return out.reshape((kernel.shape[0],) + x.shape[1:])


def conv_spatial(x: Node, kernel: Node, bias: Node) -> Node:
    tape = _tape_of(x, kernel, bias)
    _check_channels(x.value, kernel.value)
    C, H, W, B = x.shape
    O = kernel.value.shape[0]
    n = H * W * B
    cols2 = _spatial_cols(x.value, tape.scratch((C, 3, 3, H, W, B))).reshape(C * 9, n)
    out = np.matmul(kernel.value.reshape(O, C * 9), cols2, out=tape.scratch((O, n)))
    out += bias.value[:, None]

    def bw(g):
        g2 = g.reshape(O, n)
        _acc(bias, g2.sum(axis=1))
        if kernel.requires_grad:
            _acc(kernel, (g2 @ cols2.T).reshape(kernel.value.shape))
        if x.requires_grad:
            gcols = np.matmul(kernel.value.reshape(O, C * 9).T, g2,
                              out=tape.scratch((C * 9, n))).reshape(C, 3, 3, H, W, B)
            gxp = tape.scratch((C, H + 2, W + 2, B))
            gxp.fill(0.0)
            for i in range(3):
                for j in range(3):
                    gxp[:, i:i + H, j:j + W, :] += gcols[:, i, j]
            gx = _unpad_adjoint(gxp, H, 1, axis=1)
            gx = _unpad_adjoint(gx, W, 1, axis=2)
            _acc(x, gx)

    return _record(tape, out.reshape(O, H, W, B), (x, kernel, bias), bw)


def conv_spectral(x: Node, kernel: Node, bias: Node) -> Node:
    tape = _tape_of(x, kernel, bias)
    _check_channels(x.value, kernel.value)
    C, H, W, B = x.shape
    O = kernel.value.shape[0]
    n = H * W * B
    cols2 = _spectral_cols(x.value, tape.scratch((C, 5, H, W, B))).reshape(C * 5, n)
    out = np.matmul(kernel.value.reshape(O, C * 5), cols2, out=tape.scratch((O, n)))
    out += bias.value[:, None]

    def bw(g):
        g2 = g.reshape(O, n)
        _acc(bias, g2.sum(axis=1))
        if kernel.requires_grad:
            _acc(kernel, (g2 @ cols2.T).reshape(kernel.value.shape))
        if x.requires_grad:
            gcols = np.matmul(kernel.value.reshape(O, C * 5).T, g2,
                              out=tape.scratch((C * 5, n))).reshape(C, 5, H, W, B)
            gxp = tape.scratch((C, H, W, B + 4))
            gxp.fill(0.0)
            for t in range(5):
                gxp[..., t:t + B] += gcols[:, t]
            _acc(x, _unpad_adjoint(gxp, B, 2, axis=3))

    return _record(tape, out.reshape(O, H, W, B), (x, kernel, bias), bw)


def conv_channel_mix(x: Node, kernel: Node, bias: Node) -> Node:
    tape = _tape_of(x, kernel, bias)
    out = conv_channel_mix_fwd(x.value, kernel.value, bias.value)
    C = x.shape[0]
    O = kernel.value.shape[0]
    x2 = x.value.reshape(C, -1)

    def bw(g):
        g2 = g.reshape(O, -1)
        _acc(bias, g2.sum(axis=1))
        _acc(kernel, g2 @ x2.T)
        if x.requires_grad:
            _acc(x, (kernel.value.T @ g2).reshape(x.value.shape))

    return _record(tape, out, (x, kernel, bias), bw)
