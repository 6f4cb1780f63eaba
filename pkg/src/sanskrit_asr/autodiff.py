"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Tensors record their producing operation; backward() topologically sorts the
tape and accumulates gradients. Only the primitives the transformer needs are
implemented, and every composite (layer norm, attention, loss) is built from
them so finite differences can certify the whole stack.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np
from scipy.special import erf

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape construction (inference paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False, _prev=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._prev = _prev

    # construction helper: result tensor participating in the tape only when
    # gradients are enabled and some input needs them
    @staticmethod
    def _result(data, inputs):
        track = _GRAD_ENABLED and any(t.requires_grad for t in inputs)
        return Tensor(data, requires_grad=track, _prev=tuple(inputs) if track else ())

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def _accum(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # arithmetic -----------------------------------------------------------
    @staticmethod
    def _wrap(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))

    def __add__(self, other):
        other = Tensor._wrap(other)
        out = Tensor._result(self.data + other.data, (self, other))
        if out.requires_grad:
            def bwd(g):
                self._accum(_unbroadcast(g, self.data.shape))
                other._accum(_unbroadcast(g, other.data.shape))
            out._backward = bwd
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = Tensor._wrap(other)
        out = Tensor._result(self.data * other.data, (self, other))
        if out.requires_grad:
            def bwd(g):
                self._accum(_unbroadcast(g * other.data, self.data.shape))
                other._accum(_unbroadcast(g * self.data, other.data.shape))
            out._backward = bwd
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-Tensor._wrap(other))

    def __rsub__(self, other):
        return Tensor._wrap(other) + (-self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other**-1.0
        return self * (1.0 / other)

    def __pow__(self, p: float):
        out = Tensor._result(self.data**p, (self,))
        if out.requires_grad:
            def bwd(g):
                self._accum(g * p * self.data ** (p - 1))
            out._backward = bwd
        return out

    def __matmul__(self, other):
        if self.data.ndim < 2 or other.data.ndim < 2:
            raise ValueError("matmul operands must be at least 2-D")
        out = Tensor._result(self.data @ other.data, (self, other))
        if out.requires_grad:
            def bwd(g):
                a, b = self.data, other.data
                self._accum(_unbroadcast(g @ b.swapaxes(-1, -2), a.shape))
                other._accum(_unbroadcast(a.swapaxes(-1, -2) @ g, b.shape))
            out._backward = bwd
        return out

    # shape ops ------------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor._result(self.data.reshape(shape), (self,))
        if out.requires_grad:
            src = self.data.shape
            out._backward = lambda g: self._accum(g.reshape(src))
        return out

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.data.ndim)))
        out = Tensor._result(self.data.transpose(axes), (self,))
        if out.requires_grad:
            inv = np.argsort(axes)
            out._backward = lambda g: self._accum(g.transpose(inv))
        return out

    def __getitem__(self, key):
        out = Tensor._result(self.data[key], (self,))
        if out.requires_grad:
            def bwd(g):
                full = np.zeros_like(self.data)
                full[key] = g
                self._accum(full)
            out._backward = bwd
        return out

    # reductions -----------------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        out = Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out.requires_grad:
            src = self.data.shape

            def bwd(g):
                gg = g
                if axis is not None and not keepdims:
                    gg = np.expand_dims(gg, axis)
                self._accum(np.broadcast_to(gg, src))
            out._backward = bwd
        return out

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


# elementwise functions ------------------------------------------------------
def exp(t: Tensor) -> Tensor:
    out = Tensor._result(np.exp(t.data), (t,))
    if out.requires_grad:
        out._backward = lambda g: t._accum(g * out.data)
    return out


def log(t: Tensor) -> Tensor:
    out = Tensor._result(np.log(t.data), (t,))
    if out.requires_grad:
        out._backward = lambda g: t._accum(g / t.data)
    return out


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(t: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x) with the Gaussian CDF via erf."""
    x = t.data
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    out = Tensor._result(x * cdf, (t,))
    if out.requires_grad:
        def bwd(g):
            t._accum(g * (cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)))
        out._backward = bwd
    return out


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    x = t.data
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor._result(y, (t,))
    if out.requires_grad:
        def bwd(g):
            dot = (g * y).sum(axis=axis, keepdims=True)
            t._accum(y * (g - dot))
        out._backward = bwd
    return out


def log_softmax(t: Tensor, axis: int = -1) -> Tensor:
    x = t.data
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = Tensor._result(shifted - lse, (t,))
    if out.requires_grad:
        sm = np.exp(shifted - lse)

        def bwd(g):
            t._accum(g - sm * g.sum(axis=axis, keepdims=True))
        out._backward = bwd
    return out


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup table[ids]; gradient scatters with duplicate accumulation."""
    ids = np.asarray(ids)
    out = Tensor._result(table.data[ids], (table,))
    if out.requires_grad:
        def bwd(g):
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            table._accum(full)
        out._backward = bwd
    return out


def take_along_last(t: Tensor, idx: np.ndarray) -> Tensor:
    """out[..., j] = t[..., j, idx[..., j]]; one element per row."""
    idx = np.asarray(idx)
    picked = np.take_along_axis(t.data, idx[..., None], axis=-1)[..., 0]
    out = Tensor._result(picked, (t,))
    if out.requires_grad:
        def bwd(g):
            full = np.zeros_like(t.data)
            np.put_along_axis(full, idx[..., None], g[..., None], axis=-1)
            t._accum(full)
        out._backward = bwd
    return out


def conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding=(0, 0)) -> Tensor:
    """1-D convolution: x (B, C_in, T), w (C_out, C_in, K) -> (B, C_out, T_out)."""
    pl, pr = padding
    xd = np.pad(x.data, ((0, 0), (0, 0), (pl, pr)))
    k = w.data.shape[-1]
    windows = np.lib.stride_tricks.sliding_window_view(xd, k, axis=2)[:, :, ::stride]
    out_data = np.einsum("bitk,oik->bot", windows, w.data) + b.data[None, :, None]
    out = Tensor._result(out_data, (x, w, b))
    if out.requires_grad:
        t_out = out_data.shape[-1]

        def bwd(g):
            w._accum(np.einsum("bot,bitk->oik", g, windows))
            b._accum(g.sum(axis=(0, 2)))
            if x.requires_grad:
                gx_p = np.zeros_like(xd)
                for tap in range(k):
                    sl = slice(tap, tap + stride * (t_out - 1) + 1, stride)
                    gx_p[:, :, sl] += np.einsum("bot,oi->bit", g, w.data[:, :, tap])
                end = gx_p.shape[-1] - pr
                x._accum(gx_p[:, :, pl:end])
        out._backward = bwd
    return out


def dropout(t: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when p == 0 or not training."""
    if not training or p == 0.0:
        return t
    mask = (rng.random(t.data.shape) >= p) / (1.0 - p)
    return t * Tensor(mask)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = (var + eps) ** -0.5
    return xc * inv * gain + bias
