"""Reverse-mode automatic differentiation over dense numpy arrays.

Just enough machinery for the networks in this package: elementwise math,
matmul, strided conv, reductions, concat. Graphs are built only when some
input requires gradients, so inference and target-network passes stay
allocation-light. Training runs float32; gradient-check tests build float64
tensors and the ops preserve whatever dtype they are given.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def item(self) -> float:
        return float(self.data)

    # -- graph plumbing -----------------------------------------------------

    @staticmethod
    def _op(data, parents, backward) -> "Tensor":
        out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += _unbroadcast(np.asarray(grad), self.data.shape)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar loss")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self._accumulate(np.ones_like(self.data))
        for t in reversed(topo):
            if t._backward is not None:
                t._backward(t.grad)

    # -- arithmetic -----------------------------------------------------------

    def _wrap(self, x) -> "Tensor":
        # plain numbers adopt this tensor's dtype so float32 graphs stay float32
        if isinstance(x, Tensor):
            return x
        arr = np.asarray(x)
        if np.issubdtype(arr.dtype, np.floating) and arr.dtype != self.data.dtype:
            arr = arr.astype(self.data.dtype)
        return Tensor(arr)

    def __add__(self, other):
        other = self._wrap(other)

        def back(g):
            self.requires_grad and self._accumulate(g)
            other.requires_grad and other._accumulate(g)

        return Tensor._op(self.data + other.data, (self, other), back)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) + (-self)

    def __mul__(self, other):
        other = self._wrap(other)

        def back(g):
            self.requires_grad and self._accumulate(g * other.data)
            other.requires_grad and other._accumulate(g * self.data)

        return Tensor._op(self.data * other.data, (self, other), back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other)

        def back(g):
            self.requires_grad and self._accumulate(g / other.data)
            other.requires_grad and other._accumulate(-g * self.data / other.data**2)

        return Tensor._op(self.data / other.data, (self, other), back)

    def __pow__(self, p: float):
        def back(g):
            self._accumulate(g * p * self.data ** (p - 1))

        return Tensor._op(self.data**p, (self,), back)

    def __matmul__(self, other):
        other = self._wrap(other)

        def back(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        return Tensor._op(self.data @ other.data, (self, other), back)

    # -- elementwise nonlinearities ---------------------------------------------

    def relu(self):
        mask = self.data > 0.0

        def back(g):
            self._accumulate(g * mask)

        return Tensor._op(self.data * mask, (self,), back)

    def tanh(self):
        y = np.tanh(self.data)

        def back(g):
            self._accumulate(g * (1.0 - y * y))

        return Tensor._op(y, (self,), back)

    def exp(self):
        y = np.exp(self.data)

        def back(g):
            self._accumulate(g * y)

        return Tensor._op(y, (self,), back)

    def log(self):
        def back(g):
            self._accumulate(g / self.data)

        return Tensor._op(np.log(self.data), (self,), back)

    def softplus(self):
        # log(1 + e^x), computed without overflow; derivative is sigmoid(x)
        y = np.maximum(self.data, 0.0) + np.log1p(np.exp(-np.abs(self.data)))

        def back(g):
            self._accumulate(g / (1.0 + np.exp(-self.data)))

        return Tensor._op(y, (self,), back)

    def clamp(self, lo: float, hi: float):
        mask = (self.data >= lo) & (self.data <= hi)

        def back(g):
            self._accumulate(g * mask)

        return Tensor._op(np.clip(self.data, lo, hi), (self,), back)

    # -- reductions / shaping ------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        def back(g):
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.data.shape))
            else:
                gx = g if keepdims else np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(gx, self.data.shape))

        return Tensor._op(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        old = self.data.shape

        def back(g):
            self._accumulate(g.reshape(old))

        return Tensor._op(self.data.reshape(*shape), (self,), back)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; ties route the gradient to the first argument."""
    mask = a.data <= b.data

    def back(g):
        a.requires_grad and a._accumulate(g * mask)
        b.requires_grad and b._accumulate(g * ~mask)

    return Tensor._op(np.minimum(a.data, b.data), (a, b), back)


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t._accumulate(g[tuple(index)])

    return Tensor._op(np.concatenate([t.data for t in tensors], axis=axis),
                      tuple(tensors), back)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 2, padding: int = 1) -> Tensor:
    """NCHW convolution via im2col; backward scatters with per-offset slice adds."""
    B, C, H, W = x.data.shape
    O, _, kh, kw = w.data.shape
    oh = (H + 2 * padding - kh) // stride + 1
    ow = (W + 2 * padding - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    view = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    view = view[:, :, ::stride, ::stride]                    # (B, C, oh, ow, kh, kw)
    cols = view.transpose(0, 2, 3, 1, 4, 5).reshape(B, oh * ow, C * kh * kw)
    wflat = w.data.reshape(O, -1)
    out = cols @ wflat.T + b.data                             # (B, oh*ow, O)
    out = out.transpose(0, 2, 1).reshape(B, O, oh, ow)

    def back(g):
        gflat = g.reshape(B, O, oh * ow).transpose(0, 2, 1)   # (B, oh*ow, O)
        if b.requires_grad:
            b._accumulate(gflat.sum(axis=(0, 1)))
        if w.requires_grad:
            gw = np.tensordot(gflat, cols, axes=([0, 1], [0, 1]))   # (O, C*kh*kw)
            w._accumulate(gw.reshape(O, C, kh, kw))
        if x.requires_grad:
            gcols = (gflat @ wflat).reshape(B, oh, ow, C, kh, kw)
            gcols = gcols.transpose(0, 3, 1, 2, 4, 5)         # (B, C, oh, ow, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + stride * oh : stride,
                        j : j + stride * ow : stride] += gcols[..., i, j]
            if padding:
                gxp = gxp[:, :, padding:-padding, padding:-padding]
            x._accumulate(gxp)

    return Tensor._op(out, (x, w, b), back)


class Adam:
    def __init__(self, params: list[Tensor], lr: float = 3e-4,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            mhat = m / (1.0 - self.b1**self.t)
            vhat = v / (1.0 - self.b2**self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t,
                "m": [m.copy() for m in self.m],
                "v": [v.copy() for v in self.v]}

    def load_state_dict(self, state: dict):
        self.t = int(state["t"])
        if len(state["m"]) != len(self.params):
            raise ValueError("optimizer state does not match parameter count")
        self.m = [np.array(m, dtype=p.data.dtype) for m, p in zip(state["m"], self.params)]
        self.v = [np.array(v, dtype=p.data.dtype) for v, p in zip(state["v"], self.params)]
