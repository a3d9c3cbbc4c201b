"""Minimal reverse-mode differentiation over numpy arrays.

Define-by-run: every operation on a Tensor records its parents and a
backward closure; calling backward() on a scalar output replays the
recorded graph in reverse. Double precision throughout so that
finite-difference checks at 1e-4 tolerance are meaningful.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad over axes that were broadcast to reach `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    # -- graph replay --------------------------------------------------

    def backward(self, seed=None):
        if self.data.size != 1:
            raise ValueError("backward requires a scalar output")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data) if seed is None else np.asarray(seed, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- primitives ----------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data, _parents=(self, other))

        def back(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g, self.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(g, other.shape)
        out._backward = back
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data, _parents=(self, other))

        def back(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g * other.data, self.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(g * self.data, other.shape)
        out._backward = back
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __truediv__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data / other.data, _parents=(self, other))

        def back(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g / other.data, self.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(-g * self.data / (other.data ** 2), other.shape)
        out._backward = back
        return out

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        out = Tensor(self.data ** exponent, _parents=(self,))

        def back(g):
            if self.requires_grad:
                self.grad += g * exponent * self.data ** (exponent - 1)
        out._backward = back
        return out

    def __matmul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data @ other.data, _parents=(self, other))

        a, b = self.data, other.data

        def back(g):
            if self.requires_grad:
                if a.ndim == 2 and b.ndim == 2:
                    self.grad += g @ b.T
                elif a.ndim == 2:  # matrix @ vector
                    self.grad += np.outer(g, b)
                elif b.ndim == 2:  # vector @ matrix
                    self.grad += b @ g
                else:              # vector @ vector
                    self.grad += g * b
            if other.requires_grad:
                if a.ndim == 2 and b.ndim == 2:
                    other.grad += a.T @ g
                elif a.ndim == 2:
                    other.grad += a.T @ g
                elif b.ndim == 2:
                    other.grad += np.outer(a, g)
                else:
                    other.grad += g * a
        out._backward = back
        return out

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,))

        def back(g):
            if not self.requires_grad:
                return
            if axis is None:
                self.grad += np.broadcast_to(g, self.shape)
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self.grad += np.broadcast_to(gg, self.shape)
        out._backward = back
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self.grad += g.reshape(self.shape)
        out._backward = back
        return out

    def exp(self):
        out = Tensor(np.exp(self.data), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self.grad += g * out.data
        out._backward = back
        return out

    def log(self):
        out = Tensor(np.log(self.data), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self.grad += g / self.data
        out._backward = back
        return out

    def sigmoid(self):
        s = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(s, _parents=(self,))

        def back(g):
            if self.requires_grad:
                self.grad += g * s * (1.0 - s)
        out._backward = back
        return out

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self.grad += g * (self.data > 0.0)
        out._backward = back
        return out

    def abs(self):
        # subgradient 0 at the kink
        out = Tensor(np.abs(self.data), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self.grad += g * np.sign(self.data)
        out._backward = back
        return out

    def clip(self, lo: float, hi: float):
        out = Tensor(np.clip(self.data, lo, hi), _parents=(self,))
        inside = (self.data >= lo) & (self.data <= hi)

        def back(g):
            if self.requires_grad:
                self.grad += g * inside
        out._backward = back
        return out

    def gather(self, index):
        index = np.asarray(index, dtype=int)
        out = Tensor(self.data[index], _parents=(self,))

        def back(g):
            if self.requires_grad:
                np.add.at(self.grad, index, g)
        out._backward = back
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x)


def parameter(x) -> Tensor:
    return Tensor(np.array(x, dtype=np.float64), requires_grad=True)


def maximum(a, b) -> Tensor:
    """Elementwise max; ties route the gradient to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data >= b.data
    out = Tensor(np.where(take_a, a.data, b.data), _parents=(a, b))

    def back(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g * take_a, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * ~take_a, b.shape)
    out._backward = back
    return out


def scatter_sum(src: Tensor, index, size: int) -> Tensor:
    """out[k] = sum of src rows i with index[i] == k."""
    index = np.asarray(index, dtype=int)
    shape = (size,) + src.data.shape[1:]
    data = np.zeros(shape)
    np.add.at(data, index, src.data)
    out = Tensor(data, _parents=(src,))

    def back(g):
        if src.requires_grad:
            src.grad += g[index]
    out._backward = back
    return out


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 _parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.grad += g[tuple(sl)]
    out._backward = back
    return out


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.stack([t.data for t in tensors], axis=axis), _parents=tuple(tensors))

    def back(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.grad += np.take(g, i, axis=axis)
    out._backward = back
    return out


def norm2(x: Tensor, axis=-1) -> Tensor:
    """Euclidean norm along an axis; subgradient 0 at the origin."""
    x = as_tensor(x)
    n = np.sqrt((x.data ** 2).sum(axis=axis))
    out = Tensor(n, _parents=(x,))

    def back(g):
        if x.requires_grad:
            safe = np.where(n > 0.0, n, 1.0)
            gg = np.expand_dims(g / safe, axis)
            x.grad += gg * x.data * np.expand_dims(n > 0.0, axis)
    out._backward = back
    return out


def softmax(x: Tensor, axis=-1) -> Tensor:
    shift = constant(x.data.max(axis=axis, keepdims=True))
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis=-1) -> Tensor:
    shift = constant(x.data.max(axis=axis, keepdims=True))
    z = x - shift
    return z - z.exp().sum(axis=axis, keepdims=True).log()


def gradcheck(f, theta: np.ndarray, h: float = 1e-5) -> float:
    """Compare analytic gradients of f against central differences.

    f maps a flat parameter vector to (scalar value, gradient vector).
    Returns the max relative error over coordinates, with denominator
    max(1e-8, |analytic| + |numeric|).
    """
    theta = np.asarray(theta, dtype=np.float64)
    _, grad = f(theta)
    grad = np.asarray(grad, dtype=np.float64)
    worst = 0.0
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        num = (f(tp)[0] - f(tm)[0]) / (2.0 * h)
        denom = max(1e-8, abs(grad[i]) + abs(num))
        worst = max(worst, abs(grad[i] - num) / denom)
    return worst
