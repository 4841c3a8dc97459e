"""A small reverse-mode autodiff over float64 numpy arrays.

Every operation records its parents and a closure that pushes the output
gradient back to them. ``Tensor.backward`` walks the graph in reverse
topological order.
"""

from __future__ import annotations

import numba
import numpy as np


class ShapeError(ValueError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False, parents=(), op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = None
        self.op = op

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'})"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def _accum(self, g: np.ndarray):
        # never mutates in place, so holding a reference to ``g`` is safe
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, grad: np.ndarray | None = None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accum(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # intermediate results: free the gradient once pushed back
                    node.grad = None if node is not self else node.grad

    # ------------------------------------------------------------------
    # elementwise arithmetic

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def relu(self):
        return relu(self)

    def abs(self):
        return absolute(self)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, op, backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req, parents=parents if req else (), op=op)
    if req:
        out._backward = backward
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), "add", bw)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _node(-a.data, (a,), "neg", lambda g: a._accum(-g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), "mul", bw)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g * out / b.data, b.shape))

    return _node(out, (a, b), "div", bw)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")

    def bw(g):
        if a.requires_grad:
            a._accum(g @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ g)

    return _node(a.data @ b.data, (a, b), "matmul", bw)


def linear(x, w, b=None) -> Tensor:
    """``x @ w + b`` as a single tape node."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {w.shape}")
    out = x.data @ w.data
    parents = (x, w)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (w.shape[1],):
            raise ShapeError(f"linear: bias {b.shape} does not match weight {w.shape}")
        out = out + b.data
        parents = (x, w, b)

    def bw(g):
        if x.requires_grad:
            x._accum(g @ w.data.T)
        if w.requires_grad:
            w._accum(x.data.T @ g)
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=0))

    return _node(out, parents, "linear", bw)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _node(a.data * mask, (a,), "relu", lambda g: a._accum(g * mask))


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    return _node(np.abs(a.data), (a,), "abs", lambda g: a._accum(g * sign))


def reduce_sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(g, a.shape))

    return _node(out, (a,), "sum", bw)


def reduce_mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return reduce_sum(a, axis, keepdims) * (1.0 / n)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _node(a.data.reshape(shape), (a,), "reshape", lambda g: a._accum(g.reshape(a.shape)))


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a._accum(full)

    return _node(a.data[idx], (a,), "getitem", bw)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ax = axis % tensors[0].ndim
    for t in tensors[1:]:
        if t.ndim != tensors[0].ndim or any(
            t.shape[d] != tensors[0].shape[d] for d in range(t.ndim) if d != ax
        ):
            raise ShapeError(f"concat: shapes {[t.shape for t in tensors]} differ off axis {axis}")
    sizes = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def bw(g):
        for t, part in zip(tensors, np.split(g, sizes, axis=ax)):
            if t.requires_grad:
                t._accum(part)

    return _node(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), "concat", bw)


def norm(a, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``; the gradient at a zero vector is taken as zero."""
    a = as_tensor(a)
    out = np.sqrt(np.sum(a.data * a.data, axis=axis))

    def bw(g):
        safe = np.where(out > 0, out, 1.0)
        scale = np.where(out > 0, g / safe, 0.0)
        a._accum(a.data * np.expand_dims(scale, axis))

    return _node(out, (a,), "norm", bw)


def set_maxpool(a) -> Tensor:
    """Max over the point axis of a (B, N, C) tensor -> (B, C).

    The gradient goes to the first point attaining the maximum.
    """
    a = as_tensor(a)
    if a.ndim != 3:
        raise ShapeError(f"set_maxpool expects (B, N, C), got {a.shape}")
    arg = a.data.argmax(axis=1)  # (B, C)
    out = np.take_along_axis(a.data, arg[:, None, :], axis=1)[:, 0, :]

    def bw(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, arg[:, None, :], g[:, None, :], axis=1)
        a._accum(full)

    return _node(out, (a,), "maxpool", bw)


def batchnorm(x, gamma, beta, eps: float = 1e-5, running=None):
    """Normalize the columns of a 2D tensor.

    With ``running=None`` the batch statistics are used and returned
    alongside the output as ``(out, mean, var)``; otherwise ``running`` is a
    ``(mean, var)`` pair of arrays and only the output is returned.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batchnorm: input {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    if running is not None:
        mean, var = running
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mean) * inv

        def bw_eval(g):
            if x.requires_grad:
                x._accum(g * gamma.data * inv)
            if gamma.requires_grad:
                gamma._accum((g * xhat).sum(axis=0))
            if beta.requires_grad:
                beta._accum(g.sum(axis=0))

        return _node(xhat * gamma.data + beta.data, (x, gamma, beta), "bn_eval", bw_eval)

    xd = np.ascontiguousarray(x.data)
    y, xhat, mean, var, inv = _bn_forward(xd, gamma.data, beta.data, eps)

    def bw(g):
        dx, dgamma, dbeta = _bn_backward(np.ascontiguousarray(g), xhat, gamma.data, inv)
        if gamma.requires_grad:
            gamma._accum(dgamma)
        if beta.requires_grad:
            beta._accum(dbeta)
        if x.requires_grad:
            x._accum(dx)

    out = _node(y, (x, gamma, beta), "bn_train", bw)
    return out, mean, var


@numba.njit(cache=True)
def _bn_forward(x, gamma, beta, eps):
    n, c = x.shape
    mean = np.zeros(c)
    var = np.zeros(c)
    for i in range(n):
        for j in range(c):
            mean[j] += x[i, j]
    mean /= n
    for i in range(n):
        for j in range(c):
            d = x[i, j] - mean[j]
            var[j] += d * d
    var /= n
    inv = 1.0 / np.sqrt(var + eps)
    xhat = np.empty_like(x)
    y = np.empty_like(x)
    for i in range(n):
        for j in range(c):
            h = (x[i, j] - mean[j]) * inv[j]
            xhat[i, j] = h
            y[i, j] = h * gamma[j] + beta[j]
    return y, xhat, mean, var, inv


@numba.njit(cache=True)
def _bn_backward(g, xhat, gamma, inv):
    n, c = g.shape
    dgamma = np.zeros(c)
    dbeta = np.zeros(c)
    for i in range(n):
        for j in range(c):
            dgamma[j] += g[i, j] * xhat[i, j]
            dbeta[j] += g[i, j]
    dx = np.empty_like(g)
    for i in range(n):
        for j in range(c):
            # batch-statistics gradient with the mean and variance paths folded in
            dx[i, j] = gamma[j] * inv[j] / n * (n * g[i, j] - dbeta[j] - xhat[i, j] * dgamma[j])
    return dx, dgamma, dbeta
