"""Small tape-based reverse-mode autodiff over dense float64 arrays.

Every op returns a :class:`Tensor` that remembers its parents and a closure
mapping the output adjoint to parent adjoints. ``backward`` walks the graph in
reverse topological order. Inside ``no_grad()`` ops skip recording, which is
what inference uses.
"""
from __future__ import annotations

import contextlib
import math

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "op", "requires_grad")

    def __init__(self, value, parents=(), backward_fn=None, op="leaf", requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.value.shape})"

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.value.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.value.shape}")
        order = _topo_order(self)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node.backward_fn is None or node.grad is None:
                continue
            parent_grads = node.backward_fn(node.grad)
            for parent, g in zip(node.parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.array(g, dtype=np.float64, copy=True)
                else:
                    parent.grad = parent.grad + g

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(lift(other)))

    def __rsub__(self, other):
        return add(lift(other), neg(self))

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported; use multiply with a reciprocal")
        return scale(self, 1.0 / other)


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def parameter(value):
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True)


def lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value, parents, backward_fn, op):
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(value, parents, backward_fn, op, requires_grad=True)
    return Tensor(value, op=op)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _binary(op, fn, a, b):
    try:
        return fn(a.value, b.value)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b):
    a, b = lift(a), lift(b)
    out = _binary("add", np.add, a, b)
    sa, sb = a.shape, b.shape
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def neg(a):
    return _make(-a.value, (a,), lambda g: (-g,), "neg")


def scale(a, c):
    c = float(c)
    return _make(a.value * c, (a,), lambda g: (g * c,), "scale")


def add_scalar(a, c):
    return _make(a.value + float(c), (a,), lambda g: (g,), "add_scalar")


def multiply(a, b):
    a, b = lift(a), lift(b)
    out = _binary("multiply", np.multiply, a, b)
    av, bv = a.value, b.value
    sa, sb = a.shape, b.shape
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g * bv, sa), _unbroadcast(g * av, sb)), "multiply")


def matmul(a, b):
    a, b = lift(a), lift(b)
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} and {bv.shape}")
    out = av @ bv

    def back(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)

    return _make(out, (a, b), back, "matmul")


def transpose(a, axes=None):
    axes = tuple(range(a.value.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.value, axes), (a,), lambda g: (np.transpose(g, inv),), "transpose")


def swapaxes(a, i, j):
    return _make(np.swapaxes(a.value, i, j), (a,), lambda g: (np.swapaxes(g, i, j),), "swapaxes")


def reshape(a, shape):
    old = a.shape
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _make(out, (a,), back, "sum")


def mean(a, axis=None, keepdims=False):
    count = a.value.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def exp(a):
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    av = a.value
    if np.any(av <= 0):
        raise ValueError("log: non-positive input")
    return _make(np.log(av), (a,), lambda g: (g / av,), "log")


def sigmoid(a):
    out = _sigmoid(a.value)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def log_sigmoid(a):
    """log(sigmoid(a)) computed without overflow."""
    x = a.value
    out = -np.logaddexp(0.0, -x)
    return _make(out, (a,), lambda g: (g * _sigmoid(-x),), "log_sigmoid")


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715


def gelu(a):
    # tanh approximation
    x = a.value
    x2 = x * x
    inner = _GELU_C * x * (1.0 + _GELU_K * x2)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def back(g):
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_K * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner),)

    return _make(out, (a,), back, "gelu")


def row_softmax(a):
    """Softmax along the last axis. Entries equal to -inf get probability 0."""
    x = a.value
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    p = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _make(p, (a,), back, "row_softmax")


def log_softmax(a):
    x = a.value
    m = np.max(x, axis=-1, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=-1, keepdims=True))
    out = x - lse
    p = np.exp(out)

    def back(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return _make(out, (a,), back, "log_softmax")


def layer_norm(a, eps=1e-5):
    """Normalize the last axis to zero mean, unit variance (no affine)."""
    x = a.value
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def back(g):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - xhat * gx),)

    return _make(xhat, (a,), back, "layer_norm")


def select_rows(a, index, axis=0):
    """Gather entries along ``axis`` by integer index (duplicates allowed)."""
    index = np.atleast_1d(np.asarray(index, dtype=np.int64))
    shape = a.shape
    out = np.take(a.value, index, axis=axis)

    def back(g):
        full = np.zeros(shape)
        np.add.at(np.moveaxis(full, axis, 0), index, np.moveaxis(g, axis, 0))
        return (full,)

    return _make(out, (a,), back, "select_rows")


def take_along_last(a, index):
    """out[..., 0] = a[..., index[...]]; used to read log-probs of chosen actions."""
    index = np.asarray(index)[..., None]
    shape = a.shape
    out = np.take_along_axis(a.value, index, axis=-1)[..., 0]

    def back(g):
        full = np.zeros(shape)
        np.put_along_axis(full, index, g[..., None], axis=-1)
        return (full,)

    return _make(out, (a,), back, "take_along_last")


def concat_cols(tensors):
    tensors = [lift(t) for t in tensors]
    lead = {t.shape[:-1] for t in tensors}
    if len(lead) != 1:
        raise ShapeError(f"concat_cols: mismatched leading shapes {[t.shape for t in tensors]}")
    widths = [t.shape[-1] for t in tensors]
    splits = np.cumsum(widths)[:-1]
    out = np.concatenate([t.value for t in tensors], axis=-1)
    return _make(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=-1)), "concat_cols")


# optimizers --------------------------------------------------------------

def sgd_step(params, grads, lr):
    """Gradient *ascent*: theta <- theta + lr * g."""
    for p, g in zip(params, grads):
        if g is not None:
            p += lr * g


class AdamState:
    def __init__(self, shapes):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam ascent step on ``params`` (arrays updated in place)."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p += lr * (m / c1) / (np.sqrt(v / c2) + eps)
