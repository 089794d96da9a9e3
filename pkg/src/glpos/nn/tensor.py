"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op builds a node holding its output array, its parent tensors and a
closure that pushes the output gradient back to the parents. ``backward``
walks the graph once in reverse topological order.
"""
from __future__ import annotations

import logging

import numpy as np

from .. import kernels

logger = logging.getLogger(__name__)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accum(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior buffers are not needed after propagation
                node.grad = None

    # operators
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __neg__(self): return mul(self, -1.0)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, idx): return getitem(self, idx)

    def sum(self, axis=None, keepdims=False): return tsum(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 else shape)
    def transpose(self, *axes): return transpose(self, axes or None)


def Parameter(data, name=None):
    return Tensor(data, requires_grad=True, name=name)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward):
    parents = tuple(p for p in parents if isinstance(p, Tensor))
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=parents if req else (),
                  _backward=backward if req else None)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# --- elementwise -------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.requires_grad: a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad: b._accum(_unbroadcast(g, b.shape))
    return _node(a.data + b.data, (a, b), bw)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.requires_grad: a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad: b._accum(_unbroadcast(-g, b.shape))
    return _node(a.data - b.data, (a, b), bw)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.requires_grad: a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad: b._accum(_unbroadcast(g * a.data, b.shape))
    return _node(a.data * b.data, (a, b), bw)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.requires_grad: a._accum(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad: b._accum(_unbroadcast(-g * a.data / b.data ** 2, b.shape))
    return _node(a.data / b.data, (a, b), bw)


def exp(x):
    out = np.exp(x.data)
    return _node(out, (x,), lambda g: x._accum(g * out))


def log(x):
    return _node(np.log(x.data), (x,), lambda g: x._accum(g / x.data))


def tanh(x):
    out = np.tanh(x.data)
    return _node(out, (x,), lambda g: x._accum(g * (1.0 - out * out)))


def sigmoid(x):
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _node(out, (x,), lambda g: x._accum(g * out * (1.0 - out)))


def relu(x):
    pos = x.data > 0
    return _node(np.where(pos, x.data, 0.0), (x,), lambda g: x._accum(g * pos))


def leaky_relu(x, slope=0.2):
    pos = x.data > 0
    return _node(np.where(pos, x.data, slope * x.data), (x,),
                 lambda g: x._accum(np.where(pos, g, slope * g)))


def elu(x):
    pos = x.data > 0
    em1 = np.expm1(np.minimum(x.data, 0.0))
    return _node(np.where(pos, x.data, em1), (x,),
                 lambda g: x._accum(np.where(pos, g, g * (em1 + 1.0))))


# --- shape and reductions ------------------------------------------------------

def tsum(x, axis=None, keepdims=False):
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accum(np.broadcast_to(g, x.shape))
    return _node(out, (x,), bw)


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return tsum(x, axis, keepdims) * (1.0 / n)


def reshape(x, shape):
    return _node(x.data.reshape(shape), (x,), lambda g: x._accum(g.reshape(x.shape)))


def transpose(x, axes=None):
    inv = None if axes is None else np.argsort(axes)
    return _node(np.transpose(x.data, axes), (x,), lambda g: x._accum(np.transpose(g, inv)))


def _is_basic(idx):
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (int, slice, type(None), type(Ellipsis))) for p in parts)


def getitem(x, idx):
    basic = _is_basic(idx)

    def bw(g):
        full = np.zeros_like(x.data)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        x._accum(full)
    return _node(x.data[idx], (x,), bw)


def take_rows(x, idx):
    """x[idx] along axis 0 for an integer index array (gather)."""
    idx = np.asarray(idx, dtype=np.int64)

    def bw(g):
        x._accum(kernels.segment_sum(g, idx, x.shape[0]))
    return _node(x.data[idx], (x,), bw)


def concat(xs, axis=-1):
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        for x, part in zip(xs, np.split(g, cuts, axis=axis)):
            if x.requires_grad:
                x._accum(part)
    return _node(np.concatenate([x.data for x in xs], axis=axis), xs, bw)


def stack(xs, axis=0):
    xs = [as_tensor(x) for x in xs]

    def bw(g):
        for k, x in enumerate(xs):
            if x.requires_grad:
                x._accum(np.take(g, k, axis=axis))
    return _node(np.stack([x.data for x in xs], axis=axis), xs, bw)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
            a._accum(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            if a.ndim == 1:
                gb = np.multiply.outer(a.data, g)
            else:
                gb = np.swapaxes(a.data, -1, -2) @ g
            b._accum(_unbroadcast(gb, b.shape))
    return _node(a.data @ b.data, (a, b), bw)


# --- fused ops -------------------------------------------------------------------

def softmax(x, axis=-1, mask=None):
    """Softmax along ``axis``; entries where ``mask`` is False get zero weight.

    Rows with no unmasked entry come out as all zeros.
    """
    z = x.data
    if mask is not None:
        mask = np.broadcast_to(mask, z.shape)
        z = np.where(mask, z, -np.inf)
    zmax = z.max(axis=axis, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.exp(z - zmax)
    s = e.sum(axis=axis, keepdims=True)
    out = e / np.where(s > 0, s, 1.0)

    def bw(g):
        x._accum(out * (g - (g * out).sum(axis=axis, keepdims=True)))
    return _node(out, (x,), bw)


def log_softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return _node(out, (x,), lambda g: x._accum(g - p * g.sum(axis=axis, keepdims=True)))


def segment_softmax(scores, seg, n):
    """Softmax of ``scores`` (E, ...) within groups of rows sharing ``seg``."""
    seg = np.asarray(seg, dtype=np.int64)
    s = scores.data
    smax = kernels.segment_max(s, seg, n)
    e = np.exp(s - smax[seg])
    denom = kernels.segment_sum(e, seg, n)
    out = e / denom[seg]

    def bw(g):
        dot = kernels.segment_sum(g * out, seg, n)
        scores._accum(out * (g - dot[seg]))
    return _node(out, (scores,), bw)


def segment_sum(values, seg, n):
    seg = np.asarray(seg, dtype=np.int64)
    return _node(kernels.segment_sum(values.data, seg, n), (values,),
                 lambda g: values._accum(g[seg]))


def layer_norm(x, gamma, beta, eps=1e-5):
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bw(g):
        if gamma.requires_grad:
            gamma._accum((g * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            beta._accum(g.reshape(-1, g.shape[-1]).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            d = x.shape[-1]
            x._accum(inv / d * (d * gx - gx.sum(axis=-1, keepdims=True)
                                - xhat * (gx * xhat).sum(axis=-1, keepdims=True)))
    return _node(out, (x, gamma, beta), bw)


def cross_entropy_masked(logits, labels, valid=None):
    """Mean negative log-likelihood over the rows where ``valid`` is True.

    ``labels`` are class indices; rows outside ``valid`` contribute neither
    loss nor gradient. With no valid row the loss is 0.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if valid is None:
        valid = labels >= 0
    valid = np.asarray(valid, dtype=bool)
    n_valid = int(valid.sum())
    z = logits.data
    rows = np.flatnonzero(valid)
    if n_valid == 0:
        logger.debug("masked cross-entropy over a batch with no labeled rows; loss set to 0")
        return _node(np.array(0.0), (logits,), lambda g: None)
    zv = z[rows]
    zv = zv - zv.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zv).sum(axis=1))
    nll = lse - zv[np.arange(len(rows)), labels[rows]]
    loss = nll.mean()

    def bw(g):
        p = np.exp(zv - lse[:, None])
        p[np.arange(len(rows)), labels[rows]] -= 1.0
        full = np.zeros_like(z)
        full[rows] = p * (g / n_valid)
        logits._accum(full)
    return _node(np.array(loss), (logits,), bw)
