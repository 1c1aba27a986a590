"""Minimal reverse-mode automatic differentiation on numpy float64 arrays.

Every operation builds a node in a computation graph; calling
:meth:`Tensor.backward` on a scalar output walks the graph once in reverse
topological order and accumulates gradients into every tensor created with
``requires_grad=True``.  Only the operations needed by the model are
implemented.  All arithmetic is double precision and sequential, so repeated
runs with the same inputs produce bitwise identical results.
"""

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad, shape):
    # reduce a broadcast gradient back to the original operand shape
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, value, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def detach(self):
        return Tensor(self.value)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if grad is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.value)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    # --- operator sugar ---

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape)

    def item(self):
        return float(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def _ensure(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, backward_fn):
    out = Tensor(value)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def add(a, b):
    a, b = _ensure(a), _ensure(b)
    value = a.value + b.value

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.value.shape))

    return _node(value, (a, b), back)


def sub(a, b):
    a, b = _ensure(a), _ensure(b)
    value = a.value - b.value

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.value.shape))

    return _node(value, (a, b), back)


def mul(a, b):
    a, b = _ensure(a), _ensure(b)
    value = a.value * b.value

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.value.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.value.shape))

    return _node(value, (a, b), back)


def div(a, b):
    a, b = _ensure(a), _ensure(b)
    value = a.value / b.value

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.value, a.value.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

    return _node(value, (a, b), back)


def matmul(a, b):
    a, b = _ensure(a), _ensure(b)
    value = a.value @ b.value

    def back(g):
        av, bv = a.value, b.value
        if av.ndim == 2 and bv.ndim == 2:
            ga, gb = g @ bv.T, av.T @ g
        elif av.ndim == 2 and bv.ndim == 1:
            ga, gb = np.outer(g, bv), av.T @ g
        elif av.ndim == 1 and bv.ndim == 2:
            ga, gb = bv @ g, np.outer(av, g)
        else:
            ga, gb = g * bv, g * av
        if a.requires_grad:
            a._accumulate(ga)
        if b.requires_grad:
            b._accumulate(gb)

    return _node(value, (a, b), back)


def tsum(a, axis=None, keepdims=False):
    a = _ensure(a)
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.value.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.value.shape).copy())

    return _node(value, (a,), back)


def mean(a, axis=None, keepdims=False):
    a = _ensure(a)
    if axis is None:
        n = a.value.size
    else:
        n = a.value.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) / float(n)


def tanh(a):
    a = _ensure(a)
    value = np.tanh(a.value)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - value * value))

    return _node(value, (a,), back)


def exp(a):
    a = _ensure(a)
    value = np.exp(a.value)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * value)

    return _node(value, (a,), back)


def log(a):
    a = _ensure(a)
    value = np.log(a.value)

    def back(g):
        if a.requires_grad:
            a._accumulate(g / a.value)

    return _node(value, (a,), back)


def sqrt(a):
    a = _ensure(a)
    value = np.sqrt(a.value)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * 0.5 / value)

    return _node(value, (a,), back)


def absolute(a):
    # subgradient 0 at the kink
    a = _ensure(a)
    value = np.abs(a.value)

    def back(g):
        if a.requires_grad:
            a._accumulate(g * np.sign(a.value))

    return _node(value, (a,), back)


def leaky_relu(a, alpha=0.2):
    a = _ensure(a)
    slope = np.where(a.value > 0.0, 1.0, alpha)
    value = a.value * slope

    def back(g):
        if a.requires_grad:
            a._accumulate(g * slope)

    return _node(value, (a,), back)


def transpose(a):
    a = _ensure(a)
    value = a.value.T

    def back(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _node(value, (a,), back)


def reshape(a, shape):
    a = _ensure(a)
    value = a.value.reshape(shape)

    def back(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.value.shape))

    return _node(value, (a,), back)


def concat(tensors, axis=0):
    tensors = [_ensure(t) for t in tensors]
    value = np.concatenate([t.value for t in tensors], axis=axis)
    sizes = [t.value.shape[axis] for t in tensors]

    def back(g):
        start = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(start, start + size)
                t._accumulate(g[tuple(index)])
            start += size

    return _node(value, tuple(tensors), back)


def take_rows(a, indices):
    """Select rows ``a[indices]``; duplicate indices accumulate on backward."""
    a = _ensure(a)
    indices = np.asarray(indices, dtype=np.intp)
    value = a.value[indices]

    def back(g):
        if a.requires_grad:
            full = np.zeros_like(a.value)
            np.add.at(full, indices, g)
            a._accumulate(full)

    return _node(value, (a,), back)


def take_cols(a, indices):
    """Select columns ``a[:, indices]`` of a 2-D tensor."""
    a = _ensure(a)
    indices = np.asarray(indices, dtype=np.intp)
    value = a.value[:, indices]

    def back(g):
        if a.requires_grad:
            full = np.zeros_like(a.value)
            np.add.at(full.T, indices, g.T)
            a._accumulate(full)

    return _node(value, (a,), back)


def masked_softmax(scores, mask):
    """Softmax over each row of ``scores`` restricted to ``mask`` entries.

    ``mask`` is a constant 0/1 array.  Rows whose mask is all zero come out
    as all zeros rather than NaN.  The row max is subtracted as a detached
    constant for numerical stability, which leaves value and gradient
    unchanged.
    """
    scores = _ensure(scores)
    mask = np.asarray(mask, dtype=np.float64)
    shift = np.max(scores.value * mask, axis=-1, keepdims=True)
    shifted = scores - Tensor(shift)
    weights = exp(shifted) * Tensor(mask)
    denom = tsum(weights, axis=-1, keepdims=True)
    # empty rows get denominator 1 so 0/1 = 0 instead of 0/0
    empty = (mask.sum(axis=-1, keepdims=True) == 0.0).astype(np.float64)
    return weights / (denom + Tensor(empty))


def log_softmax(a):
    """Row-wise log softmax with a detached max shift for stability."""
    a = _ensure(a)
    shift = np.max(a.value, axis=-1, keepdims=True)
    shifted = a - Tensor(shift)
    return shifted - log(tsum(exp(shifted), axis=-1, keepdims=True))
