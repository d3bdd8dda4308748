"""Dense tensors with reverse-mode differentiation.

A Tensor wraps a float32/float64 numpy array. Operations build a DAG by
linking each result to its operand tensors together with a closure that
maps the result's gradient to operand gradients. ``backward`` walks the
graph once in reverse topological (creation) order, accumulating
gradients additively across fan-out. Leaves created with
``requires_grad=True`` (and all Parameters) receive their gradient in
``.grad``; interior results are transient.

Only float dtypes are supported. Binary operations follow numpy
broadcasting restricted to aligned axes (equal extents, or extent 1 on
one side); gradients are summed back over broadcast axes.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import ConfigurationError, ContractError, DimensionError

_FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # Operator sugar; the functional forms below are the primary API.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def reshape(self, shape):
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return rsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return rmean(self, axis=axis, keepdims=keepdims)


class Parameter(Tensor):
    """Leaf tensor with a unique name and an eagerly allocated gradient."""

    __slots__ = ("name",)

    def __init__(self, name, data):
        super().__init__(np.array(data, copy=True), requires_grad=True)
        if not name:
            raise ContractError("Parameter requires a non-empty name")
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x):
    """Graph constant: never requires a gradient."""
    return Tensor(np.asarray(x))


def _make(data, parents, backward_fn):
    """Assemble an op result, linking it into the graph when tracing."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _topo_order(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order  # parents precede consumers


def backward(loss):
    """Propagate d(loss)/d(node) to every reachable differentiable leaf.

    ``loss`` must hold a single element. Gradients accumulate additively
    into ``.grad`` of leaves, so callers zero parameter gradients between
    steps. The traversal consumes the graph once; rerunning requires
    rebuilding the forward pass.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward requires a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any differentiable input")
    order = _topo_order(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward_fn is None:
            # Differentiable leaf: deliver the gradient.
            if node.grad is None:
                node.grad = g.copy()
            else:
                node.grad = node.grad + g
            continue
        parent_grads = node._backward_fn(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# ---------------------------------------------------------------------------
# broadcasting helpers

def _check_broadcast(a, b, opname):
    try:
        return np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise DimensionError(
            f"{opname}: shapes {a.data.shape} and {b.data.shape} are not broadcast-compatible"
        ) from None


def _unbroadcast(g, shape):
    """Sum a gradient back down to the pre-broadcast shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    return _make(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def neg(a):
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def log(a):
    """Natural log; caller guards the domain (inputs are pre-clamped)."""
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g / (2.0 * out),))


def pow_const(a, p):
    a = as_tensor(a)
    p = float(p)
    return _make(
        np.power(a.data, p),
        (a,),
        lambda g: (g * p * np.power(a.data, p - 1.0),),
    )


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    # Stable two-sided form: exp only ever sees non-positive arguments.
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a):
    a = as_tensor(a)
    return _make(np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0),))


def clip(a, lo, hi):
    """Clamp to [lo, hi]; gradient is zero outside the kept interval."""
    a = as_tensor(a)
    lo, hi = float(lo), float(hi)
    mask_holder = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask_holder,))


def absolute(a):
    """|x|; subgradient 0 at the kink."""
    a = as_tensor(a)
    return _make(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def sin(a):
    a = as_tensor(a)
    return _make(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a):
    a = as_tensor(a)
    return _make(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def atan2(y, x):
    """Four-quadrant arctangent; gradient is zeroed on the 0/0 bin."""
    y, x = as_tensor(y), as_tensor(x)
    _check_broadcast(y, x, "atan2")

    def bwd(g):
        denom = x.data * x.data + y.data * y.data
        safe = np.where(denom == 0.0, 1.0, denom)
        live = denom != 0.0
        gy = g * np.where(live, x.data / safe, 0.0)
        gx = g * np.where(live, -y.data / safe, 0.0)
        return (_unbroadcast(gy, y.data.shape), _unbroadcast(gx, x.data.shape))

    return _make(np.arctan2(y.data, x.data), (y, x), bwd)


def clamp_magnitude(a, floor):
    """Push magnitudes below ``floor`` out to sign(x)*floor (sign(0) -> +1).

    Gradient passes through untouched values and is zero on clamped ones,
    mirroring ``clip``.
    """
    a = as_tensor(a)
    floor = float(floor)
    small = np.abs(a.data) < floor
    signs = np.where(a.data < 0, -1.0, 1.0)
    out = np.where(small, signs * floor, a.data)
    return _make(out, (a,), lambda g: (g * ~small,))


# ---------------------------------------------------------------------------
# reductions

def rsum(a, axis=None, keepdims=False):
    a = as_tensor(a)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g.reshape(()), a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def rmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g.reshape(()), a.data.shape).copy() / n,)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy() / n,)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), bwd)


def rmin(a, axis=None, keepdims=False):
    """Minimum; the gradient routes to the first minimal element."""
    a = as_tensor(a)
    out = a.data.min(axis=axis, keepdims=keepdims)

    def bwd(g):
        gx = np.zeros_like(a.data)
        if axis is None:
            idx = np.unravel_index(np.argmin(a.data), a.data.shape)
            gx[idx] = g.reshape(())
        else:
            amin = np.expand_dims(np.argmin(a.data, axis=axis), axis)
            gg = g if keepdims else np.expand_dims(g, axis)
            np.put_along_axis(gx, amin, gg, axis=axis)
        return (gx,)

    return _make(out, (a,), bwd)


# ---------------------------------------------------------------------------
# shape manipulation

def reshape(a, shape):
    a = as_tensor(a)
    shape = tuple(shape)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def transpose(a, axes):
    a = as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat of zero tensors")
    first = tensors[0].data.shape
    for t in tensors[1:]:
        s = t.data.shape
        if len(s) != len(first) or any(
            i != axis and a != b for i, (a, b) in enumerate(zip(first, s))
        ):
            raise DimensionError(f"concat: shapes {first} and {s} differ off axis {axis}")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        outs = []
        for i in range(len(tensors)):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            outs.append(g[tuple(sl)])
        return tuple(outs)

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bwd)


def narrow(a, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    a = as_tensor(a)
    if not 0 <= axis < a.data.ndim:
        raise DimensionError(f"narrow: axis {axis} out of range for shape {a.data.shape}")
    extent = a.data.shape[axis]
    if start < 0 or length < 1 or start + length > extent:
        raise DimensionError(
            f"narrow: [{start}, {start + length}) outside axis of extent {extent}"
        )
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def bwd(g):
        gx = np.zeros_like(a.data)
        gx[sl] = g
        return (gx,)

    return _make(a.data[sl].copy(), (a,), bwd)


# ---------------------------------------------------------------------------
# linear algebra and normalization

def matmul(a, b):
    """2-D matrix product [n,k] @ [k,m]."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul: shapes {a.data.shape} and {b.data.shape} are not compatible"
        )
    return _make(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def softmax(a, axis):
    """Shift-stabilized softmax along ``axis``; rows sum to 1."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (a,), bwd)


def percentile(a, q):
    """q-th percentile with linear interpolation between order statistics.

    Matches numpy's default 'linear' method. The gradient is routed to the
    one or two elements the interpolation reads, which is the almost
    everywhere derivative away from ties.
    """
    a = as_tensor(a)
    q = float(q)
    if not 0.0 <= q <= 100.0:
        raise ConfigurationError(f"percentile q must be in [0, 100], got {q}")
    flat = a.data.reshape(-1)
    n = flat.size
    pos = q / 100.0 * (n - 1)
    i0 = int(np.floor(pos))
    i1 = min(i0 + 1, n - 1)
    frac = pos - i0
    order = np.argsort(flat, kind="stable")
    val = (1.0 - frac) * flat[order[i0]] + frac * flat[order[i1]]

    def bwd(g):
        gx = np.zeros_like(flat)
        gs = g.reshape(())
        gx[order[i0]] += (1.0 - frac) * gs
        gx[order[i1]] += frac * gs
        return (gx.reshape(a.data.shape),)

    return _make(np.asarray(val, dtype=a.data.dtype), (a,), bwd)
