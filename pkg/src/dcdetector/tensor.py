"""Small reverse-mode autodiff core on top of numpy arrays.

Every op returns a new :class:`Tensor`. When any input requires a gradient
the output remembers its parents and a closure mapping the output gradient
to per-parent gradients. :meth:`Tensor.backward` walks that graph in reverse
topological order (the tape), visiting each node once.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from .errors import ContractError, DimensionError, DomainError, NonFiniteError, ParameterError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.array(data, dtype=dtype if dtype is not None else np.float64, copy=True)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._op = "leaf"

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return not self._parents

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_item(self)

    def __repr__(self):
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{rg})"

    def zero_grad(self):
        self.grad = None

    # -- operators -----------------------------------------------------
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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return sum_axis(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean_axis(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def backward(self):
        backward(self)


def _raise_item(t):
    raise ContractError(f"item() needs a single-element tensor, got shape {t.shape}")


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _result(data, parents, backward_fn, op):
    if not np.all(np.isfinite(data)):
        if all(np.all(np.isfinite(p.data)) for p in parents):
            raise NonFiniteError(f"{op} produced non-finite values from finite inputs")
        raise NonFiniteError(f"{op} received non-finite inputs")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)



def _check_broadcast(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# -- elementwise ---------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), bw, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), bw, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), bw, "mul")


def scale(x, c):
    """Multiply by a python scalar (no gradient wrt ``c``)."""
    x = as_tensor(x)
    c = float(c)

    def bw(g):
        return (g * c,)

    return _result(x.data * x.data.dtype.type(c), (x,), bw, "scale")


def div_scalar(x, c):
    """Divide by a nonzero python scalar (no gradient wrt ``c``)."""
    x = as_tensor(x)
    c = float(c)
    if c == 0.0:
        raise ParameterError("division by zero")

    def bw(g):
        return (g / c,)

    return _result(x.data / x.data.dtype.type(c), (x,), bw, "div_scalar")


def exp(x):
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)

    def bw(g):
        return (g * out,)

    return _result(out, (x,), bw, "exp")


def log(x):
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise DomainError("log of non-positive value")

    def bw(g):
        return (g / x.data,)

    return _result(np.log(x.data), (x,), bw, "log")


def maximum(x, floor):
    """Elementwise ``max(x, floor)`` for a scalar floor; gradient passes where ``x > floor``."""
    x = as_tensor(x)
    mask = x.data > floor

    def bw(g):
        return (g * mask,)

    return _result(np.where(mask, x.data, x.data.dtype.type(floor)), (x,), bw, "maximum")


# -- reductions and shape ops -------------------------------------------

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    out = []
    for a in axis:
        if not -ndim <= a < ndim:
            raise DimensionError(f"axis {a} out of range for ndim {ndim}")
        out.append(a % ndim)
    return tuple(sorted(out))


def sum_axis(x, axis=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axis(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.asarray(out), (x,), bw, "sum")


def mean_axis(x, axis=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axis(axis, x.ndim)
    count = math.prod(x.shape[a] for a in axes)
    if count == 0:
        raise DimensionError("mean over an empty axis")
    return scale(sum_axis(x, axes, keepdims), 1.0 / count)


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}") from None

    def bw(g):
        return (g.reshape(x.shape),)

    return _result(out, (x,), bw, "reshape")


def permute(x, axes):
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise DimensionError(f"invalid permutation {axes} for ndim {x.ndim}")
    inv = tuple(np.argsort(axes))

    def bw(g):
        return (np.transpose(g, inv),)

    return _result(np.ascontiguousarray(np.transpose(x.data, axes)), (x,), bw, "permute")


def transpose_last2(x):
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError("transpose_last2 needs at least 2 dims")
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return permute(x, axes)


def concat_axis(tensors, axis=0):
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise DimensionError("concat of an empty list")
    ndim = ts[0].ndim
    ax = _norm_axis(axis, ndim)[0]
    for t in ts[1:]:
        if t.ndim != ndim or any(t.shape[i] != ts[0].shape[i] for i in range(ndim) if i != ax):
            raise DimensionError(f"concat: incompatible shapes {ts[0].shape} and {t.shape}")
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _result(np.concatenate([t.data for t in ts], axis=ax), tuple(ts), bw, "concat")


def repeat_interleave(x, axis, k):
    """Duplicate each index ``k`` times in a row: ``[a, b] -> [a, a, b, b]``."""
    x = as_tensor(x)
    k = int(k)
    if k < 1:
        raise ParameterError(f"repeat factor must be >= 1, got {k}")
    ax = _norm_axis(axis, x.ndim)[0]
    n = x.shape[ax]

    def bw(g):
        split = g.shape[:ax] + (n, k) + g.shape[ax + 1:]
        return (g.reshape(split).sum(axis=ax + 1),)

    return _result(np.repeat(x.data, k, axis=ax), (x,), bw, "repeat_interleave")


def tile(x, axis, k):
    """Repeat the whole axis block ``k`` times: ``[a, b] -> [a, b, a, b]``."""
    x = as_tensor(x)
    k = int(k)
    if k < 1:
        raise ParameterError(f"tile factor must be >= 1, got {k}")
    ax = _norm_axis(axis, x.ndim)[0]
    n = x.shape[ax]
    reps = [1] * x.ndim
    reps[ax] = k

    def bw(g):
        split = g.shape[:ax] + (k, n) + g.shape[ax + 1:]
        return (g.reshape(split).sum(axis=ax),)

    return _result(np.tile(x.data, reps), (x,), bw, "tile")


# -- linear algebra and normalisation -----------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul operands need at least 2 dims")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: batch dims not broadcastable, {a.shape} x {b.shape}") from None

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(a.data @ b.data, (a, b), bw, "matmul")


def softmax_last(x):
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise DimensionError("softmax over an empty trailing axis")
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _result(s, (x,), bw, "softmax")


def layer_norm_last(x, gamma, beta, eps=1e-5):
    """Normalise each trailing slice to zero mean / unit variance, then affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if eps <= 0:
        raise ParameterError("layer_norm eps must be > 0")
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise DimensionError(f"layer_norm affine params must have shape ({n},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bw(g):
        dxhat = g * gamma.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _result(out.astype(x.data.dtype, copy=False), (x, gamma, beta), bw, "layer_norm")


# -- stochastic / gradient control --------------------------------------

def dropout(x, p, training, rng=None):
    """Inverted dropout: zero with prob ``p`` and rescale survivors by ``1/(1-p)``."""
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ParameterError("dropout in training mode needs an rng")
    mask = (rng.random(x.shape) >= p).astype(x.data.dtype) / x.data.dtype.type(1.0 - p)

    def bw(g):
        return (g * mask,)

    return _result(x.data * mask, (x,), bw, "dropout")


def stop_gradient(x):
    """Forward identity that blocks gradient flow into ``x``."""
    x = as_tensor(x)
    out = Tensor.__new__(Tensor)
    out.data = x.data
    out.grad = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    out._op = "stop_gradient"
    return out


# -- backward pass ------------------------------------------------------

def _topo_order(root):
    order, seen = [], set()
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
    return order


def backward(loss):
    """Accumulate d loss / d leaf into ``.grad`` of every leaf that requires it.

    Leaf gradients accumulate across calls; zero them explicitly.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    tape = _topo_order(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
