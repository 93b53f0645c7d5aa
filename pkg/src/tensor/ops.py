"""
Differentiable operations on Tensor.

Closed set: matmul, add/sub/mul/neg (bias and gating), tanh, sigmoid,
row-wise softmax, cross-entropy, concatenation, slicing and gather,
reshape/swapaxes, sum/mean/max reductions, sign and the L2 norm.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ShapeError
from .tensor import DTYPE, ArrayLike, Tensor, as_tensor, is_grad_enabled, make_result


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# --- elementwise arithmetic ---

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward_fn)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward_fn)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), backward_fn)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,))


# --- linear algebra ---

def _rowwise_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a @ b one row of `a` at a time; a row's result never depends on the other rows"""
    rows = np.ascontiguousarray(a).reshape(a.shape[:-1] + (1, a.shape[-1]))
    return np.matmul(rows, b[..., None, :, :])[..., 0, :]


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product with numpy broadcasting over leading (batch) dimensions"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", a.shape, b.shape, detail="operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape, detail="inner dimensions differ")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, detail="batch dimensions differ") from None

    def backward_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    # Untraced (inference) products are batch-invariant bit for bit.
    value = np.matmul(a.data, b.data) if is_grad_enabled() else _rowwise_product(a.data, b.data)
    return make_result(value, (a, b), backward_fn)


# --- nonlinearities ---

def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_result(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return make_result(out, (a,), lambda g: (g * out * (1.0 - out),))


def softmax_array(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    """Softmax normalised to unit sum along `axis` (rows by default)"""
    a = as_tensor(a)
    out = softmax_array(a.data, axis=axis)

    def backward_fn(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return make_result(out, (a,), backward_fn)


# --- losses ---

def cross_entropy(logits: ArrayLike, targets: np.ndarray, mask: Optional[np.ndarray] = None,
                  reduction: str = "mean") -> Tensor:
    """Softmax cross-entropy of integer targets against the last axis of `logits`.

    Serves both the per-character reconstruction loss and the two-class bag
    loss. `mask` zeroes out positions (e.g. padding past the terminator).
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim < 1 or targets.shape != logits.shape[:-1]:
        raise ShapeError("cross_entropy", logits.shape, targets.shape,
                         detail="targets must match logits without the class axis")
    weights = np.ones(targets.shape, dtype=DTYPE) if mask is None else np.asarray(mask, dtype=DTYPE)
    if weights.shape != targets.shape:
        raise ShapeError("cross_entropy", targets.shape, weights.shape, detail="mask shape")
    if reduction == "mean":
        weights = weights / np.maximum(weights.sum(), 1.0)
    elif reduction != "sum":
        raise ValueError(f"Unsupported reduction: {reduction}")

    x = logits.data
    shift = np.max(x, axis=-1, keepdims=True)
    lse = shift[..., 0] + np.log(np.sum(np.exp(x - shift), axis=-1))
    picked = np.take_along_axis(x, targets[..., None], axis=-1)[..., 0]
    value = np.sum((lse - picked) * weights)

    def backward_fn(g):
        probs = softmax_array(x, axis=-1)
        np.put_along_axis(probs, targets[..., None],
                          np.take_along_axis(probs, targets[..., None], axis=-1) - 1.0, axis=-1)
        return (probs * (weights * g)[..., None],)

    return make_result(np.asarray(value, dtype=DTYPE), (logits,), backward_fn)


# --- structure ---

def reshape(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape)) from None
    return make_result(out, (a,), lambda g: (g.reshape(a.shape),))


def swapaxes(a: ArrayLike, axis1: int = -1, axis2: int = -2) -> Tensor:
    a = as_tensor(a)
    return make_result(np.swapaxes(a.data, axis1, axis2), (a,),
                       lambda g: (np.swapaxes(g, axis1, axis2),))


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat", detail="nothing to concatenate")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[p.shape for p in parts]) from None
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward_fn(g):
        return np.split(g, bounds, axis=axis)

    return make_result(out, parts, backward_fn)


def index(a: ArrayLike, key) -> Tensor:
    """Slice or fancy-index; gradients scatter back with accumulation"""
    a = as_tensor(a)
    parts = key if isinstance(key, tuple) else (key,)
    basic = all(isinstance(k, (slice, int, np.integer)) or k is Ellipsis or k is None for k in parts)

    def backward_fn(g):
        full = np.zeros_like(a.data)
        if basic:
            full[key] += g
        else:
            np.add.at(full, key, g)
        return (full,)

    return make_result(a.data[key], (a,), backward_fn)


def embedding(table: ArrayLike, ids: np.ndarray) -> Tensor:
    """Row lookup `table[ids]`; ids may have any shape"""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError("embedding", table.shape, ids.shape, detail="table must be 2-D")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError("embedding", table.shape, ids.shape, detail="id out of range")

    def backward_fn(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return make_result(table.data[ids], (table,), backward_fn)


# --- reductions ---

def sum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(out, (a,), backward_fn)


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def max(a: ArrayLike, axis: int = -1, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Maximum along one axis; the gradient goes to the first maximal entry"""
    a = as_tensor(a)
    arg = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(arg, axis), axis=axis)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def backward_fn(g):
        full = np.zeros_like(a.data)
        g = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(full, np.expand_dims(arg, axis), g, axis=axis)
        return (full,)

    return make_result(out, (a,), backward_fn)


# --- norms and signs ---

def l2_norm(a: ArrayLike) -> Tensor:
    """Euclidean norm over all entries"""
    a = as_tensor(a)
    value = float(np.sqrt(np.sum(a.data * a.data)))

    def backward_fn(g):
        if value == 0.0:
            return (np.zeros_like(a.data),)
        return (g * a.data / value,)

    return make_result(np.asarray(value, dtype=DTYPE), (a,), backward_fn)


def sign(a: ArrayLike) -> Tensor:
    """Elementwise sign; piecewise constant so it carries no gradient"""
    return Tensor(np.sign(as_tensor(a).data))
