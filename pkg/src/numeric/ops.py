"""
Differentiable Operations for the RecNet Numeric Core

Each op computes its forward value with numpy and, when any operand is
recorded on a gradient tape, attaches a backward rule returning one
adjoint per operand. Broadcasting follows numpy; adjoints of broadcast
operands are summed back to the operand's shape.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.numeric.tensor import DimensionError, Tensor, as_tensor, make_result

logger = logging.getLogger(__name__)

Operand = Union[Tensor, np.ndarray, float, int]
Axis = Optional[Union[int, Tuple[int, ...]]]


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum an adjoint over the axes numpy broadcast to reach its shape."""
    if grad.shape == shape:
        return grad

    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))

    kept = tuple(axis for axis, size in enumerate(shape) if size == 1 and grad.shape[axis] != 1)
    if kept:
        grad = grad.sum(axis=kept, keepdims=True)

    return grad.reshape(shape)


def _broadcast_shapes(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from e


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes(a, b, "add")

    def backward_fn(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward_fn)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes(a, b, "sub")

    def backward_fn(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward_fn)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes(a, b, "mul")

    def backward_fn(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), backward_fn)


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes(a, b, "div")
    out = a.data / b.data

    def backward_fn(g):
        return unbroadcast(g / b.data, a.shape), unbroadcast(-g * out / b.data, b.shape)

    return make_result(out, (a, b), backward_fn)


def neg(a: Operand) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,))


def square(a: Operand) -> Tensor:
    a = as_tensor(a)
    return make_result(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------

def tanh(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_result(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Operand) -> Tensor:
    a = as_tensor(a)
    # Split on sign so exp never overflows
    x = a.data
    positive = x >= 0
    out = np.empty_like(x)
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return make_result(out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,))


def log(a: Operand) -> Tensor:
    a = as_tensor(a)
    return make_result(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_result(out, (a,), lambda g: (g * 0.5 / out,))


# ---------------------------------------------------------------------------
# Shape manipulation
# ---------------------------------------------------------------------------

def reshape(a: Operand, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as e:
        raise DimensionError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from e
    return make_result(out, (a,), lambda g: (g.reshape(a.shape),))


def getitem(a: Operand, index) -> Tensor:
    a = as_tensor(a)
    out = np.array(a.data[index])

    parts = index if isinstance(index, tuple) else (index,)
    advanced = any(isinstance(part, (list, np.ndarray)) for part in parts)

    def backward_fn(g):
        grad = np.zeros_like(a.data)
        if advanced:
            # Repeated indices must accumulate
            np.add.at(grad, index, g)
        else:
            grad[index] += g
        return (grad,)

    return make_result(out, (a,), backward_fn)


def concat(tensors: Sequence[Operand], axis: int = -1) -> Tensor:
    """Concatenate along an existing axis."""
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise DimensionError("concat: no operands")

    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"concat: incompatible shapes {shapes} on axis {axis}") from e

    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result(out, tensors, backward_fn)


def stack(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    """Stack equally shaped tensors along a new axis."""
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise DimensionError("stack: no operands")

    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"stack: operands differ in shape {shapes}") from e

    def backward_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make_result(out, tensors, backward_fn)


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------

def sum(a: Operand, axis: Axis = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(out, (a,), backward_fn)


def mean(a: Operand, axis: Axis = None) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return div(sum(a, axis=axis), float(count))


# ---------------------------------------------------------------------------
# Linear algebra and lookups
# ---------------------------------------------------------------------------

def linear(x: Operand, weight: Operand, bias: Optional[Operand] = None) -> Tensor:
    """
    Affine map over the last axis: x @ weight.T + bias.

    Args:
        x: Inputs of shape (..., in)
        weight: Matrix of shape (out, in)
        bias: Optional vector of shape (out,)

    Returns:
        Tensor of shape (..., out)
    """
    x, weight = as_tensor(x), as_tensor(weight)

    if weight.ndim != 2 or x.ndim < 1 or x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear: input shape {x.shape} does not match weight shape {weight.shape}")

    out = x.data @ weight.data.T
    parents: Tuple[Tensor, ...] = (x, weight)

    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise DimensionError(f"linear: bias shape {bias.shape} does not match weight shape {weight.shape}")
        out = out + bias.data
        parents = parents + (bias,)

    def backward_fn(g):
        flat_g = g.reshape(-1, weight.shape[0])
        flat_x = x.data.reshape(-1, weight.shape[1])
        grads = [g @ weight.data, flat_g.T @ flat_x]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return tuple(grads)

    return make_result(out, parents, backward_fn)


def embedding(table: Operand, ids: np.ndarray) -> Tensor:
    """Look up rows of an embedding table; ids may have any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)

    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError(f"embedding: token id out of range [0, {table.shape[0]})")

    def backward_fn(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return make_result(table.data[ids], (table,), backward_fn)


def pick(a: Operand, ids: np.ndarray) -> Tensor:
    """Select one entry per row along the last axis: out[..., ] = a[..., ids]."""
    a = as_tensor(a)
    ids = np.asarray(ids, dtype=np.int64)

    if ids.shape != a.shape[:-1]:
        raise DimensionError(f"pick: index shape {ids.shape} does not match leading shape {a.shape[:-1]}")

    expanded = ids[..., None]
    out = np.take_along_axis(a.data, expanded, axis=-1)[..., 0]

    def backward_fn(g):
        grad = np.zeros_like(a.data)
        np.put_along_axis(grad, expanded, g[..., None], axis=-1)
        return (grad,)

    return make_result(out, (a,), backward_fn)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def softmax(logits: Operand, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax over the last axis, optionally restricted to a support mask.

    Masked positions come out exactly zero and receive no gradient. The
    maximum over the support is subtracted before exponentiation.

    Args:
        logits: Scores of shape (..., n)
        mask: Boolean array broadcastable to the logits; True marks support

    Returns:
        Probabilities with the shape of the logits

    Raises:
        ValueError: If any row has an empty support ("empty support")
    """
    logits = as_tensor(logits)
    x = logits.data

    if mask is None:
        support = np.ones(x.shape, dtype=bool)
    else:
        support = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)

    if not np.all(support.any(axis=-1)):
        raise ValueError("empty support")

    shifted = np.where(support, x, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    weights = np.where(support, np.exp(shifted), 0.0)
    out = weights / weights.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        inner = (out * g).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return make_result(out, (logits,), backward_fn)


def log_softmax(logits: Operand) -> Tensor:
    """Log-probabilities over the last axis."""
    logits = as_tensor(logits)
    x = logits.data
    shifted = x - x.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)

    def backward_fn(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return make_result(out, (logits,), backward_fn)


def masked_mean(vectors: Operand, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Mean of the vectors along the second-to-last axis, restricted to rows
    where mask is True.

    Args:
        vectors: Tensor of shape (..., n, d)
        mask: Boolean array of shape (..., n); None keeps every row

    Raises:
        ValueError: If a pool has no unmasked vector
    """
    vectors = as_tensor(vectors)
    if vectors.ndim < 2:
        raise DimensionError(f"masked_mean: expected (..., n, d), got {vectors.shape}")

    if mask is None:
        mask = np.ones(vectors.shape[:-1], dtype=bool)
    mask = np.asarray(mask, dtype=bool)

    if mask.shape != vectors.shape[:-1]:
        raise DimensionError(f"masked_mean: mask shape {mask.shape} does not match {vectors.shape[:-1]}")

    counts = mask.sum(axis=-1)
    if np.any(counts == 0):
        raise ValueError("mean of an empty set of vectors")

    total = sum(mul(vectors, mask.astype(np.float64)[..., None]), axis=-2)
    return div(total, counts.astype(np.float64)[..., None])
