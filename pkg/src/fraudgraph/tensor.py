"""Dense float64 tensors with a reverse-mode gradient tape.

Just enough machinery to train the graph models in this package: elementwise
ops with trailing-dimension broadcasting, matmul, reductions, row
gather/scatter for message passing, and the usual activations. Each op
appends a backward rule to the active :class:`Tape`; ``backward`` replays the
records in reverse order and accumulates adjoints, so a tensor feeding two
consumers receives the sum of both path gradients.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "backward",
    "add",
    "sub",
    "neg",
    "mul",
    "div",
    "power",
    "exp",
    "log",
    "relu",
    "tanh",
    "sigmoid",
    "matmul",
    "tensor_sum",
    "tensor_mean",
    "reshape",
    "concat",
    "gather_rows",
    "segment_sum",
    "softmax",
    "layernorm",
    "dropout",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


_LOCAL = threading.local()


def _tape_stack() -> list["Tape"]:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A float64 ndarray plus gradient bookkeeping.

    ``grad`` is populated (and accumulated into) by ``backward``; call sites
    that reuse parameters across steps should clear it via ``zero_grad``.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __pow__(self, p):
        return power(self, float(p))

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class _OpRecord:
    """One recorded operation: inputs, output, and its local backward rule."""

    __slots__ = ("inputs", "output", "backward_fn", "name")

    def __init__(self, inputs: tuple[Tensor, ...], output: Tensor,
                 backward_fn: Callable[[Array], Sequence[Array | None]], name: str):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn
        self.name = name


class Tape:
    """Execution-ordered log of differentiable ops.

    Records are appended as ops execute, so inputs always precede the ops
    that consume them (topological order by construction).
    """

    def __init__(self) -> None:
        self.records: list[_OpRecord] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _tape_stack().pop()
        assert popped is self

    def backward(self, loss: Tensor) -> dict[int, Array]:
        return backward(self, loss)


def backward(tape: Tape, loss: Tensor) -> dict[int, Array]:
    """Reverse sweep over ``tape`` seeding dL/dloss = 1.

    Every tensor with ``requires_grad`` that is upstream of ``loss`` gets its
    accumulated adjoint added into ``.grad``. Returns the adjoint map keyed by
    ``id(tensor)`` (useful for inspecting intermediates).
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    adjoints: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    seen: dict[int, Tensor] = {id(loss): loss}
    for rec in reversed(tape.records):
        out_grad = adjoints.get(id(rec.output))
        if out_grad is None:
            continue
        in_grads = rec.backward_fn(out_grad)
        for tens, g in zip(rec.inputs, in_grads):
            if g is None or not tens.requires_grad:
                continue
            key = id(tens)
            if key in adjoints:
                adjoints[key] = adjoints[key] + g
            else:
                adjoints[key] = g
            seen[key] = tens
    for key, tens in seen.items():
        if tens.requires_grad:
            g = adjoints[key]
            tens.grad = g if tens.grad is None else tens.grad + g
    return adjoints


def _make_output(data: Array, inputs: tuple[Tensor, ...],
                 backward_fn: Callable[[Array], Sequence[Array | None]],
                 name: str) -> Tensor:
    needs_grad = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    tape = active_tape()
    if tape is not None and needs_grad:
        tape.records.append(_OpRecord(inputs, out, backward_fn, name))
    return out


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_data(a: Tensor, b: Tensor, op: str) -> Array:
    try:
        return np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast"
        ) from None


# -- elementwise ops -----------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_data(a, b, "add")

    def bwd(g: Array):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make_output(a.data + b.data, (a, b), bwd, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_data(a, b, "sub")

    def bwd(g: Array):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make_output(a.data - b.data, (a, b), bwd, "sub")


def neg(a: Tensor) -> Tensor:
    return _make_output(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_data(a, b, "mul")

    def bwd(g: Array):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _make_output(a.data * b.data, (a, b), bwd, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_data(a, b, "div")

    def bwd(g: Array):
        return (_unbroadcast(g / b.data, a.data.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make_output(a.data / b.data, (a, b), bwd, "div")


def power(a: Tensor, p: float) -> Tensor:
    def bwd(g: Array):
        return (g * p * np.power(a.data, p - 1.0),)

    return _make_output(np.power(a.data, p), (a,), bwd, f"pow{p}")


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bwd(g: Array):
        return (g * out_data,)

    return _make_output(out_data, (a,), bwd, "exp")


def log(a: Tensor) -> Tensor:
    def bwd(g: Array):
        return (g / a.data,)

    return _make_output(np.log(a.data), (a,), bwd, "log")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def bwd(g: Array):
        return (g * mask,)

    return _make_output(np.where(mask, a.data, 0.0), (a,), bwd, "relu")


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bwd(g: Array):
        return (g * (1.0 - out_data * out_data),)

    return _make_output(out_data, (a,), bwd, "tanh")


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-np.abs(a.data)))
    out_data = np.where(a.data >= 0, out_data, 1.0 - out_data)

    def bwd(g: Array):
        return (g * out_data * (1.0 - out_data),)

    return _make_output(out_data, (a,), bwd, "sigmoid")


# -- linear algebra ------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}")

    def bwd(g: Array):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return _make_output(a.data @ b.data, (a, b), bwd, "matmul")


# -- reductions and reshaping ---------------------------------------------

def _normalize_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.data.ndim)

    def bwd(g: Array):
        if not keepdims:
            for ax in sorted(axes):
                g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make_output(a.data.sum(axis=axes or None, keepdims=keepdims), (a,), bwd, "sum")


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.data.ndim)
    count = int(np.prod([a.data.shape[ax] for ax in axes])) if axes else a.data.size
    return div(tensor_sum(a, axis=axis, keepdims=keepdims), float(count))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old_shape = a.data.shape

    def bwd(g: Array):
        return (g.reshape(old_shape),)

    return _make_output(a.data.reshape(shape), (a,), bwd, "reshape")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(_as_tensor(t) for t in tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g: Array):
        slicer = [slice(None)] * g.ndim
        out = []
        for i in range(len(tensors)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            out.append(g[tuple(slicer)])
        return tuple(out)

    return _make_output(np.concatenate([t.data for t in tensors], axis=axis),
                        tensors, bwd, "concat")


# -- gather / scatter (message passing) -----------------------------------

def scatter_add_into(target: Array, idx: Array, values: Array) -> Array:
    """``target[idx] += values`` row-wise; uses the contiguous-run reduceat
    path when ``idx`` is sorted (np.add.at is an order of magnitude slower)."""
    if len(idx) == 0:
        return target
    if np.all(idx[1:] >= idx[:-1]):
        starts = np.concatenate([[0], np.flatnonzero(idx[1:] != idx[:-1]) + 1])
        target[idx[starts]] += np.add.reduceat(values, starts, axis=0)
    else:
        np.add.at(target, idx, values)
    return target


def gather_rows(a: Tensor, idx: Array) -> Tensor:
    """``a[idx]`` along the leading axis; gradients scatter-add back."""
    idx = np.asarray(idx, dtype=np.int64)

    def bwd(g: Array):
        return (scatter_add_into(np.zeros_like(a.data), idx, g),)

    return _make_output(a.data[idx], (a,), bwd, "gather_rows")


def segment_sum(a: Tensor, segment_ids: Array, num_segments: int) -> Tensor:
    """Sum leading-axis rows of ``a`` into ``num_segments`` buckets."""
    seg = np.asarray(segment_ids, dtype=np.int64)
    if seg.shape[0] != a.data.shape[0]:
        raise ShapeError(
            f"segment_sum: {seg.shape[0]} segment ids for {a.data.shape[0]} rows")
    out_data = scatter_add_into(
        np.zeros((num_segments,) + a.data.shape[1:], dtype=np.float64), seg, a.data)

    def bwd(g: Array):
        return (g[seg],)

    return _make_output(out_data, (a,), bwd, "segment_sum")


# -- composite layers ------------------------------------------------------

def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax; stable for inputs with magnitude up to ~1e300."""
    if a.data.shape == () or a.data.shape[axis] == 0:
        raise ShapeError(f"softmax over empty axis {axis} of shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g: Array):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        return (out_data * (g - dot),)

    return _make_output(out_data, (a,), bwd, "softmax")


def layernorm(a: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalize to zero mean / unit variance along ``axis`` (no affine)."""
    mu = a.data.mean(axis=axis, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    istd = 1.0 / np.sqrt(var + eps)
    y = xc * istd

    def bwd(g: Array):
        gm = g.mean(axis=axis, keepdims=True)
        gy = (g * y).mean(axis=axis, keepdims=True)
        return (istd * (g - gm - y * gy),)

    return _make_output(y, (a,), bwd, "layernorm")


def dropout(a: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: eval mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        def bwd_id(g: Array):
            return (g,)

        return _make_output(a.data.copy(), (a,), bwd_id, "dropout_eval")
    if rng is None:
        raise ValueError("dropout in train mode needs an explicit rng")
    keep = rng.random(a.data.shape) >= p
    scale = 1.0 / (1.0 - p)
    mask = keep * scale

    def bwd(g: Array):
        return (g * mask,)

    return _make_output(a.data * mask, (a,), bwd, "dropout")
