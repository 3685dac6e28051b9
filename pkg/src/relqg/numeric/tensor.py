"""A minimal tape-based reverse-mode autodiff over numpy arrays.

Operations record themselves on the active :class:`Tape` (if any input needs a
gradient). :func:`backward` replays the tape in reverse creation order, which
is a valid topological order because every record is appended after its
inputs exist.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import kernels

DTYPE = np.float64

_state = threading.local()


class ShapeError(ValueError):
    pass


class Tensor:
    """A shaped array that may carry gradient-tracking history."""

    __slots__ = ("data", "requires_grad", "__weakref__")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class Parameter(Tensor):
    """A named trainable tensor with a gradient accumulator."""

    __slots__ = ("name", "grad")

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


@dataclass
class Record:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    # maps output gradient -> tuple of input gradients (None where not needed)
    backward: Callable[[np.ndarray], tuple]


@dataclass
class Tape:
    records: list[Record] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().pop()

    def __len__(self) -> int:
        return len(self.records)


def _tape_stack() -> list:
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = _state.stack = []
    return stack


def active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    tape = active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        tape.records.append(Record(op, tuple(inputs), out, backward))
    return out


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after a limited broadcast."""
    if grad.shape == shape:
        return grad
    if len(shape) == 0:
        return np.asarray(grad.sum())
    lead = grad.ndim - len(shape)
    if lead:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None
    # result must keep the larger operand's shape; no two-sided broadcasting
    if shape != a.shape and shape != b.shape:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# -- elementwise -------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape
    return _emit("add", a.data + b.data, (a, b),
                 lambda g: (_reduce_to(g, sa), _reduce_to(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    sa, sb = a.shape, b.shape
    return _emit("sub", a.data - b.data, (a, b),
                 lambda g: (_reduce_to(g, sa), -_reduce_to(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    ad, bd = a.data, b.data
    return _emit("mul", ad * bd, (a, b),
                 lambda g: (_reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape)))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = 1.0 / (1.0 + np.exp(-x.data))
    return _emit("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _emit("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def log(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return _emit("log", np.log(xd), (x,), lambda g: (g / xd,))


def softmax(x, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``; ``mask`` marks entries forced to zero."""
    x = as_tensor(x)
    z = x.data
    if mask is not None:
        z = np.where(mask, -np.inf, z)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _emit("softmax", y, (x,), back)


def dropout(x, p: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return _emit("dropout", x.data * keep, (x,), lambda g: (g * keep,))


# -- shape and linear algebra -----------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return _emit("matmul", ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {x.shape}")
    return _emit("transpose", x.data.T, (x,), lambda g: (g.T,))


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    src = x.shape
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {src} as {shape}") from None
    return _emit("reshape", y, (x,), lambda g: (g.reshape(src),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        y = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        shapes = " and ".join(str(t.shape) for t in ts)
        raise ShapeError(f"concat: incompatible shapes {shapes}") from None
    ax = axis % y.ndim
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]
    return _emit("concat", y, ts, lambda g: tuple(np.split(g, bounds, axis=ax)))


def take(x, index) -> Tensor:
    """``x[index]`` with any numpy index (slice, int, reversal, arrays)."""
    x = as_tensor(x)
    y = x.data[index]
    src = x.shape

    def back(g):
        gx = np.zeros(src, dtype=DTYPE)
        np.add.at(gx, index, g)
        return (gx,)

    return _emit("take", np.array(y, dtype=DTYPE), (x,), back)


def pick(x, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Gather ``x[rows[k], cols[k]]`` into a vector."""
    return take(x, (np.asarray(rows), np.asarray(cols)))


def total(x) -> Tensor:
    x = as_tensor(x)
    src = x.shape
    return _emit("sum", np.asarray(x.data.sum()), (x,),
                 lambda g: (np.broadcast_to(g, src).copy(),))


def embedding_lookup(table, ids: np.ndarray) -> Tensor:
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    src = table.shape

    def back(g):
        gt = np.zeros(src, dtype=DTYPE)
        np.add.at(gt, ids, g)
        return (gt,)

    return _emit("embedding", table.data[ids], (table,), back)


def scatter_add(src, index: np.ndarray, size: int) -> Tensor:
    """Sum columns of ``src`` (rows x n) into ``size`` output columns.

    Column ``j`` of the input lands in output column ``index[j]``; repeated
    indices accumulate.
    """
    src = as_tensor(src)
    index = np.asarray(index, dtype=np.int64)
    if src.data.ndim != 2 or src.shape[1] != index.shape[0]:
        raise ShapeError(f"scatter_add: incompatible shapes {src.shape} and {index.shape}")
    if index.size and (index.min() < 0 or index.max() >= size):
        raise IndexError(f"scatter_add: index out of range for size {size}")
    y = kernels.scatter_add_columns(np.ascontiguousarray(src.data), index, size)
    return _emit("scatter_add", y, (src,), lambda g: (g[:, index],))


# -- fused recurrence --------------------------------------------------------


def lstm(x, weight, bias, h0, c0: np.ndarray, reverse: bool = False):
    """Run an LSTM over ``x`` of shape (T, B, D).

    ``weight`` is (D + H, 4H), ``bias`` is (4H,), ``h0`` is (B, H). The
    initial cell ``c0`` is a plain array and receives no gradient.
    Returns ``(hs, c_last)`` where ``hs`` is a (T, B, H) tensor in input time
    order and ``c_last`` is the final cell state array.
    """
    x, weight, bias, h0 = (as_tensor(t) for t in (x, weight, bias, h0))
    T, B, D = x.shape
    H = h0.shape[1]
    if weight.shape != (D + H, 4 * H) or bias.shape != (4 * H,) or h0.shape[0] != B:
        raise ShapeError(
            f"lstm: incompatible shapes {x.shape} and {weight.shape} "
            f"(bias {bias.shape}, h0 {h0.shape})")
    xd = x.data[::-1] if reverse else x.data
    xd = np.ascontiguousarray(xd)
    wx = np.ascontiguousarray(weight.data[:D])
    wh = np.ascontiguousarray(weight.data[D:])
    h0d = np.ascontiguousarray(h0.data)
    c0d = np.ascontiguousarray(c0, dtype=DTYPE)
    hs, cs, gates = kernels.lstm_forward(xd, wx, wh, bias.data, h0d, c0d)

    def back(g):
        g = np.ascontiguousarray(g[::-1] if reverse else g)
        dx, dwx, dwh, db, dh0, _ = kernels.lstm_backward(
            xd, wx, wh, h0d, c0d, hs, cs, gates, g)
        if reverse:
            dx = dx[::-1]
        return dx, np.concatenate([dwx, dwh], axis=0), db, dh0

    out = hs[::-1] if reverse else hs
    return _emit("lstm", out, (x, weight, bias, h0), back), cs[-1].copy()


# -- reverse pass ------------------------------------------------------------


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(param) into every reachable Parameter's ``grad``."""
    if loss.data.size != 1 or loss.data.ndim != 0:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=DTYPE)}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            if isinstance(inp, Parameter):
                inp.grad += gi
            else:
                key = id(inp)
                prev = grads.get(key)
                grads[key] = gi if prev is None else prev + gi
