"""Dense float64 tensors with reverse-mode automatic differentiation.

Values live in numpy arrays; the differentiation bookkeeping is all local.
Every op that touches a grad-tracked input records its parents and a
vector-Jacobian closure on the result.  Monotone creation ids double as a
tape: replaying reachable nodes in decreasing id order visits every consumer
before its producers, which is record-in-execution-order / replay-in-reverse
without a separate tape object.

VJP closures are themselves written in terms of tensor ops, so calling
``grad(..., create_graph=True)`` records the backward pass and gradients can
be differentiated again.  That is what powers gradient penalties: the first
derivative w.r.t. an input is an ordinary node whose own backward reaches the
parameters.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..exceptions import ContractError, DomainError, ShapeError

_ids = itertools.count()
_grad_enabled = True


class no_grad:
    """Context manager that suspends graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class enable_grad:
    """Context manager that re-enables graph recording (used by create_graph replay)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = True
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A float64 array plus optional autodiff bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "_nid", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents: tuple = ()
        self._vjp = None
        self._nid = next(_ids)
        self.op = "leaf"

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=self.requires_grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __getitem__(self, key):
        return slice_(self, key)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)

    def backward(self) -> None:
        """Accumulate gradients into ``.grad`` of every reachable grad-tracked leaf."""
        nodes = _reachable(self)
        leaves = [n for n in nodes if n._vjp is None and n.requires_grad]
        gs = grad(self, leaves)
        for leaf, g in zip(leaves, gs):
            leaf.grad = g if leaf.grad is None else Tensor(leaf.grad.data + g.data)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], vjp, op: str) -> Tensor:
    """Build an op result, recording it when tracking is on and any parent is tracked."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
        out.op = op
    return out


def _reachable(root: Tensor) -> list:
    """All ancestors of ``root`` (root included), via an iterative DFS."""
    seen = {id(root)}
    out = [root]
    stack = [root]
    while stack:
        node = stack.pop()
        for p in node._parents:
            if id(p) not in seen:
                seen.add(id(p))
                out.append(p)
                stack.append(p)
    return out


def grad(output: Tensor, inputs: Sequence[Tensor], create_graph: bool = False) -> list:
    """Gradients of a scalar ``output`` w.r.t. ``inputs``.

    Inputs that do not appear in the graph of ``output`` get zero tensors.
    With ``create_graph=True`` the backward pass itself is recorded, so the
    returned tensors can be differentiated again.
    """
    if output.size != 1:
        raise ContractError(f"grad() needs a scalar output, got shape {output.shape}")
    nodes = _reachable(output)
    nodes.sort(key=lambda n: n._nid, reverse=True)
    want = {id(t) for t in inputs}
    captured: dict[int, Tensor] = {}
    gmap: dict[int, Tensor] = {id(output): Tensor(np.ones_like(output.data))}
    if id(output) in want:
        captured[id(output)] = gmap[id(output)]
    ctx = enable_grad() if create_graph else no_grad()
    with ctx:
        for node in nodes:
            g = gmap.pop(id(node), None)
            if g is None or node._vjp is None:
                continue
            parent_grads = node._vjp(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                prev = gmap.get(id(p))
                acc = pg if prev is None else add(prev, pg)
                gmap[id(p)] = acc
                if id(p) in want:
                    captured[id(p)] = acc
    out = []
    for t in inputs:
        g = captured.get(id(t))
        out.append(g if g is not None else Tensor(np.zeros_like(t.data)))
    return out


def gradients(loss: Tensor, params: Mapping[str, Tensor], create_graph: bool = False) -> dict:
    """Gradient map over named parameters; unused parameters map to zero tensors."""
    names = list(params.keys())
    gs = grad(loss, [params[n] for n in names], create_graph=create_graph)
    return dict(zip(names, gs))


def input_gradient(output: Tensor, x: Tensor) -> Tensor:
    """Gradient of a scalar ``output`` w.r.t. one input, kept on the graph.

    The result is grad-tracked, so losses built from it (gradient penalties)
    can be differentiated w.r.t. parameters that feed ``output``.
    """
    nodes = _reachable(output)
    if not any(n is x for n in nodes):
        raise ContractError("input_gradient: the given input is not part of the output's graph")
    return grad(output, [x], create_graph=True)[0]


# -- broadcasting helpers ----------------------------------------------------


def _unbroadcast(g: Tensor, shape: tuple) -> Tensor:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = sum_(g, axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = sum_(g, axis=axes, keepdims=True)
    if g.shape != shape:
        g = reshape(g, shape)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


# -- elementwise primitives ---------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "add")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.data + b.data, (a, b), vjp, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(neg(g), b.shape)

    return _node(a.data - b.data, (a, b), vjp, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "mul")

    def vjp(g):
        return _unbroadcast(mul(g, b), a.shape), _unbroadcast(mul(g, a), b.shape)

    return _node(a.data * b.data, (a, b), vjp, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "div")
    if np.any(b.data == 0.0):
        raise DomainError("div: denominator contains zero")

    def vjp(g):
        ga = _unbroadcast(div(g, b), a.shape)
        gb = _unbroadcast(neg(div(mul(g, a), mul(b, b))), b.shape)
        return ga, gb

    return _node(a.data / b.data, (a, b), vjp, "div")


def neg(a: Tensor) -> Tensor:
    a = _wrap(a)

    def vjp(g):
        return (neg(g),)

    return _node(-a.data, (a,), vjp, "neg")


def exp(a: Tensor) -> Tensor:
    a = _wrap(a)
    out_data = np.exp(a.data)

    def vjp(g):
        return (mul(g, out),)

    out = _node(out_data, (a,), vjp, "exp")
    return out


def sqrt(a: Tensor) -> Tensor:
    a = _wrap(a)
    if np.any(a.data < 0.0):
        raise DomainError("sqrt: negative input")
    out_data = np.sqrt(a.data)

    def vjp(g):
        return (div(mul(g, Tensor(0.5)), out),)

    out = _node(out_data, (a,), vjp, "sqrt")
    return out


def tanh(a: Tensor) -> Tensor:
    a = _wrap(a)
    out_data = np.tanh(a.data)

    def vjp(g):
        return (mul(g, sub(Tensor(1.0), mul(out, out))),)

    out = _node(out_data, (a,), vjp, "tanh")
    return out


def relu(a: Tensor) -> Tensor:
    a = _wrap(a)
    mask = (a.data > 0).astype(np.float64)

    def vjp(g):
        return (mul(g, Tensor(mask)),)

    return _node(a.data * mask, (a,), vjp, "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    a = _wrap(a)
    mask = np.where(a.data > 0, 1.0, slope)

    def vjp(g):
        return (mul(g, Tensor(mask)),)

    return _node(a.data * mask, (a,), vjp, "leaky-relu")


def abs_(a: Tensor) -> Tensor:
    """Elementwise absolute value; subgradient +1 at 0.

    The +1 convention makes compositions that are smooth at 0 (the stable
    sigmoid's exp(-|x|) branch pair) differentiate exactly there.
    """
    a = _wrap(a)
    sign = np.where(a.data >= 0, 1.0, -1.0)

    def vjp(g):
        return (mul(g, Tensor(sign)),)

    return _node(np.abs(a.data), (a,), vjp, "abs")


# -- reductions and broadcasts -------------------------------------------------


def _norm_axes(axis, ndim: int):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    axes = _norm_axes(axis, a.ndim)
    kept = tuple(1 if i in axes else s for i, s in enumerate(a.shape))

    def vjp(g):
        gk = g if keepdims or a.ndim == 0 else reshape(g, kept)
        return (broadcast_to(gk, a.shape),)

    return _node(a.data.sum(axis=axes if axes else None, keepdims=keepdims), (a,), vjp, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    axes = _norm_axes(axis, a.ndim)
    count = 1
    for ax in axes:
        count *= a.shape[ax]
    if count == 0:
        raise ShapeError("mean: reduction over zero elements")
    return mul(sum_(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


def broadcast_to(a: Tensor, shape: tuple) -> Tensor:
    a = _wrap(a)
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError as e:
        raise ShapeError(f"broadcast_to: cannot broadcast {a.shape} to {shape}") from e

    def vjp(g):
        return (_unbroadcast(g, a.shape),)

    return _node(np.ascontiguousarray(data), (a,), vjp, "broadcast")


# -- shape ops -----------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    a = _wrap(a)
    shape = tuple(shape) if isinstance(shape, (tuple, list)) else (shape,)
    try:
        data = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from e
    src = a.shape

    def vjp(g):
        return (reshape(g, src),)

    return _node(data, (a,), vjp, "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    a = _wrap(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(ax % a.ndim for ax in axes)
    inv = tuple(int(i) for i in np.argsort(axes))

    def vjp(g):
        return (transpose(g, inv),)

    return _node(np.ascontiguousarray(a.data.transpose(axes)), (a,), vjp, "transpose")


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = [_wrap(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: empty input list")
    axis = axis % ts[0].ndim
    for t in ts[1:]:
        if t.ndim != ts[0].ndim:
            raise ShapeError("concat: rank mismatch")
        for i, (x, y) in enumerate(zip(t.shape, ts[0].shape)):
            if i != axis and x != y:
                raise ShapeError(f"concat: shapes {ts[0].shape} vs {t.shape} differ off-axis")
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        outs = []
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            key = tuple(slice(None) if i != axis else slice(int(lo), int(hi)) for i in range(t.ndim))
            outs.append(slice_(g, key))
        return tuple(outs)

    return _node(np.concatenate([t.data for t in ts], axis=axis), ts, vjp, "concat")


def slice_(a: Tensor, key) -> Tensor:
    """Basic (view-style) indexing; gradients scatter back into zeros."""
    a = _wrap(a)
    data = a.data[key]
    src_shape = a.shape

    def vjp(g):
        return (unslice(g, src_shape, key),)

    return _node(np.ascontiguousarray(data), (a,), vjp, "slice")


def unslice(g: Tensor, shape: tuple, key) -> Tensor:
    """Adjoint of ``slice_``: embed ``g`` into zeros of ``shape`` at ``key``."""
    g = _wrap(g)
    buf = np.zeros(shape, dtype=np.float64)
    buf[key] = g.data

    def vjp(g2):
        return (slice_(g2, key),)

    return _node(buf, (g,), vjp, "unslice")


def pad(a: Tensor, pad_width) -> Tensor:
    """Zero padding; ``pad_width`` follows numpy's ((before, after), ...) form."""
    a = _wrap(a)
    pw = tuple((int(lo), int(hi)) for lo, hi in pad_width)
    if len(pw) != a.ndim:
        raise ShapeError(f"pad: need {a.ndim} pad pairs, got {len(pw)}")
    key = tuple(slice(lo, lo + s) for (lo, _), s in zip(pw, a.shape))

    def vjp(g):
        return (slice_(g, key),)

    return _node(np.pad(a.data, pw), (a,), vjp, "pad")


# -- linear algebra -------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expects 2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims disagree, {a.shape} @ {b.shape}")

    def vjp(g):
        return matmul(g, transpose(b)), matmul(transpose(a), g)

    return _node(a.data @ b.data, (a, b), vjp, "matmul")


# -- gather / scatter (linear index ops used to lower convolutions) -------------


def gather_cols(a: Tensor, idx: np.ndarray) -> Tensor:
    """For ``a`` of shape (N, M) and int index array ``idx`` (any shape) return a[:, idx]."""
    a = _wrap(a)
    if a.ndim != 2:
        raise ShapeError(f"gather_cols: expects (N, M) input, got {a.shape}")
    m = a.shape[1]

    def vjp(g):
        return (scatter_cols(g, idx, m),)

    return _node(a.data[:, idx], (a,), vjp, "gather")


def scatter_cols(g: Tensor, idx: np.ndarray, m: int) -> Tensor:
    """Adjoint of ``gather_cols``: sum duplicate indices back into (N, m)."""
    g = _wrap(g)
    n = g.shape[0]
    flat = g.data.reshape(n, -1)
    cols = idx.reshape(-1)
    # bincount over a flattened (sample, column) index is much faster than add.at
    glob = (np.arange(n)[:, None] * m + cols[None, :]).reshape(-1)
    buf = np.bincount(glob, weights=flat.reshape(-1), minlength=n * m).reshape(n, m)

    def vjp(g2):
        return (reshape(gather_cols(g2, idx), g.shape),)

    return _node(buf, (g,), vjp, "scatter")
