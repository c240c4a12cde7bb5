"""Composite ops and the generic op dispatch table.

``forward_op`` exposes the supported op set behind one entry point so generic
code (self-test, fuzzing) can enumerate it.  The composites here are written
purely in terms of the primitives, so they are differentiable to second order
like everything else.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ContractError, DomainError
from . import conv as _conv
from .tensor import (
    Tensor,
    abs_,
    add,
    concat,
    div,
    exp,
    leaky_relu,
    matmul,
    mean,
    mul,
    neg,
    relu,
    reshape,
    slice_,
    sqrt,
    sub,
    sum_,
    tanh,
)


def batch_standardize(x: Tensor, axes, eps: float = 1e-5) -> Tensor:
    """Standardize ``x`` over ``axes`` (population variance): (x - mu) / sqrt(var + eps).

    With the default eps the output variance is var/(var+eps), i.e. slightly
    below 1; pass eps=0 for exact unit variance on non-constant input.
    """
    mu = mean(x, axis=axes, keepdims=True)
    centered = sub(x, mu)
    var = mean(mul(centered, centered), axis=axes, keepdims=True)
    denom = sqrt(add(var, Tensor(eps))) if eps else sqrt(var)
    return div(centered, denom)


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic squashing; exact 0/1 in the saturated tails."""
    pos = (x.data >= 0).astype(np.float64)
    t = exp(neg(abs_(x)))  # in (0, 1], never overflows
    one = Tensor(1.0)
    stable_pos = div(one, add(one, t))
    stable_neg = div(t, add(one, t))
    return add(mul(Tensor(pos), stable_pos), mul(Tensor(1.0 - pos), stable_neg))


def l1_norm(x: Tensor) -> Tensor:
    return sum_(abs_(x))


def square(x: Tensor) -> Tensor:
    return mul(x, x)


_DISPATCH = {
    "matmul": matmul,
    "conv2d": _conv.conv2d,
    "conv3d": _conv.conv3d,
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "neg": neg,
    "exp": exp,
    "sum": sum_,
    "mean": mean,
    "reshape": reshape,
    "concat": concat,
    "slice": slice_,
    "tanh": tanh,
    "relu": relu,
    "leaky-relu": leaky_relu,
    "upsample-nearest-2x": _conv.upsample_nearest_2x,
    "batch-standardize": batch_standardize,
}

OP_KINDS = tuple(sorted(_DISPATCH))


def forward_op(kind: str, *inputs, **kwargs) -> Tensor:
    """Apply one of the supported op kinds by name."""
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise ContractError(f"forward_op: unknown op kind {kind!r}; known: {OP_KINDS}") from None
    return fn(*inputs, **kwargs)
