"""Finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, grad


def numeric_gradient(f: Callable[..., Tensor], tensors: Sequence[Tensor], eps: float = 1e-5):
    """Central-difference gradients of scalar ``f(*tensors)`` w.r.t. each tensor."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f(*tensors).item()
            flat[i] = orig - eps
            lo = f(*tensors).item()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def check_gradients(
    f: Callable[..., Tensor],
    tensors: Sequence[Tensor],
    rtol: float = 1e-4,
    atol: float = 1e-6,
    eps: float = 1e-5,
) -> float:
    """Compare reverse-mode and finite-difference gradients; return the worst error.

    The error for each element is |ad - fd| / max(1, |fd|); raises AssertionError
    if it exceeds rtol where |fd| >= atol scale, mirroring an elementwise
    allclose(rtol, atol).
    """
    out = f(*tensors)
    ad = [g.data for g in grad(out, list(tensors))]
    fd = numeric_gradient(f, tensors, eps=eps)
    worst = 0.0
    for a, n in zip(ad, fd):
        if not np.allclose(a, n, rtol=rtol, atol=atol):
            err = np.max(np.abs(a - n) / np.maximum(atol, np.abs(n)))
            raise AssertionError(f"gradient mismatch: max relative error {err:.3e}")
        denom = np.maximum(atol, np.abs(n))
        worst = max(worst, float(np.max(np.abs(a - n) / denom)) if a.size else 0.0)
    return worst
