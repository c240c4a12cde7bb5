"""Shared fixtures and oracle helpers for the test suite."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from odegen.autodiff import Tensor

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def rel_err(approx, exact, floor: float = 1e-6) -> float:
    """Max elementwise relative error with an absolute floor for tiny values."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    scale = np.maximum(np.abs(exact), floor)
    return float(np.max(np.abs(approx - exact) / scale))


def central_difference(f, arrays, eps: float = 1e-5):
    """Independent finite-difference gradient of a scalar function.

    ``f`` maps a list of numpy arrays to a python float; returns one gradient
    array per input.  Kept separate from the library's own checker so tests
    do not validate the implementation against itself.
    """
    grads = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a, dtype=np.float64)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f(arrays)
            flat[i] = orig - eps
            down = f(arrays)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def leaf(data, requires_grad: bool = True) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=requires_grad)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
