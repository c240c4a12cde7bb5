"""Minimal layer library on top of the autodiff core.

Modules register parameters by attribute walking; ``parameters()`` returns a
flat name -> Tensor map with dotted paths, and ``store()`` wraps it in a
ParameterStore for the optimizer and checkpoints.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    ParameterStore,
    Tensor,
    add,
    conv2d,
    conv3d,
    matmul,
    mul,
    reshape,
    sigmoid,
    sub,
    tanh,
)
from .autodiff import leaky_relu as _leaky
from .autodiff import relu as _relu
from .exceptions import ContractError

ACTIVATIONS = {
    None: lambda x: x,
    "linear": lambda x: x,
    "relu": _relu,
    "leaky-relu": lambda x: _leaky(x, 0.2),
    "tanh": tanh,
}


class Module:
    """Base class: any Tensor/Module/list attribute is part of the parameter tree."""

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.parameters(prefix=f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.parameters(prefix=f"{key}.{i}."))
                    elif isinstance(item, Tensor):
                        out[f"{key}.{i}"] = item
        return out

    def buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Non-trainable state: any ndarray attribute, walked like parameters()."""
        out: dict[str, np.ndarray] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, np.ndarray):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.buffers(prefix=f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.buffers(prefix=f"{key}.{i}."))
                    elif isinstance(item, np.ndarray):
                        out[f"{key}.{i}"] = item
        return out

    def state(self) -> dict:
        """Parameters plus buffers, the latter under a reserved prefix."""
        out: dict = dict(self.parameters())
        for name, arr in self.buffers().items():
            out[f"_buffer.{name}"] = arr
        return out

    def load_buffers(self, arrays) -> None:
        for name, arr in self.buffers().items():
            key = f"_buffer.{name}"
            if key not in arrays:
                raise ContractError(f"missing buffer {name!r} in state")
            src = np.asarray(arrays[key], dtype=np.float64)
            if src.shape != arr.shape:
                raise ContractError(f"buffer {name!r}: shape {src.shape} != {arr.shape}")
            arr[...] = src

    def store(self) -> ParameterStore:
        ps = ParameterStore()
        for name, t in self.parameters().items():
            ps.add(name, t)
        return ps

    def param_count(self) -> int:
        return sum(t.size for t in self.parameters().values())

    def load_state(self, arrays) -> None:
        params = self.parameters()
        for name, t in params.items():
            if name not in arrays:
                raise ContractError(f"missing parameter {name!r} in state")
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ContractError(f"parameter {name!r}: shape {arr.shape} != {t.data.shape}")
            t.data = arr.copy()


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, scale: float | None = None):
        s = scale if scale is not None else 1.0 / np.sqrt(in_dim)
        self.weight = Tensor(rng.normal(0.0, s, size=(in_dim, out_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.weight), self.bias)


class MLP(Module):
    """Stack of Linear layers with per-layer activations (len == number of layers)."""

    def __init__(self, dims: list[int], activations: list[str | None], rng: np.random.Generator):
        if len(activations) != len(dims) - 1:
            raise ContractError("MLP: need one activation entry per layer")
        self.layers = [Linear(dims[i], dims[i + 1], rng) for i in range(len(dims) - 1)]
        self._acts = list(activations)

    def __call__(self, x: Tensor) -> Tensor:
        for layer, act in zip(self.layers, self._acts):
            x = ACTIVATIONS[act](layer(x))
        return x


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k, rng: np.random.Generator, stride=1, padding=0):
        kh, kw = (k, k) if isinstance(k, int) else k
        s = 1.0 / np.sqrt(cin * kh * kw)
        self.weight = Tensor(rng.normal(0.0, s, size=(cout, cin, kh, kw)), requires_grad=True)
        self.bias = Tensor(np.zeros(cout), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Conv3d(Module):
    def __init__(self, cin: int, cout: int, k, rng: np.random.Generator, stride=1, padding=0):
        kd, kh, kw = (k, k, k) if isinstance(k, int) else k
        s = 1.0 / np.sqrt(cin * kd * kh * kw)
        self.weight = Tensor(rng.normal(0.0, s, size=(cout, cin, kd, kh, kw)), requires_grad=True)
        self.bias = Tensor(np.zeros(cout), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return conv3d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class GRUCell(Module):
    """Single gated recurrent cell (torch gate conventions)."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator):
        s_in = 1.0 / np.sqrt(in_dim)
        s_h = 1.0 / np.sqrt(hidden)
        self.w_ih = Tensor(rng.normal(0.0, s_in, size=(in_dim, 3 * hidden)), requires_grad=True)
        self.w_hh = Tensor(rng.normal(0.0, s_h, size=(hidden, 3 * hidden)), requires_grad=True)
        self.b_ih = Tensor(np.zeros(3 * hidden), requires_grad=True)
        self.b_hh = Tensor(np.zeros(3 * hidden), requires_grad=True)
        self.hidden = hidden

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        nh = self.hidden
        gi = add(matmul(x, self.w_ih), self.b_ih)
        gh = add(matmul(h, self.w_hh), self.b_hh)
        i_r, i_z, i_n = gi[:, :nh], gi[:, nh : 2 * nh], gi[:, 2 * nh :]
        h_r, h_z, h_n = gh[:, :nh], gh[:, nh : 2 * nh], gh[:, 2 * nh :]
        r = sigmoid(add(i_r, h_r))
        z = sigmoid(add(i_z, h_z))
        n = tanh(add(i_n, mul(r, h_n)))
        return add(mul(sub(Tensor(1.0), z), n), mul(z, h))
