"""Named parameter collections and the Adam optimizer."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from ..exceptions import ContractError
from .tensor import Tensor


class ParameterStore:
    """An ordered name -> grad-tracked Tensor map."""

    def __init__(self, params: Mapping[str, Tensor] | None = None):
        self._params: dict[str, Tensor] = {}
        if params:
            for name, t in params.items():
                self.add(name, t)

    def add(self, name: str, t: Tensor) -> Tensor:
        if name in self._params:
            raise ContractError(f"parameter {name!r} already registered")
        t.requires_grad = True
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def keys(self):
        return self._params.keys()

    def values(self):
        return self._params.values()

    def items(self):
        return self._params.items()

    def count(self) -> int:
        """Total number of scalar parameters."""
        return sum(t.size for t in self._params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        for name, t in self._params.items():
            if name not in arrays:
                raise ContractError(f"checkpoint missing parameter {name!r}")
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ContractError(
                    f"checkpoint parameter {name!r} has shape {arr.shape}, expected {t.data.shape}"
                )
            t.data = arr.copy()


class Adam:
    """Adam with bias correction; state is kept per parameter name."""

    def __init__(
        self,
        params: ParameterStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m = {n: np.zeros_like(p.data) for n, p in params.items()}
        self._v = {n: np.zeros_like(p.data) for n, p in params.items()}

    def step(self, grads: Mapping[str, Tensor]) -> None:
        """Apply one update from a gradient map keyed exactly like the store."""
        if set(grads.keys()) != set(self.params.keys()):
            missing = set(self.params.keys()) - set(grads.keys())
            extra = set(grads.keys()) - set(self.params.keys())
            raise ContractError(f"adam_step: key mismatch (missing {missing or '{}'}, extra {extra or '{}'})")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            gd = g.data if isinstance(g, Tensor) else np.asarray(g, dtype=np.float64)
            if gd.shape != p.data.shape:
                raise ContractError(f"adam_step: gradient for {name!r} has shape {gd.shape}, expected {p.data.shape}")
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * gd
            v *= b2
            v += (1.0 - b2) * gd * gd
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Moments and step counter, keyed for the checkpoint container."""
        out = {"adam.t": np.array(float(self.t))}
        for name in self.params.keys():
            out[f"adam.m.{name}"] = self._m[name]
            out[f"adam.v.{name}"] = self._v[name]
        return out

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        if "adam.t" in arrays:
            self.t = int(round(float(np.asarray(arrays["adam.t"]).reshape(-1)[0])))
        for name in self.params.keys():
            for prefix, slot in (("adam.m.", self._m), ("adam.v.", self._v)):
                key = prefix + name
                if key in arrays:
                    arr = np.asarray(arrays[key], dtype=np.float64)
                    if arr.shape != slot[name].shape:
                        raise ContractError(
                            f"optimizer state {key!r} has shape {arr.shape}, expected {slot[name].shape}")
                    slot[name] = arr.copy()
