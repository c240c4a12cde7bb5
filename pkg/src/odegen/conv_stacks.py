"""Strided conv stacks used by the frame and sequence critics.

A stack is described by a list of (out_channels, kernel, stride, padding)
entries; LeakyReLU(0.2) sits between layers, the final layer is linear.  The
`activation_shapes` helpers report per-layer output shapes so tests can pin
the reference architectures exactly.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, leaky_relu, mean, reshape
from .exceptions import ShapeError
from .nn import Conv2d, Conv3d, Module


class ConvStack2d(Module):
    """(N, C, H, W) -> (N,) critic."""

    def __init__(self, in_channels: int, layers: list[tuple], rng: np.random.Generator):
        convs = []
        c = in_channels
        for cout, k, s, p in layers:
            convs.append(Conv2d(c, cout, k, rng, stride=s, padding=p))
            c = cout
        if layers[-1][0] != 1:
            raise ShapeError("critic stack must end in a single channel")
        self.convs = convs
        self.in_channels = in_channels

    def features(self, x: Tensor) -> list[Tensor]:
        outs = []
        n = len(self.convs)
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < n - 1:
                x = leaky_relu(x, 0.2)
            outs.append(x)
        return outs

    def __call__(self, x: Tensor) -> Tensor:
        y = self.features(x)[-1]
        n = y.shape[0]
        return reshape(mean(reshape(y, (n, int(np.prod(y.shape[1:])))), axis=1), (n,))

    def activation_shapes(self, input_shape: tuple) -> list[tuple]:
        """Per-layer output shapes (channels, H, W) for one sample."""
        x = Tensor(np.zeros((1,) + tuple(input_shape)))
        return [f.shape[1:] for f in self.features(x)]


class ConvStack3d(Module):
    """(N, C, D, H, W) -> (N,) critic."""

    def __init__(self, in_channels: int, layers: list[tuple], rng: np.random.Generator):
        convs = []
        c = in_channels
        for cout, k, s, p in layers:
            convs.append(Conv3d(c, cout, k, rng, stride=s, padding=p))
            c = cout
        if layers[-1][0] != 1:
            raise ShapeError("critic stack must end in a single channel")
        self.convs = convs
        self.in_channels = in_channels

    def features(self, x: Tensor) -> list[Tensor]:
        outs = []
        n = len(self.convs)
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < n - 1:
                x = leaky_relu(x, 0.2)
            outs.append(x)
        return outs

    def __call__(self, x: Tensor) -> Tensor:
        y = self.features(x)[-1]
        n = y.shape[0]
        return reshape(mean(reshape(y, (n, int(np.prod(y.shape[1:])))), axis=1), (n,))

    def activation_shapes(self, input_shape: tuple) -> list[tuple]:
        x = Tensor(np.zeros((1,) + tuple(input_shape)))
        return [f.shape[1:] for f in self.features(x)]
