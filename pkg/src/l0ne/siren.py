"""Sinusoidal MLP with a hand-written backward pass.

Parameters live in one flat vector. The canonical order is layer by layer,
each layer's weight matrix (out x in, row-major) followed by its bias. Gates,
pruning masks and the on-disk payload all index into this same order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .imageio import PixelDataset

__all__ = [
    "SirenConfig",
    "SirenParams",
    "ForwardCache",
    "init_siren",
    "forward",
    "loss_and_grad",
    "parse_arch",
]


@dataclass(frozen=True)
class SirenConfig:
    hidden_layers: int
    hidden_width: int
    omega0: float = 30.0
    input_dim: int = 2
    output_dim: int = 3

    def __post_init__(self):
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ValueError("need at least one hidden layer of positive width")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input and output dimensions must be positive")

    @property
    def widths(self) -> list[int]:
        """Feature widths from input to output, ``hidden_layers + 2`` entries."""
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        w = self.widths
        return [(w[i + 1], w[i]) for i in range(len(w) - 1)]

    @cached_property
    def layer_slices(self) -> list[tuple[slice, slice]]:
        """(weight slice, bias slice) into the flat vector for every layer."""
        out = []
        offset = 0
        for n_out, n_in in self.layer_shapes:
            w = slice(offset, offset + n_out * n_in)
            offset = w.stop
            b = slice(offset, offset + n_out)
            offset = b.stop
            out.append((w, b))
        return out

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)

    def __str__(self):
        return f"{self.input_dim}-{self.hidden_layers}x[{self.hidden_width}]-{self.output_dim}"


def parse_arch(text: str, omega0: float = 30.0) -> SirenConfig:
    """Parse ``"LxW"`` (e.g. ``"5x20"``) into a config with L hidden layers of width W."""
    try:
        layers, width = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"architecture must look like '5x20', got {text!r}") from None
    return SirenConfig(layers, width, omega0)


@dataclass
class SirenParams:
    config: SirenConfig
    flat: np.ndarray

    def __post_init__(self):
        if self.flat.shape != (self.config.n_params,):
            raise ValueError(
                f"{self.config} needs {self.config.n_params} parameters, got shape {self.flat.shape}"
            )

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-layer (W, b) views into ``flat``."""
        out = []
        for (n_out, n_in), (ws, bs) in zip(self.config.layer_shapes, self.config.layer_slices):
            out.append((self.flat[ws].reshape(n_out, n_in), self.flat[bs]))
        return out

    def with_flat(self, flat: np.ndarray) -> "SirenParams":
        return SirenParams(self.config, flat)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each layer
    phases: list[np.ndarray]  # omega0 * (W h + b) for each sine layer


def init_siren(config: SirenConfig, seed, magnitude_scale: float = 1.0, dtype=np.float32) -> SirenParams:
    """SIREN initialisation, optionally widened by ``magnitude_scale``.

    First layer: U(-s/fan_in, s/fan_in). Later layers:
    U(-s*sqrt(6/fan_in)/omega0, +...). Biases follow their layer's weights.
    ``seed`` may be an int or a ``numpy.random.Generator`` (PCG64).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    flat = np.empty(config.n_params, dtype=np.float64)
    for i, ((_, fan_in), (ws, bs)) in enumerate(zip(config.layer_shapes, config.layer_slices)):
        if i == 0:
            bound = magnitude_scale / fan_in
        else:
            bound = magnitude_scale * np.sqrt(6.0 / fan_in) / config.omega0
        flat[ws.start:bs.stop] = rng.uniform(-bound, bound, size=bs.stop - ws.start)
    return SirenParams(config, flat.astype(dtype))


def forward(params: SirenParams, coords: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on an (N, input_dim) coordinate array.

    Hidden layers apply ``sin(omega0 * (W h + b))``; the output layer is affine
    and unclipped. Arithmetic runs in the dtype of ``params.flat``.
    """
    cfg = params.config
    dtype = params.flat.dtype
    h = np.asarray(coords, dtype=dtype)
    if h.ndim != 2 or h.shape[1] != cfg.input_dim:
        raise ValueError(f"coords must be (N, {cfg.input_dim}), got {h.shape}")
    omega0 = dtype.type(cfg.omega0)
    layers = params.layers()
    cache = ForwardCache([], [])
    for W, b in layers[:-1]:
        cache.inputs.append(h)
        phase = omega0 * (h @ W.T + b)
        cache.phases.append(phase)
        h = np.sin(phase)
    W, b = layers[-1]
    cache.inputs.append(h)
    return h @ W.T + b, cache


def loss_and_grad(params: SirenParams, dataset: PixelDataset) -> tuple[float, np.ndarray]:
    """Mean squared error over pixels and channels, and its gradient.

    The gradient is returned as a flat vector in canonical parameter order.
    """
    if dataset.pixel_count == 0:
        raise ValueError("empty dataset")
    cfg = params.config
    dtype = params.flat.dtype
    pred, cache = forward(params, dataset.coords)
    resid = pred - dataset.targets.astype(dtype, copy=False)
    loss = float(np.mean(np.square(resid, dtype=np.float64)))

    grad = np.empty_like(params.flat)
    layers = params.layers()
    omega0 = dtype.type(cfg.omega0)
    delta = resid * dtype.type(2.0 / resid.size)
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        ws, bs = cfg.layer_slices[k]
        if k < len(layers) - 1:
            # d sin(omega0 u) / du = omega0 cos(omega0 u)
            delta = delta * (omega0 * np.cos(cache.phases[k]))
        grad[ws] = (delta.T @ cache.inputs[k]).ravel()
        grad[bs] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ W
    return loss, grad
