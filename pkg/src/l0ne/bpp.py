"""Bit accounting for half-precision sparse models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hardconcrete import DEFAULT, HardConcreteConfig, prob_nonzero, prob_nonzero_grad
from .siren import SirenConfig

__all__ = [
    "BppReport",
    "HALF_BITS",
    "cast_f16",
    "f16_bits",
    "casted_bpp",
    "expected_bpp",
    "arch_bpp",
    "PAPER_ARCHITECTURES",
]

HALF_BITS = 16

# Architectures (hidden layers, width) with their reported float16 BPP at 768x512.
PAPER_ARCHITECTURES = {
    0.07: (5, 20),
    0.15: (5, 30),
    0.3: (10, 28),
    0.6: (10, 40),
    0.81: (13, 40),
}


@dataclass(frozen=True)
class BppReport:
    active_params: int
    bits_per_param: int
    pixel_count: int

    def __post_init__(self):
        if self.pixel_count <= 0:
            raise ValueError("pixel_count must be positive")

    @property
    def bpp(self) -> float:
        return self.active_params * self.bits_per_param / self.pixel_count


def cast_f16(x) -> np.ndarray:
    """Round to IEEE binary16 (nearest-even, overflow to inf, subnormals kept)."""
    with np.errstate(over="ignore"):
        return np.asarray(x).astype(np.float16)


def f16_bits(x) -> np.ndarray:
    """16-bit patterns of ``cast_f16(x)`` as uint16."""
    return cast_f16(x).view(np.uint16)


def casted_bpp(effective_params, pixel_count: int) -> BppReport:
    """Count parameters that stay non-zero after the half-precision cast.

    Values that underflow to +/-0 in float16 are inactive.
    """
    active = int(np.count_nonzero(cast_f16(effective_params)))
    return BppReport(active, HALF_BITS, pixel_count)


def expected_bpp(psi, pixel_count: int, cfg: HardConcreteConfig = DEFAULT) -> tuple[float, np.ndarray]:
    """Differentiable BPP surrogate and its gradient with respect to ``psi``.

    Every gated parameter is charged a constant 16 bits, so the magnitudes
    receive no gradient from this term.
    """
    if pixel_count <= 0:
        raise ValueError("pixel_count must be positive")
    psi = np.asarray(psi)
    if psi.dtype.kind != "f":
        psi = psi.astype(np.float64)
    scale = HALF_BITS / pixel_count
    value = scale * float(np.sum(prob_nonzero(psi, cfg), dtype=np.float64))
    grad = prob_nonzero_grad(psi, cfg) * psi.dtype.type(scale) if psi.size else np.zeros_like(psi)
    return value, grad


def arch_bpp(config: SirenConfig, bits_per_param: int, pixel_count: int) -> float:
    """BPP of the dense architecture."""
    if pixel_count <= 0:
        raise ValueError("pixel_count must be positive")
    return config.n_params * bits_per_param / pixel_count
