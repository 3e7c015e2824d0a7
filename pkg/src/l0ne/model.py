from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bpp import cast_f16
from .siren import SirenConfig, SirenParams

__all__ = ["TrainedModel"]


@dataclass
class TrainedModel:
    """Magnitudes, gate values and a keep-mask over the flat parameter vector.

    The parameters actually used are ``magnitudes * gates`` with masked-out
    entries forced to zero. Dense models carry all-ones gates and mask.
    """

    config: SirenConfig
    magnitudes: np.ndarray
    gates: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        n = self.config.n_params
        for name in ("magnitudes", "gates", "mask"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {getattr(self, name).shape}")
        self.mask = self.mask.astype(bool)

    @classmethod
    def dense(cls, config: SirenConfig, flat: np.ndarray) -> "TrainedModel":
        return cls(config, flat, np.ones_like(flat), np.ones(flat.shape, dtype=bool))

    @property
    def effective(self) -> np.ndarray:
        return np.where(self.mask, self.magnitudes * self.gates, self.magnitudes.dtype.type(0))

    def params(self) -> SirenParams:
        return SirenParams(self.config, self.effective)

    def half_params(self) -> SirenParams:
        """Parameters after the float16 round trip, widened back to float32."""
        return SirenParams(self.config, cast_f16(self.effective).astype(np.float32))
