"""Adam for the primal variables and projected ascent for the multiplier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "DualState"]


@dataclass
class AdamState:
    """Adam moments for one parameter block. No weight decay."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    t: int = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        """Return updated parameters; moments are updated in place."""
        if params.shape != grads.shape:
            raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}")
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        elif self.m.shape != params.shape:
            raise ValueError(f"state shape {self.m.shape} does not match params {params.shape}")
        dt = params.dtype.type
        self.t += 1
        self.m = dt(self.beta1) * self.m + dt(1 - self.beta1) * grads
        self.v = dt(self.beta2) * self.v + dt(1 - self.beta2) * (grads * grads)
        m_hat = self.m / dt(1 - self.beta1**self.t)
        v_hat = self.v / dt(1 - self.beta2**self.t)
        return params - dt(self.lr) * m_hat / (np.sqrt(v_hat) + dt(self.eps))


@dataclass
class DualState:
    """Non-negative Lagrange multiplier updated by projected gradient ascent."""

    lr: float
    restarts: bool = True
    lam: float = 0.0

    def step(self, violation: float) -> float:
        """Ascend on the constraint violation; reset to zero when feasible if restarts are on."""
        if self.restarts and violation <= 0:
            self.lam = 0.0
        else:
            self.lam = max(0.0, self.lam + self.lr * violation)
        return self.lam
