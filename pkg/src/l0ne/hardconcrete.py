"""Hard-concrete gates parameterised by log-location ``psi = log(phi)``.

All functions are elementwise and accept scalars or arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HardConcreteConfig",
    "GateParams",
    "sample_gate",
    "gate_median",
    "gate_median_grad",
    "prob_nonzero",
    "prob_nonzero_grad",
    "expected_l0",
    "expected_l0_grad",
    "median_bounds",
]


@dataclass(frozen=True)
class HardConcreteConfig:
    gamma: float = -0.1
    zeta: float = 1.1
    beta: float = 2.0 / 3.0

    def __post_init__(self):
        if not self.gamma < 0 < 1 < self.zeta:
            raise ValueError("need gamma < 0 < 1 < zeta")
        if not 0 < self.beta < 1:
            raise ValueError("need 0 < beta < 1")

    @property
    def log_ratio(self) -> float:
        """beta * log(-gamma / zeta), the shift inside P[z != 0]."""
        return self.beta * math.log(-self.gamma / self.zeta)


DEFAULT = HardConcreteConfig()


@dataclass
class GateParams:
    psi: np.ndarray
    config: HardConcreteConfig = field(default_factory=HardConcreteConfig)

    def __post_init__(self):
        if not np.all(np.isfinite(self.psi)):
            raise ValueError("gate log-locations must be finite")

    def medians(self) -> np.ndarray:
        return gate_median(self.psi, self.config)


def _sigmoid(x):
    x = np.asarray(x)
    # exp of a non-positive argument only, so no overflow warnings
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(np.result_type(x, np.float32))


def _stretch(s, cfg):
    # s*zeta + (1-s)*gamma rather than s*(zeta-gamma) + gamma: the former
    # yields exactly 0.5 at s = 0.5 in both float32 and float64.
    dt = np.result_type(s)
    return s * dt.type(cfg.zeta) + (1 - s) * dt.type(cfg.gamma)


def sample_gate(psi, u, cfg: HardConcreteConfig = DEFAULT):
    """Draw gates from uniforms ``u`` in (0, 1). Used for test oracles only."""
    psi = np.asarray(psi, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    s = _sigmoid((psi + np.log(u) - np.log1p(-u)) / cfg.beta)
    return np.clip(_stretch(s, cfg), 0.0, 1.0)


def _median_preclip(psi, cfg):
    psi = np.asarray(psi)
    if psi.dtype.kind != "f":
        psi = psi.astype(np.float64)
    s = _sigmoid(psi / psi.dtype.type(cfg.beta))
    return s, _stretch(s, cfg)


def gate_median(psi, cfg: HardConcreteConfig = DEFAULT):
    """Deterministic gate: the hard-concrete median, saturating at 0 and 1."""
    _, pre = _median_preclip(psi, cfg)
    return np.clip(pre, 0, 1)


def gate_median_grad(psi, cfg: HardConcreteConfig = DEFAULT):
    """d median / d psi; zero wherever the median is clamped, boundaries included."""
    s, pre = _median_preclip(psi, cfg)
    dt = s.dtype.type
    interior = (pre > 0) & (pre < 1)
    d = dt(cfg.zeta - cfg.gamma) * s * (1 - s) / dt(cfg.beta)
    return np.where(interior, d, dt(0))


def median_bounds(cfg: HardConcreteConfig = DEFAULT) -> tuple[float, float]:
    """psi values at which the median reaches exactly 0 and exactly 1."""
    span = cfg.zeta - cfg.gamma

    def logit(p):
        return math.log(p / (1 - p))

    return cfg.beta * logit(-cfg.gamma / span), cfg.beta * logit((1 - cfg.gamma) / span)


def prob_nonzero(psi, cfg: HardConcreteConfig = DEFAULT):
    """P[z != 0] = sigmoid(psi - beta * log(-gamma / zeta))."""
    psi = np.asarray(psi)
    if psi.dtype.kind != "f":
        psi = psi.astype(np.float64)
    return _sigmoid(psi - psi.dtype.type(cfg.log_ratio))


def prob_nonzero_grad(psi, cfg: HardConcreteConfig = DEFAULT):
    p = prob_nonzero(psi, cfg)
    return p * (1 - p)


def expected_l0(psi, cfg: HardConcreteConfig = DEFAULT) -> float:
    """Expected number of non-zero gates."""
    psi = np.asarray(psi)
    if psi.size == 0:
        return 0.0
    return float(np.sum(prob_nonzero(psi, cfg), dtype=np.float64))


def expected_l0_grad(psi, cfg: HardConcreteConfig = DEFAULT):
    return prob_nonzero_grad(psi, cfg)
