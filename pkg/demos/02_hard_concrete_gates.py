"""
Hard-concrete gates
===================

Each weight gets a gate whose median can sit exactly at 0 or 1. Training
uses the median, so a closed gate removes its weight for real. The
probability that a gate is non-zero is smooth in its parameter and drives
the rate estimate.
"""

import numpy as np

from l0ne import gate_median, median_bounds, prob_nonzero, sample_gate

lo, hi = median_bounds()
print(f"median is exactly 0 below psi={lo:.4f} and exactly 1 above psi={hi:.4f}")

for psi in (-3.0, -1.0, 0.0, 1.0, 3.0):
    print(f"psi {psi:+.1f}: median {float(gate_median(psi)):.4f}  P(gate > 0) {float(prob_nonzero(psi)):.4f}")

# the closed form against a Monte-Carlo estimate
rng = np.random.default_rng(0)
u = np.clip(rng.uniform(size=200_000), 1e-12, 1 - 1e-12)
for psi in (-1.0, 0.5):
    freq = np.mean(sample_gate(psi, u) > 0)
    print(f"psi {psi:+.1f}: sampled {freq:.4f} vs closed form {float(prob_nonzero(psi)):.4f}")
