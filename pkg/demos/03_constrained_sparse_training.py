"""
Training under a bit budget
===========================

Start from a larger network and let the gates switch weights off until the
float16 model fits the budget. A Lagrange multiplier grows while the model
is over budget and drops back to zero once it fits.

The dual step size has to match the size of the violation. On a 64x64
image the violations are several BPP, so a much smaller step than the
768x512 default keeps the multiplier from overshooting.
"""

from pathlib import Path

import numpy as np

from l0ne import TrainConfig, arch_bpp, load_image, parse_arch, train

image = load_image(Path(__file__).resolve().parents[1] / "data" / "sample64.png")
arch = parse_arch("5x30")
target = 7.0
print(f"dense {arch}: {arch_bpp(arch, 16, image.pixel_count):.2f} BPP, target {target} BPP")

config = TrainConfig("loonie", arch, steps=5000, target_bpp=target, lr_dual=3e-6, eval_every=500)
model, log = train(config, image)

for rec in log.records:
    print(f"step {rec.step:5d}  bpp {rec.bpp:6.3f}  expected {rec.expected_bpp:6.3f}  "
          f"lambda {rec.lam:.2e}  psnr {rec.psnr_f16:6.2f} dB  {'ok' if rec.feasible else 'over'}")

lam = np.array(log.lam_after)
print(f"peak multiplier {lam.max():.3e}; active weights {int(model.mask.sum())} of {arch.n_params}")
print(f"best PSNR within budget: {log.best_feasible_psnr:.2f} dB")
