"""
Magnitude pruning baseline
==========================

Train dense, zero the smallest weights until the budget is met, then
fine-tune what is left. The first and last layers are kept whole.
"""

from pathlib import Path

from l0ne import TrainConfig, load_image, parse_arch, train

image = load_image(Path(__file__).resolve().parents[1] / "data" / "sample64.png")
config = TrainConfig("mp", parse_arch("5x30"), steps=1500, target_bpp=7.0, eval_every=500)
model, log = train(config, image)

# the step-S record appears twice: dense, then right after pruning
steps = [rec.step for rec in log.records]
cut = steps.index(config.steps) + 1
for i, rec in enumerate(log.records):
    phase = "dense" if i < cut else "pruned"
    print(f"step {rec.step:5d}  {phase:6s}  bpp {rec.bpp:6.3f}  psnr {rec.psnr_f16:6.2f} dB")
print(f"best PSNR within budget: {log.best_feasible_psnr:.2f} dB")
