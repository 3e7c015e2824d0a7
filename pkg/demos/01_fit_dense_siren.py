"""
Fitting an image with a dense sine network
==========================================

An image is stored as the weights of a small MLP that maps pixel
coordinates to RGB. This script fits one to the bundled 64x64 sample and
prints how the PSNR climbs.
"""

from pathlib import Path

from l0ne import TrainConfig, load_image, parse_arch, train

image = load_image(Path(__file__).resolve().parents[1] / "data" / "sample64.png")
print(f"{image.height}x{image.width} image, {image.pixel_count} pixels")

# 5 hidden layers of width 20: 1803 parameters
config = TrainConfig("coin", parse_arch("5x20"), steps=1000, eval_every=200)
print("network:", config.arch, "with", config.arch.n_params, "parameters")

model, log = train(config, image)
for rec in log.records:
    print(f"step {rec.step:5d}  loss {rec.loss:.5f}  psnr {rec.psnr_f16:6.2f} dB  bpp {rec.bpp:.3f}")

# storing every weight as float16 costs 16 bits each
print(f"final: {log.final.psnr_f16:.2f} dB at {log.final.bpp:.3f} bits per pixel")
