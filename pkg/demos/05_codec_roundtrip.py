"""
The .l0ne file
==============

A compressed image is a short header, a bitmap of which weights survive,
and the surviving weights as float16. Decoding renders the network at any
resolution.
"""

import tempfile
from pathlib import Path

from l0ne import (
    TrainConfig,
    decode,
    decompress_to_image,
    encode,
    load_image,
    parse_arch,
    psnr,
    size_report,
    train,
)

image = load_image(Path(__file__).resolve().parents[1] / "data" / "sample64.png")
model, log = train(TrainConfig("loonie", parse_arch("3x30"), steps=4000, target_bpp=6.0,
                               lr_dual=1e-5, eval_every=500), image)

data = encode(model, image.height, image.width)
print(f"{len(data)} bytes on disk; report: {size_report(data)}")

decoded, (h, w) = decode(data)
assert encode(decoded, h, w) == data
pixels = decompress_to_image(decoded, h, w)
print(f"decoded PSNR {psnr(image.targets, pixels.reshape(-1, 3) / 255):.3f} dB, "
      f"logged {log.final.psnr_f16:.3f} dB")

big = decompress_to_image(decoded, 2 * h, 2 * w)
print("rendered again at", big.shape[:2])

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "sample.l0ne"
    path.write_bytes(data)
    print("wrote", path.name, path.stat().st_size, "bytes")
