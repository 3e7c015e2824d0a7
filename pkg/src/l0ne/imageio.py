"""Image loading/saving, coordinate grids and reconstruction metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "PixelDataset",
    "load_image",
    "make_coord_grid",
    "dataset_from_array",
    "psnr",
    "quantize_8bit",
    "save_image",
]

_SUPPORTED_FORMATS = {"PNG", "PPM"}
_SUPPORTED_MODES = {"RGB", "RGBA", "P"}


@dataclass(frozen=True)
class PixelDataset:
    """Pixel coordinates in [-1, 1]^2 and RGB targets in [0, 1]^3, row-major."""

    height: int
    width: int
    coords: np.ndarray  # (H*W, 2)
    targets: np.ndarray  # (H*W, 3)

    def __post_init__(self):
        n = self.height * self.width
        if self.coords.shape != (n, 2) or self.targets.shape != (n, 3):
            raise ValueError(
                f"expected coords (n, 2) and targets (n, 3) with n={n}, got "
                f"{self.coords.shape} and {self.targets.shape}"
            )

    @property
    def pixel_count(self) -> int:
        return self.height * self.width

    def astype(self, dtype) -> "PixelDataset":
        return PixelDataset(
            self.height,
            self.width,
            self.coords.astype(dtype),
            self.targets.astype(dtype),
        )

    def image_bytes(self) -> np.ndarray:
        """Targets as an (H, W, 3) uint8 array."""
        return quantize_8bit(self.targets).reshape(self.height, self.width, 3)


def _axis(n: int) -> np.ndarray:
    if n == 1:
        return np.array([-1.0])
    return 2.0 * np.arange(n) / (n - 1) - 1.0


def make_coord_grid(height: int, width: int, dtype=np.float32) -> np.ndarray:
    """Row-major grid of (row, col) coordinates, each axis spanning [-1, 1].

    An axis with a single sample sits at -1.
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    rows, cols = np.meshgrid(_axis(height), _axis(width), indexing="ij")
    return np.stack([rows.ravel(), cols.ravel()], axis=1).astype(dtype)


def dataset_from_array(pixels: np.ndarray, dtype=np.float32) -> PixelDataset:
    """Build a dataset from an (H, W, 3) uint8 array."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 array, got {pixels.shape} {pixels.dtype}")
    h, w, _ = pixels.shape
    if h == 0 or w == 0:
        raise ValueError("image has a zero dimension")
    targets = (pixels.reshape(-1, 3).astype(np.float64) / 255.0).astype(dtype)
    return PixelDataset(h, w, make_coord_grid(h, w, dtype), targets)


def load_image(path) -> PixelDataset:
    """Load an 8-bit PNG or binary PPM (P6) image.

    Alpha is dropped and palette images are expanded to RGB. Anything else
    (grayscale, 16-bit, other containers) is rejected with ``ValueError``.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in _SUPPORTED_FORMATS:
                raise ValueError(f"{path}: unsupported image format {im.format!r}")
            if im.mode not in _SUPPORTED_MODES:
                raise ValueError(f"{path}: unsupported pixel mode {im.mode!r}")
            pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise ValueError(f"{path}: not a decodable image") from exc
    return dataset_from_array(pixels)


def quantize_8bit(values: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and round half away from zero to uint8."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def save_image(predictions: np.ndarray, height: int, width: int, path) -> None:
    predictions = np.asarray(predictions)
    if predictions.size != height * width * 3:
        raise ValueError(
            f"{predictions.size} values cannot fill a {height}x{width} RGB image"
        )
    pixels = quantize_8bit(predictions).reshape(height, width, 3)
    Image.fromarray(pixels).save(Path(path), format="PNG")


def psnr(reference: np.ndarray, reconstruction: np.ndarray) -> float:
    """PSNR in dB for unit-range signals; ``inf`` when the inputs match."""
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(reconstruction, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean(np.square(np.clip(a, 0, 1) - np.clip(b, 0, 1)))
    if mse == 0:
        return math.inf
    return -10.0 * math.log10(mse)
