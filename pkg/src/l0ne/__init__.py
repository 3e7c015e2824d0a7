"""Sparse implicit neural representations for image compression.

An image is stored as the float16 weights of a small sinusoidal MLP that maps
pixel coordinates to colours. ``train_loonie`` learns which weights to keep
under a hard bits-per-pixel budget; ``train_coin`` and ``train_mp`` are the
dense and magnitude-pruning baselines. ``encode``/``decode`` read and write
the compressed ``.l0ne`` files.
"""

from .bpp import BppReport, arch_bpp, cast_f16, casted_bpp, expected_bpp, f16_bits
from .codec import CodecError, decode, decompress_to_image, encode, size_report
from .hardconcrete import (
    GateParams,
    HardConcreteConfig,
    expected_l0,
    gate_median,
    gate_median_grad,
    median_bounds,
    prob_nonzero,
    sample_gate,
)
from .imageio import PixelDataset, load_image, make_coord_grid, psnr, save_image
from .model import TrainedModel
from .optim import AdamState, DualState
from .siren import SirenConfig, SirenParams, forward, init_siren, loss_and_grad, parse_arch
from .trainer import (
    MetricsLog,
    TrainConfig,
    finetune,
    loonie_step,
    magnitude_prune,
    train,
    train_coin,
    train_loonie,
    train_mp,
)

__version__ = "0.1.0"
