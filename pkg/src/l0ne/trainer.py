"""Training procedures: dense fitting, constrained sparse fitting, prune + fine-tune.

All runs are full batch and deterministic for a given seed. Randomness comes
from ``numpy.random.SeedSequence(seed)``: the first spawned stream draws the
network weights, the second the gate log-locations.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .bpp import arch_bpp, casted_bpp, expected_bpp, HALF_BITS
from .codec import decompress_to_image
from .hardconcrete import DEFAULT as HC_DEFAULT
from .hardconcrete import HardConcreteConfig, gate_median, gate_median_grad
from .imageio import PixelDataset, psnr
from .model import TrainedModel
from .optim import AdamState, DualState
from .siren import SirenConfig, SirenParams, forward, init_siren, loss_and_grad

__all__ = [
    "METHODS",
    "PAPER_PRESETS",
    "TrainConfig",
    "Record",
    "MetricsLog",
    "LoonieState",
    "lagrangian_grad",
    "loonie_step",
    "train",
    "train_coin",
    "train_loonie",
    "train_mp",
    "magnitude_prune",
    "finetune",
    "evaluate",
]

METHODS = ("coin", "loonie", "mp")

COIN_LR = 2e-4
LOONIE_LR = 1e-3
LOONIE_GATE_LR = 7e-4
DEFAULT_DUAL_LR = 1e-3


class Preset(NamedTuple):
    coin_arch: tuple[int, int]
    initial_arch: tuple[int, int]
    dual_lr: float


# target BPP -> (dense arch at that rate, larger arch to sparsify from, dual step size)
PAPER_PRESETS = {
    0.07: Preset((5, 20), (5, 30), 7e-3),
    0.15: Preset((5, 30), (10, 28), 3e-3),
    0.3: Preset((10, 28), (10, 40), 1e-3),
    0.6: Preset((10, 40), (13, 40), 8e-4),
}


@dataclass
class TrainConfig:
    method: str
    arch: SirenConfig
    steps: int = 50_000
    seed: int = 0
    target_bpp: float | None = None
    lr: float | None = None  # magnitudes; None picks the method default
    lr_gates: float = LOONIE_GATE_LR
    lr_dual: float = DEFAULT_DUAL_LR
    finetune_lr: float = COIN_LR
    eval_every: int = 100
    restarts: bool = True
    psi_init_std: float = 0.01
    gates: HardConcreteConfig = field(default_factory=HardConcreteConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.method in ("loonie", "mp"):
            if self.target_bpp is None or not self.target_bpp > 0:
                raise ValueError(f"method {self.method!r} needs a positive target_bpp")
        if self.lr is None:
            self.lr = LOONIE_LR if self.method == "loonie" else COIN_LR

    def check_feasible_target(self, pixel_count: int) -> None:
        dense = arch_bpp(self.arch, HALF_BITS, pixel_count)
        if self.method == "loonie" and self.target_bpp >= dense:
            raise ValueError(
                f"target {self.target_bpp} BPP is not below the dense BPP {dense:.4f} of {self.arch}"
            )
        if self.method == "mp":
            slices = self.arch.layer_slices
            edge = sum(s.stop - s.start for s in (*slices[0], *slices[-1]))
            floor_bpp = HALF_BITS * edge / pixel_count
            if self.target_bpp < floor_bpp:
                raise ValueError(
                    f"target {self.target_bpp} BPP cannot hold the dense first and last layers "
                    f"of {self.arch} ({floor_bpp:.4f} BPP)"
                )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arch"] = str(self.arch)
        d["omega0"] = self.arch.omega0
        return d


@dataclass
class Record:
    step: int
    loss: float
    psnr_f32: float
    psnr_f16: float
    bpp: float
    expected_bpp: float
    lam: float
    feasible: bool
    wall_ms: float
    best_psnr: float = -math.inf
    best_feasible_psnr: float = -math.inf


CSV_HEADER = ["step", "loss", "psnr_f32", "psnr_f16", "bpp", "expected_bpp", "lambda", "feasible", "wall_ms"]


@dataclass
class MetricsLog:
    """Evaluation records plus, for constrained runs, the per-step dual trace.

    ``psnr_f16`` is measured on the image a decoder would produce: float16
    parameters, float32 arithmetic, output clipped and rounded to 8 bits.
    ``best_feasible_psnr`` only ever looks at records that met the budget.
    """

    pixel_count: int
    target_bpp: float | None = None
    records: list[Record] = field(default_factory=list)
    final: Record | None = None
    # one entry per optimisation step: training loss before the update; for
    # constrained runs also the violation after the primal update and the
    # multiplier before and after the dual update
    losses: list[float] = field(default_factory=list)
    violations: list[float] = field(default_factory=list)
    lam_before: list[float] = field(default_factory=list)
    lam_after: list[float] = field(default_factory=list)

    def add(self, rec: Record) -> Record:
        prev = self.records[-1] if self.records else None
        rec.best_psnr = max(prev.best_psnr if prev else -math.inf, rec.psnr_f16)
        best_f = prev.best_feasible_psnr if prev else -math.inf
        rec.best_feasible_psnr = max(best_f, rec.psnr_f16) if rec.feasible else best_f
        self.records.append(rec)
        return rec

    @property
    def best_psnr(self) -> float:
        return self.records[-1].best_psnr if self.records else -math.inf

    @property
    def best_feasible_psnr(self) -> float:
        return self.records[-1].best_feasible_psnr if self.records else -math.inf

    def trace(self, violation: float, before: float, after: float) -> None:
        self.violations.append(violation)
        self.lam_before.append(before)
        self.lam_after.append(after)

    def write_csv(self, path, config: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if config is not None:
                fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            rows = list(self.records)
            # the end state goes last even when off the eval cadence
            if self.final is not None and (not rows or rows[-1].step != self.final.step):
                rows.append(self.final)
            for r in rows:
                w.writerow([
                    r.step, repr(r.loss), repr(r.psnr_f32), repr(r.psnr_f16), repr(r.bpp),
                    repr(r.expected_bpp), repr(r.lam), int(r.feasible), f"{r.wall_ms:.3f}",
                ])


def evaluate(model: TrainedModel, dataset: PixelDataset) -> tuple[float, float, float]:
    """Return (mse, psnr of the float32 model, psnr of the decoded image)."""
    pred, _ = forward(model.params(), dataset.coords)
    mse = float(np.mean(np.square(pred - dataset.targets, dtype=np.float64)))
    p32 = psnr(dataset.targets, pred)
    decoded = decompress_to_image(model, dataset.height, dataset.width)
    p16 = psnr(dataset.targets, decoded.reshape(-1, 3) / 255.0)
    return mse, p32, p16


def _record(step, model, dataset, t0, target, expected=None, lam=0.0) -> Record:
    mse, p32, p16 = evaluate(model, dataset)
    report = casted_bpp(model.effective, dataset.pixel_count)
    if expected is None:
        expected = HALF_BITS * int(model.mask.sum()) / dataset.pixel_count
    feasible = target is None or report.bpp <= target
    return Record(step, mse, p32, p16, report.bpp, expected, lam, feasible,
                  1000.0 * (time.perf_counter() - t0))


def _on_cadence(step: int, cfg: TrainConfig) -> bool:
    return step % cfg.eval_every == 0


def _train_masked(model: TrainedModel, dataset: PixelDataset, steps: int, lr: float,
                  cfg: TrainConfig, log: MetricsLog, step_offset: int, t0: float) -> TrainedModel:
    """Adam on the magnitudes, gradient and values zeroed outside the mask."""
    keep = model.mask.astype(model.magnitudes.dtype)
    theta = model.magnitudes * keep
    adam = AdamState(lr)
    current = replace(model, magnitudes=theta)
    for step in range(1, steps + 1):
        loss, g = loss_and_grad(SirenParams(model.config, theta * model.gates), dataset)
        log.losses.append(loss)
        theta = adam.step(theta, g * model.gates * keep) * keep
        current = replace(model, magnitudes=theta)
        if _on_cadence(step, cfg):
            log.add(_record(step_offset + step, current, dataset, t0, log.target_bpp))
    log.final = _record(step_offset + steps, current, dataset, t0, log.target_bpp)
    return current


def train_coin(config: TrainConfig, dataset: PixelDataset) -> tuple[TrainedModel, MetricsLog]:
    """Dense full-batch Adam on the reconstruction loss."""
    dataset = dataset.astype(np.float32)
    ws, _ = np.random.SeedSequence(config.seed).spawn(2)
    params = init_siren(config.arch, np.random.default_rng(ws), 1.0)
    model = TrainedModel.dense(config.arch, params.flat)
    log = MetricsLog(dataset.pixel_count, config.target_bpp)
    t0 = time.perf_counter()
    log.add(_record(0, model, dataset, t0, config.target_bpp))
    model = _train_masked(model, dataset, config.steps, config.lr, config, log, 0, t0)
    return model, log


def magnitude_prune(model: TrainedModel, target_bpp: float, pixel_count: int) -> TrainedModel:
    """Zero the smallest-magnitude parameters to meet ``target_bpp``.

    First and last layers stay dense. The rest of the budget is spread at one
    keep-fraction over every other weight matrix and bias vector, each pruned
    on its own; ties keep the lower index. A tensor may end up fully pruned.
    """
    cfg = model.config
    n = cfg.n_params
    # small slack so that target == dense BPP keeps everything despite rounding
    budget = min(n, math.floor(target_bpp * pixel_count / HALF_BITS + 1e-9))
    slices = cfg.layer_slices
    dense_sizes = [s.stop - s.start for s in (*slices[0], *slices[-1])]
    kept_dense = sum(dense_sizes)
    if budget < kept_dense:
        raise ValueError(
            f"budget of {budget} parameters cannot hold the {kept_dense} first/last-layer parameters"
        )
    prunable = [s for layer in slices[1:-1] for s in layer]
    total = sum(s.stop - s.start for s in prunable)
    frac = (budget - kept_dense) / total if total else 1.0

    values = model.effective
    mask = model.mask.copy()
    for s in prunable:
        size = s.stop - s.start
        k = math.floor(frac * size)
        order = np.argsort(-np.abs(values[s]), kind="stable")
        m = np.zeros(size, dtype=bool)
        m[order[:k]] = True
        mask[s] &= m
    return TrainedModel(cfg, np.where(mask, values, 0).astype(values.dtype), np.ones_like(values), mask)


def finetune(model: TrainedModel, dataset: PixelDataset, steps: int, lr: float = COIN_LR,
             eval_every: int = 100, target_bpp: float | None = None) -> tuple[TrainedModel, MetricsLog]:
    """Continue training the surviving parameters; masked entries stay exactly zero."""
    dataset = dataset.astype(np.float32)
    cfg = TrainConfig("coin", model.config, steps=steps, eval_every=eval_every, lr=lr)
    log = MetricsLog(dataset.pixel_count, target_bpp)
    t0 = time.perf_counter()
    log.add(_record(0, model, dataset, t0, target_bpp))
    model = _train_masked(model, dataset, steps, lr, cfg, log, 0, t0)
    return model, log


def train_mp(config: TrainConfig, dataset: PixelDataset) -> tuple[TrainedModel, MetricsLog]:
    """Train dense, prune to the target, then fine-tune for as many steps.

    The log holds the dense phase (steps 0..S) followed by the pruned model at
    step S and the fine-tuning records up to 2S.
    """
    dataset = dataset.astype(np.float32)
    config.check_feasible_target(dataset.pixel_count)
    S = config.steps
    ws, _ = np.random.SeedSequence(config.seed).spawn(2)
    model = TrainedModel.dense(config.arch, init_siren(config.arch, np.random.default_rng(ws), 1.0).flat)
    log = MetricsLog(dataset.pixel_count, config.target_bpp)
    t0 = time.perf_counter()
    log.add(_record(0, model, dataset, t0, config.target_bpp))
    model = _train_masked(model, dataset, S, config.lr, config, log, 0, t0)
    pruned = magnitude_prune(model, config.target_bpp, dataset.pixel_count)
    log.add(_record(S, pruned, dataset, t0, config.target_bpp))
    model = _train_masked(pruned, dataset, S, config.finetune_lr, config, log, S, t0)
    return model, log


@dataclass
class LoonieState:
    magnitudes: np.ndarray
    psi: np.ndarray
    adam_theta: AdamState
    adam_psi: AdamState
    dual: DualState
    config: SirenConfig
    target_bpp: float
    gates: HardConcreteConfig = HC_DEFAULT
    step: int = 0

    def model(self) -> TrainedModel:
        z = gate_median(self.psi, self.gates)
        return TrainedModel(self.config, self.magnitudes, z, z > 0)


class StepInfo(NamedTuple):
    loss: float
    violation: float
    lam_before: float
    lam_after: float


def lagrangian_grad(config: SirenConfig, magnitudes: np.ndarray, psi: np.ndarray,
                    dataset: PixelDataset, lam: float,
                    gates: HardConcreteConfig = HC_DEFAULT):
    """Primal objective ``loss(theta * median(psi)) + lam * expected_bpp(psi)``.

    Returns (objective, grad wrt magnitudes, grad wrt psi, loss).
    """
    z = gate_median(psi, gates)
    loss, g = loss_and_grad(SirenParams(config, magnitudes * z), dataset)
    proxy, g_proxy = expected_bpp(psi, dataset.pixel_count, gates)
    grad_theta = g * z
    grad_psi = g * magnitudes * gate_median_grad(psi, gates) + psi.dtype.type(lam) * g_proxy
    return loss + lam * proxy, grad_theta, grad_psi, loss


def loonie_step(state: LoonieState, dataset: PixelDataset) -> StepInfo:
    """One simultaneous descent-ascent step.

    The primal gradient uses the expected-BPP proxy; the multiplier moves on
    the exact float16 BPP of the updated model.
    """
    lam = state.dual.lam
    _, g_theta, g_psi, loss = lagrangian_grad(
        state.config, state.magnitudes, state.psi, dataset, lam, state.gates)
    state.magnitudes = state.adam_theta.step(state.magnitudes, g_theta)
    state.psi = state.adam_psi.step(state.psi, g_psi)
    eff = state.magnitudes * gate_median(state.psi, state.gates)
    violation = casted_bpp(eff, dataset.pixel_count).bpp - state.target_bpp
    state.dual.step(violation)
    state.step += 1
    return StepInfo(loss, violation, lam, state.dual.lam)


def init_loonie(config: TrainConfig, n_pixels: int) -> LoonieState:
    ws, gs = np.random.SeedSequence(config.seed).spawn(2)
    theta = init_siren(config.arch, np.random.default_rng(ws), 2.0).flat
    psi = np.random.default_rng(gs).normal(0.0, config.psi_init_std, theta.size).astype(np.float32)
    return LoonieState(
        magnitudes=theta,
        psi=psi,
        adam_theta=AdamState(config.lr),
        adam_psi=AdamState(config.lr_gates),
        dual=DualState(config.lr_dual, config.restarts),
        config=config.arch,
        target_bpp=config.target_bpp,
        gates=config.gates,
    )


def train_loonie(config: TrainConfig, dataset: PixelDataset) -> tuple[TrainedModel, MetricsLog]:
    """Constrained sparse training from a doubled-range SIREN init."""
    if config.method != "loonie":
        raise ValueError("train_loonie needs method='loonie'")
    dataset = dataset.astype(np.float32)
    config.check_feasible_target(dataset.pixel_count)
    state = init_loonie(config, dataset.pixel_count)
    log = MetricsLog(dataset.pixel_count, config.target_bpp)
    t0 = time.perf_counter()

    def rec(step):
        exp_bpp, _ = expected_bpp(state.psi, dataset.pixel_count, state.gates)
        return _record(step, state.model(), dataset, t0, config.target_bpp, exp_bpp, state.dual.lam)

    log.add(rec(0))
    for step in range(1, config.steps + 1):
        info = loonie_step(state, dataset)
        log.losses.append(info.loss)
        log.trace(info.violation, info.lam_before, info.lam_after)
        if _on_cadence(step, config):
            log.add(rec(step))
    log.final = rec(config.steps)
    return state.model(), log


def train(config: TrainConfig, dataset: PixelDataset) -> tuple[TrainedModel, MetricsLog]:
    return {"coin": train_coin, "loonie": train_loonie, "mp": train_mp}[config.method](config, dataset)
