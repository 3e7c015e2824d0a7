import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l0ne.bpp import arch_bpp, casted_bpp
from l0ne.hardconcrete import gate_median, median_bounds
from l0ne.imageio import PixelDataset, make_coord_grid
from l0ne.model import TrainedModel
from l0ne.optim import AdamState, DualState
from l0ne.siren import SirenConfig, SirenParams, init_siren, loss_and_grad, parse_arch
from l0ne.trainer import (
    CSV_HEADER,
    LoonieState,
    TrainConfig,
    finetune,
    init_loonie,
    lagrangian_grad,
    loonie_step,
    magnitude_prune,
    train,
)

from conftest import DESK_TARGET


def _toy(n_side=4, seed=0):
    rng = np.random.default_rng(seed)
    coords = make_coord_grid(n_side, n_side, np.float64)
    return PixelDataset(n_side, n_side, coords, rng.uniform(0, 1, (n_side * n_side, 3)))


# dense training

def test_coin_gains_ten_db_by_step_2000(desk):
    _, _, log = desk.coin
    by_step = {r.step: r for r in log.records}
    assert by_step[2000].psnr_f16 - by_step[0].psnr_f16 >= 10


def test_coin_loss_trends_down(desk):
    _, _, log = desk.coin
    windows = np.asarray(log.losses[:2000]).reshape(-1, 100).mean(axis=1)
    assert windows[-1] < 0.2 * windows[0]
    assert (np.diff(windows) < 0).mean() >= 0.8


def test_coin_records_follow_cadence(desk):
    _, _, log = desk.coin
    assert [r.step for r in log.records] == list(range(0, 5001, 100))
    assert log.final.step == 5000
    assert all(r.feasible for r in log.records)


def test_no_eval_interval_elapsed_keeps_only_step_zero(sample):
    cfg = TrainConfig("coin", parse_arch("1x4"), steps=20, eval_every=100)
    _, log = train(cfg, sample)
    assert [r.step for r in log.records] == [0]
    assert log.final.step == 20 and len(log.losses) == 20


def test_training_is_deterministic(sample):
    for method in ("coin", "loonie", "mp"):
        cfg = TrainConfig(method, parse_arch("2x6"), steps=30, eval_every=10,
                          target_bpp=None if method == "coin" else 0.2)
        a, la = train(cfg, sample)
        b, lb = train(cfg, sample)
        assert a.effective.tobytes() == b.effective.tobytes()
        assert [r.loss for r in la.records] == [r.loss for r in lb.records]


def test_seeds_differ(sample):
    a, _ = train(TrainConfig("coin", parse_arch("1x4"), steps=1, seed=0), sample)
    b, _ = train(TrainConfig("coin", parse_arch("1x4"), steps=1, seed=1), sample)
    assert a.effective.tobytes() != b.effective.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig("sgd", parse_arch("1x4"))
    with pytest.raises(ValueError):
        TrainConfig("loonie", parse_arch("1x4"))
    with pytest.raises(ValueError):
        TrainConfig("coin", parse_arch("1x4"), steps=0)
    assert TrainConfig("coin", parse_arch("1x4")).lr == 2e-4
    assert TrainConfig("loonie", parse_arch("1x4"), target_bpp=1).lr == 1e-3


def test_csv_appends_off_cadence_final(tmp_path, sample):
    cfg = TrainConfig("coin", parse_arch("1x4"), steps=15, eval_every=10)
    _, log = train(cfg, sample)
    log.write_csv(tmp_path / "m.csv")
    rows = list(csv.reader((tmp_path / "m.csv").read_text().splitlines()))
    assert [r[0] for r in rows[1:]] == ["0", "10", "15"]


def test_mp_budget_must_hold_edge_layers(sample):
    cfg = TrainConfig("mp", parse_arch("2x8"), steps=5, target_bpp=0.1)
    with pytest.raises(ValueError):
        train(cfg, sample)


def test_infeasible_target_rejected(sample):
    dense = arch_bpp(parse_arch("5x30"), 16, sample.pixel_count)
    cfg = TrainConfig("loonie", parse_arch("5x30"), steps=5, target_bpp=dense)
    with pytest.raises(ValueError):
        train(cfg, sample)


def test_csv_export(tmp_path, desk):
    cfg, _, log = desk.coin
    path = tmp_path / "m.csv"
    log.write_csv(path, cfg.to_dict())
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert json.loads(lines[0][len("# config: "):])["arch"] == "2-5x[20]-3"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == CSV_HEADER == "step,loss,psnr_f32,psnr_f16,bpp,expected_bpp,lambda,feasible,wall_ms".split(",")
    assert len(rows) == 1 + len(log.records)  # final step is on the cadence
    assert float(rows[-1][3]) == log.records[-1].psnr_f16


# constrained training

def _state(cfg, theta, psi, lam=0.0, target=1.0):
    return LoonieState(theta.copy(), psi.copy(), AdamState(1e-3), AdamState(7e-4),
                       DualState(1e-3, lam=lam), cfg, target)


def test_open_gates_without_penalty_reduce_to_dense_adam():
    cfg = SirenConfig(2, 8)
    ds = _toy()
    theta = init_siren(cfg, 0, 2.0, np.float64).flat
    psi = np.full(theta.size, 10.0)
    state = _state(cfg, theta, psi, target=1e9)
    loonie_step(state, ds)
    _, g = loss_and_grad(SirenParams(cfg, theta), ds)
    ref = AdamState(1e-3).step(theta, g)
    assert state.magnitudes.tobytes() == ref.tobytes()
    assert state.psi.tobytes() == psi.tobytes()


def test_saturated_gates_get_no_loss_gradient():
    cfg = SirenConfig(2, 8)
    theta = init_siren(cfg, 1, 2.0, np.float64).flat
    psi = np.where(np.arange(theta.size) % 2, 10.0, -10.0)
    _, _, g_psi, _ = lagrangian_grad(cfg, theta, psi, _toy(), 0.0)
    assert not g_psi.any()


def test_closed_gates_remove_parameters():
    cfg = SirenConfig(2, 8)
    theta = init_siren(cfg, 1, 2.0, np.float64).flat
    psi = np.full(theta.size, -10.0)
    state = _state(cfg, theta, psi)
    assert not state.model().effective.any() and not state.model().mask.any()


def lagrangian_fd(cfg, theta, psi, ds, lam, h=1e-6):
    """Central differences of loss + lam * proxy, one coordinate at a time.

    The two terms are differenced separately before being combined: the proxy
    is O(10) here, and folding it into the loss first would round the loss
    difference to ulp(10) / 2h, swamping small gradients.
    """
    from l0ne.bpp import expected_bpp
    from l0ne.hardconcrete import gate_median
    from l0ne.siren import forward

    def parts(t, p):
        pred, _ = forward(SirenParams(cfg, t * gate_median(p)), ds.coords)
        return np.mean((pred - ds.targets) ** 2), expected_bpp(p, ds.pixel_count)[0]

    out = []
    for which, vec in ((0, theta), (1, psi)):
        g = np.empty_like(vec)
        for i in range(vec.size):
            e = np.zeros_like(vec)
            e[i] = h
            (lp, pp), (lm, pm) = ((parts(theta + e, psi), parts(theta - e, psi)) if which == 0
                                  else (parts(theta, psi + e), parts(theta, psi - e)))
            g[i] = ((lp - lm) + lam * (pp - pm)) / (2 * h)
        out.append(g)
    return out


def test_primal_gradient_matches_finite_differences():
    cfg = SirenConfig(2, 8)
    ds = _toy(seed=4)
    rng = np.random.default_rng(5)
    theta = init_siren(cfg, 5, 2.0, np.float64).flat
    # gates well inside the ramp: a gate near its edge shrinks the weight
    # gradient towards the FD noise floor (about 1e-17 / h)
    psi = rng.normal(0, 0.5, theta.size)
    lam = 0.5
    _, g_theta, g_psi, _ = lagrangian_grad(cfg, theta, psi, ds, lam)
    fd_theta, fd_psi = lagrangian_fd(cfg, theta, psi, ds, lam)
    lo, hi = median_bounds()
    interior = np.minimum(abs(psi - lo), abs(psi - hi)) >= 1e-6
    for grad, fd, keep in ((g_theta, fd_theta, np.ones_like(interior)), (g_psi, fd_psi, interior)):
        scale = np.maximum(abs(grad), abs(fd))
        check = keep & (scale > 1e-8)
        assert check.sum() > 0
        assert (abs(grad - fd)[check] <= 1e-5 * scale[check]).all()


def test_init_loonie_uses_two_streams():
    cfg = TrainConfig("loonie", parse_arch("3x10"), target_bpp=1.0, seed=3)
    st_ = init_loonie(cfg, 100)
    assert abs(st_.psi).max() < 0.06 and st_.psi.std() == pytest.approx(0.01, rel=0.2)
    ws, _ = np.random.SeedSequence(3).spawn(2)
    ref = init_siren(cfg.arch, np.random.default_rng(ws), 2.0)
    assert st_.magnitudes.tobytes() == ref.flat.tobytes()


def test_loonie_trace_satisfies_dual_rules(sample):
    cfg = TrainConfig("loonie", parse_arch("2x10"), steps=200, target_bpp=0.5, lr_dual=1e-2)
    _, log = train(cfg, sample)
    assert len(log.violations) == 200
    for v, before, after in zip(log.violations, log.lam_before, log.lam_after):
        assert after >= 0
        assert (after >= before) if v > 0 else (after == 0)


def test_desk_loonie_stays_near_budget_after_feasibility(desk):
    _, _, log = desk.loonie
    seq = log.records + [log.final]
    first = next(i for i, r in enumerate(seq) if r.feasible)
    after = [r.bpp for r in seq[first:]]
    assert max(after) - min(after) < 0.05 * DESK_TARGET


def test_best_feasible_ignores_infeasible_records(desk):
    _, _, log = desk.loonie
    feas = [r.psnr_f16 for r in log.records if r.feasible]
    assert log.best_feasible_psnr == max(feas)
    assert log.best_psnr >= log.best_feasible_psnr
    trail = [r.best_feasible_psnr for r in log.records]
    assert trail == sorted(trail)


# magnitude pruning

def _prune_model():
    # 3 hidden layers of width 4: first/last layers hold 12 + 15 params, the
    # two middle layers 2 * (16 + 4) = 40 prunable ones
    cfg = SirenConfig(3, 4)
    flat = np.arange(1, cfg.n_params + 1, dtype=np.float32)
    flat[1::2] *= -1
    return TrainedModel.dense(cfg, flat)


def test_prune_keeps_uniform_fraction_of_largest():
    model = _prune_model()
    cfg = model.config
    assert cfg.n_params == 67
    pruned = magnitude_prune(model, 47, 16)  # K = 47 -> keep half of each middle tensor
    assert pruned.mask.sum() == 47
    for s in (*cfg.layer_slices[0], *cfg.layer_slices[-1]):
        assert pruned.mask[s].all()
    for layer in cfg.layer_slices[1:-1]:
        for s in layer:
            kept = np.flatnonzero(pruned.mask[s])
            size = s.stop - s.start
            assert kept.tolist() == list(range(size - size // 2, size))
    assert casted_bpp(pruned.effective, 16).bpp <= 47


def test_prune_ties_keep_lower_index():
    cfg = SirenConfig(3, 4)
    pruned = magnitude_prune(TrainedModel.dense(cfg, np.ones(67, np.float32)), 47, 16)
    for layer in cfg.layer_slices[1:-1]:
        for s in layer:
            size = s.stop - s.start
            assert np.flatnonzero(pruned.mask[s]).tolist() == list(range(size // 2))


def test_prune_at_dense_budget_keeps_everything():
    cfg = SirenConfig(5, 30)
    model = TrainedModel.dense(cfg, init_siren(cfg, 0).flat)
    dense = arch_bpp(cfg, 16, 4096)
    assert magnitude_prune(model, dense, 4096).mask.all()


def test_prune_budget_below_dense_layers_rejected():
    with pytest.raises(ValueError):
        magnitude_prune(_prune_model(), 20, 16)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(2, 12), st.floats(0, 1), st.integers(0, 1000))
def test_prune_meets_budget(layers, width, frac, seed):
    cfg = SirenConfig(layers, width)
    model = TrainedModel.dense(cfg, init_siren(cfg, seed).flat)
    first = sum(s.stop - s.start for s in cfg.layer_slices[0])
    last = sum(s.stop - s.start for s in cfg.layer_slices[-1])
    P = 64
    lo = 16 * (first + last) / P
    target = lo + frac * (arch_bpp(cfg, 16, P) - lo)
    pruned = magnitude_prune(model, target, P)
    assert casted_bpp(pruned.effective, P).bpp <= target + 1e-12


def test_finetune_keeps_pruned_entries_zero(tiny_dataset):
    cfg = SirenConfig(3, 4)
    model = magnitude_prune(TrainedModel.dense(cfg, init_siren(cfg, 0).flat), 47, 16)
    tuned, log = finetune(model, tiny_dataset, 50, eval_every=10)
    assert not tuned.effective[~model.mask].any()
    assert tuned.effective[model.mask].all()
    assert [r.step for r in log.records] == [0, 10, 20, 30, 40, 50]


def test_finetune_with_full_mask_is_plain_adam(tiny_dataset):
    cfg = SirenConfig(2, 5)
    flat = init_siren(cfg, 2).flat
    tuned, _ = finetune(TrainedModel.dense(cfg, flat), tiny_dataset, 25, lr=1e-3)
    ds = tiny_dataset.astype(np.float32)
    adam, theta = AdamState(1e-3), flat
    for _ in range(25):
        _, g = loss_and_grad(SirenParams(cfg, theta), ds)
        theta = adam.step(theta, g)
    assert tuned.effective.tobytes() == theta.tobytes()


def test_mp_log_shape_and_recovery(desk):
    cfg, model, log = desk.mp
    S = cfg.steps
    steps = [r.step for r in log.records]
    assert steps.count(S) == 2 and steps[-1] == 2 * S
    pruned = log.records[steps.index(S) + 1]
    assert pruned.psnr_f16 < log.final.psnr_f16
    assert pruned.bpp <= DESK_TARGET and log.final.bpp <= DESK_TARGET
    assert not any(r.feasible for r in log.records[: steps.index(S) + 1])
    assert math.isclose(log.final.bpp, casted_bpp(model.effective, 4096).bpp)
