from pathlib import Path

import numpy as np
import pytest

from l0ne.imageio import dataset_from_array, load_image
from l0ne.siren import parse_arch
from l0ne.trainer import TrainConfig, train

ROOT = Path(__file__).resolve().parents[1]
SAMPLE = ROOT / "data" / "sample64.png"

DESK_STEPS = 5000
DESK_TARGET = 7.0
# The 1e-3 default collapses the 64x64 run (violations here are ~8 BPP, not
# ~0.3 as at 768x512); 3e-6 sits mid-way in the range that reaches feasibility.
DESK_DUAL_LR = 3e-6

_criteria = []


def record_criterion(number, text, ok):
    _criteria.append((number, text, ok))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, ok in sorted(_criteria, key=lambda c: c[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {text}")


@pytest.fixture(scope="session")
def sample_path():
    return SAMPLE


@pytest.fixture(scope="session")
def sample():
    return load_image(SAMPLE)


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(123)
    return dataset_from_array(rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8), np.float64)


class DeskRuns:
    """Lazily trained desk-scale runs shared across the session."""

    def __init__(self, dataset):
        self.dataset = dataset
        self._cache = {}

    def _get(self, key, cfg):
        if key not in self._cache:
            self._cache[key] = (cfg, *train(cfg, self.dataset))
        return self._cache[key]

    @property
    def coin(self):
        return self._get("coin", TrainConfig("coin", parse_arch("5x20"), steps=DESK_STEPS, seed=0))

    @property
    def loonie(self):
        return self._get("loonie", TrainConfig(
            "loonie", parse_arch("5x30"), steps=DESK_STEPS, seed=0,
            target_bpp=DESK_TARGET, lr_dual=DESK_DUAL_LR))

    @property
    def mp(self):
        return self._get("mp", TrainConfig(
            "mp", parse_arch("5x30"), steps=DESK_STEPS, seed=0, target_bpp=DESK_TARGET))


@pytest.fixture(scope="session")
def desk(sample):
    return DeskRuns(sample)
