import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from deint.config import ArchitectureConfig
from deint.dataset import extract_patches, pair_frames
from deint.frames import Frame, interlace
from deint.metrics import psnr
from deint.utils.procedural import generate_clip


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_arch():
    """A narrow network that trains in seconds."""
    return ArchitectureConfig(trunk_kernels=(8, 8, 8), branch_kernels=4)


def make_triplets(rng, count=8, patch=16):
    """Patch triplets cut from smooth random frame pairs."""
    triplets = []
    for source in range(count):
        base = rng.random((patch, patch))
        frame_t = Frame(0.25 + 0.5 * base)
        frame_t1 = Frame(0.25 + 0.5 * np.roll(base, 1, axis=1))
        triplets += extract_patches(interlace(frame_t, frame_t1), frame_t, frame_t1, patch, patch, source)
    return triplets


@pytest.fixture
def triplets(rng):
    return make_triplets(rng)


def clip_psnr(deinterlacer, kind, seeds=(0, 1, 2), size=64, frames=6):
    """Mean PSNR of both reconstructed frames over the pairs of procedural clips of one kind."""
    scores = []
    for seed in seeds:
        for frame_t, frame_t1 in pair_frames(generate_clip(kind, size, size, frames, seed=seed)):
            out_t, out_t1 = deinterlacer(interlace(frame_t, frame_t1))
            scores += [psnr(out_t, frame_t), psnr(out_t1, frame_t1)]
    return float(np.mean(scores))
