import numpy as np
import pytest

from deint.config import DataConfig, TrainConfig
from deint.dataset import build_patch_set, pair_frames, split_dataset
from deint.frames import Frame, Parity, interlace
from deint.model import build_net
from deint.pipeline import (METHODS, PipelineError, deinterlace_sequence, deinterlace_with_net, make_deinterlacer,
                            verify_known_rows)
from deint.train import train
from deint.utils.procedural import CLIP_KINDS, generate_clip

from conftest import clip_psnr


def test_methods():
    assert METHODS == ("net", "weave", "bob_linear", "bob_bicubic", "ela")


def test_net_needs_weights():
    with pytest.raises(PipelineError):
        make_deinterlacer("net")


def test_unknown_method():
    with pytest.raises(PipelineError, match="median"):
        make_deinterlacer("median")


def test_rgb_net_output_keeps_known_rows(rng, small_arch):
    interlaced = Frame(rng.random((8, 10, 3)))
    frame_t, frame_t1 = deinterlace_with_net(build_net(small_arch), interlaced)
    assert frame_t.data.shape == frame_t1.data.shape == (8, 10, 3)
    assert verify_known_rows(interlaced, frame_t, frame_t1) == []


def test_sequence_order_is_preserved(rng):
    frames = [Frame(rng.random((4, 4))) for _ in range(5)]
    outputs = deinterlace_sequence(frames, make_deinterlacer("weave"), threads=3)
    for frame, (frame_t, _) in zip(frames, outputs):
        np.testing.assert_array_equal(frame_t.data, frame.data)


@pytest.mark.parametrize("method", ["bob_linear", "bob_bicubic", "ela", "net"])
def test_every_method_keeps_known_rows(method, rng, small_arch):
    interlaced = interlace(Frame(rng.random((8, 8))), Frame(rng.random((8, 8))))
    frame_t, frame_t1 = make_deinterlacer(method, build_net(small_arch))(interlaced)
    assert verify_known_rows(interlaced, frame_t, frame_t1) == []


def test_verify_known_rows_reports_damage(rng):
    interlaced = Frame(rng.random((8, 4)))
    damaged = interlaced.data.copy()
    damaged[2] = 1.0 - damaged[2]
    problems = verify_known_rows(interlaced, Frame(damaged), interlaced)
    assert len(problems) == 1
    assert "frame t " in problems[0] and "[2]" in problems[0]

    problems = verify_known_rows(interlaced, interlaced, Frame(np.zeros((6, 4))))
    assert "frame t+1" in problems[0]


def test_verify_known_rows_ignores_synthesized_rows(rng):
    interlaced = Frame(rng.random((8, 4)))
    frame_t = interlaced.data.copy()
    frame_t[Parity.EVEN.offset::2] = 0.0
    assert verify_known_rows(interlaced, Frame(frame_t), interlaced) == []


@pytest.mark.parametrize("method", ["net", "weave", "bob_linear", "bob_bicubic", "ela"])
def test_field_preservation_on_random_inputs(method, rng, small_arch):
    deinterlacer = make_deinterlacer(method, build_net(small_arch, seed=1))
    for _ in range(100):
        height, width = 2 * int(rng.integers(1, 9)), int(rng.integers(1, 13))
        interlaced = Frame(rng.random((height, width)))
        assert verify_known_rows(interlaced, *deinterlacer(interlaced)) == []


@pytest.mark.slow
def test_trained_net_keeps_up_with_bob_bicubic():
    pairs = [pair for kind in CLIP_KINDS for pair in pair_frames(generate_clip(kind, 64, 64, frames=8, seed=100))]
    triplets = build_patch_set(pairs, DataConfig(patch_size=32, patch_stride=16, rescale=0), threads=1)
    train_set, val_set = split_dataset(triplets, 0.8, seed=0)
    net, _ = train(train_set, val_set, TrainConfig(epochs=50, batch_size=64, seed=0, checkpoint_every=1000))

    bob = make_deinterlacer("bob_bicubic")
    learned = make_deinterlacer("net", net)
    for kind in CLIP_KINDS:
        net_score, bob_score = clip_psnr(learned, kind), clip_psnr(bob, kind)
        if kind in ("static", "thin_stripes"):
            assert net_score >= bob_score, kind
        else:
            assert net_score >= bob_score - 1.0, kind
