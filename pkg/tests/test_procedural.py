import numpy as np
import pytest

from deint.utils.image_io import list_frames
from deint.utils.procedural import CLIP_KINDS, frame_name, generate_clip, write_corpus
from deint.utils.system_info import pinned_to_single_core, system_snapshot
from deint.utils.workers import parallel_map, worker_count


@pytest.mark.parametrize("kind", CLIP_KINDS)
def test_clips_are_seeded_and_in_range(kind):
    first = generate_clip(kind, 16, 24, frames=3, seed=4)
    second = generate_clip(kind, 16, 24, frames=3, seed=4)
    assert len(first) == 3
    for a, b in zip(first, second):
        assert a.data.shape == (16, 24)
        np.testing.assert_array_equal(a.data, b.data)
        assert 0.0 <= a.data.min() and a.data.max() <= 1.0


def test_static_clip_does_not_move():
    frames = generate_clip("static", frames=4)
    assert all(np.array_equal(f.data, frames[0].data) for f in frames)


def test_moving_clip_moves():
    frames = generate_clip("fast_motion", frames=2)
    assert not np.array_equal(frames[0].data, frames[1].data)


def test_colour_clip():
    assert generate_clip("scroll", color=True)[0].channels == 3


def test_bad_arguments():
    with pytest.raises(ValueError):
        generate_clip("noise")
    with pytest.raises(ValueError):
        generate_clip("static", height=4)


def test_write_corpus(tmp_path):
    dirs = write_corpus(tmp_path, clips=6, size=(16, 16), frames=2)
    assert [d.name for d in dirs] == ["static_00", "moving_rect_01", "scroll_02", "fast_motion_03",
                                      "thin_stripes_04", "static_05"]
    assert [p.name for p in list_frames(dirs[0])] == [frame_name(0), frame_name(1)]
    assert frame_name(7, "_t1") == "000007_t1.png"


def test_parallel_map_keeps_order():
    assert parallel_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]
    assert parallel_map(str, [], threads=4) == []


def test_worker_count(monkeypatch):
    assert worker_count(3) == 3
    assert worker_count(0) == 1
    monkeypatch.setenv("DINW_THREADS", "5")
    assert worker_count() == 5
    monkeypatch.setenv("DINW_THREADS", "many")
    assert worker_count() == 1


def test_system_snapshot():
    assert "platform" in system_snapshot()


def test_pinning_is_undone():
    with pinned_to_single_core() as pinned:
        assert pinned in (True, False)
