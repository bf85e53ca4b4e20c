import struct

import numpy as np
import pytest

from deint.config import TIMING_RESOLUTIONS, ArchitectureConfig
from deint.frames import Frame, Parity, ParityError
from deint.metrics import bench
from deint.model import (NotAWeightsFileError, TruncatedWeightsError, WeightsShapeError, WeightsVersionError,
                         build_net, deinterlace_frame, flop_count, forward, layer_specs, load_weights,
                         parameters, save_weights, unshared)
from deint.tensor import ContractViolation, Tensor


@pytest.fixture
def net(small_arch):
    return build_net(small_arch, seed=5)


def test_layer_names_and_geometry():
    specs = layer_specs(ArchitectureConfig())
    assert list(specs) == ["L1", "L2", "L3", "L4a", "L5a", "L4b", "L5b"]
    assert specs["L1"][0].weight_shape == (64, 1, 3, 3)
    assert specs["L3"][0].weight_shape == (64, 64, 1, 1)
    assert specs["L4a"][0].weight_shape == (32, 64, 3, 3)
    assert specs["L5b"][0].stride_h == 2
    assert [specs[n][1] for n in specs] == ["relu", "relu", "identity", "identity", "identity", "identity",
                                            "identity"]
    assert list(layer_specs(ArchitectureConfig(), shared=False))[:5] == ["L1a", "L2a", "L3a", "L4a", "L5a"]


def test_glorot_bounds_and_zero_biases():
    for name, weight, bias in parameters(build_net(seed=0)):
        out_c, in_c, kh, kw = weight.shape
        bound = np.sqrt(6.0 / ((in_c + out_c) * kh * kw))
        assert np.abs(weight.data).max() <= bound + 1e-7
        assert not bias.data.any()


def test_same_seed_same_weights(small_arch):
    a, b = build_net(small_arch, seed=9), build_net(small_arch, seed=9)
    for (_, wa, _), (_, wb, _) in zip(parameters(a), parameters(b)):
        np.testing.assert_array_equal(wa.data, wb.data)


@pytest.mark.parametrize("height,width", [(64, 64), (8, 12), (2, 1)])
def test_output_shapes(net, rng, height, width):
    even_t, odd_t1 = forward(net, Tensor(rng.random((2, 1, height, width))))
    assert even_t.shape == odd_t1.shape == (2, 1, height // 2, width)


def test_any_even_resolution_gives_half_height_fields(net, rng):
    for _ in range(10):
        height, width = 2 * int(rng.integers(8, 65)), int(rng.integers(16, 129))
        even_t, odd_t1 = forward(net, Tensor(rng.random((1, 1, height, width))))
        assert even_t.shape == odd_t1.shape == (1, 1, height // 2, width), (height, width)


def test_full_hd_frame_shapes(net, rng):
    interlaced = Frame(rng.random((1080, 1920), dtype=np.float32))
    frame_t, frame_t1 = deinterlace_frame(net, interlaced)
    assert frame_t.data.shape == frame_t1.data.shape == (1080, 1920)


@pytest.mark.slow
def test_full_size_net_on_a_full_hd_frame(rng):
    even_t, odd_t1 = forward(build_net(seed=0), Tensor(rng.random((1, 1, 1080, 1920), dtype=np.float32)))
    assert even_t.shape == odd_t1.shape == (1, 1, 540, 1920)


def test_forward_is_deterministic(net, rng):
    x = Tensor(rng.random((1, 1, 16, 16)))
    first, second = forward(net, x), forward(net, x)
    np.testing.assert_array_equal(first[0].data, second[0].data)
    np.testing.assert_array_equal(first[1].data, second[1].data)


def test_forward_rejects_bad_input(net):
    with pytest.raises(ParityError):
        forward(net, Tensor(np.zeros((1, 1, 5, 4))))
    with pytest.raises(ContractViolation):
        forward(net, Tensor(np.zeros((1, 3, 4, 4))))


def test_full_size_net_output_shape(rng):
    even_t, odd_t1 = forward(build_net(), Tensor(rng.random((1, 1, 64, 64))))
    assert even_t.shape == odd_t1.shape == (1, 1, 32, 64)


def test_pathways_are_isolated(net, rng):
    x = Tensor(rng.random((1, 1, 8, 8)))
    before_a, before_b = forward(net, x)
    net.layers["L5a"].weight.data[...] += 0.5
    after_a, after_b = forward(net, x)
    np.testing.assert_array_equal(before_b.data, after_b.data)
    assert not np.array_equal(before_a.data, after_a.data)


def test_trunk_is_shared(net, rng):
    x = Tensor(rng.random((1, 1, 8, 8)))
    before_a, before_b = forward(net, x)
    net.layers["L2"].weight.data[...] *= 1.5
    after_a, after_b = forward(net, x)
    assert not np.array_equal(before_a.data, after_a.data)
    assert not np.array_equal(before_b.data, after_b.data)


def test_unshared_clone_gives_identical_outputs(net, rng):
    x = Tensor(rng.random((1, 1, 10, 6)))
    split = unshared(net)
    assert not split.shared and "L1b" in split.layers
    for ours, theirs in zip(forward(net, x), forward(split, x)):
        np.testing.assert_array_equal(ours.data, theirs.data)


def test_deinterlace_frame_keeps_known_rows(net, rng):
    interlaced = Frame(rng.random((8, 6)))
    frame_t, frame_t1 = deinterlace_frame(net, interlaced)
    np.testing.assert_array_equal(frame_t.rows(Parity.ODD), interlaced.rows(Parity.ODD))
    np.testing.assert_array_equal(frame_t1.rows(Parity.EVEN), interlaced.rows(Parity.EVEN))


def test_deinterlace_frame_needs_luminance(net):
    with pytest.raises(ContractViolation):
        deinterlace_frame(net, Frame(np.zeros((4, 4, 3))))


class TestFlopCount:
    def test_shared_per_pixel(self):
        net = build_net()
        assert flop_count(net, 1080, 1920) == 78688 * 1080 * 1920
        assert flop_count(net, 2, 1) == 78688 * 2

    def test_unshared_per_pixel(self):
        net = build_net()
        assert flop_count(net, 576, 720, shared=False) == 120224 * 576 * 720
        assert flop_count(unshared(net), 576, 720) == 120224 * 576 * 720


class TestSerialization:
    def test_round_trip_is_bit_exact(self, tmp_path):
        net = build_net(seed=1)
        net.epochs_completed, net.final_loss = 12, 0.125
        loaded = load_weights(save_weights(net, tmp_path / "w.dinw"))
        assert loaded.epochs_completed == 12 and loaded.final_loss == 0.125
        for (na, wa, ba), (nb, wb, bb) in zip(parameters(net), parameters(loaded)):
            assert na == nb
            assert wa.data.tobytes() == wb.data.tobytes()
            assert ba.data.tobytes() == bb.data.tobytes()

    def test_same_net_same_bytes(self, tmp_path, small_arch):
        a = save_weights(build_net(small_arch, seed=2), tmp_path / "a.dinw")
        b = save_weights(build_net(small_arch, seed=2), tmp_path / "b.dinw")
        assert a.read_bytes() == b.read_bytes()

    def test_unshared_round_trip(self, tmp_path, net, small_arch, rng):
        split = unshared(net)
        loaded = load_weights(save_weights(split, tmp_path / "u.dinw"), small_arch)
        assert not loaded.shared
        x = Tensor(rng.random((1, 1, 8, 8)))
        np.testing.assert_array_equal(forward(split, x)[1].data, forward(loaded, x)[1].data)

    def test_extensions_survive(self, tmp_path, net, small_arch):
        loaded = load_weights(save_weights(net, tmp_path / "w.dinw", {"NOTE": b"hello"}), small_arch)
        assert loaded.extensions == {"NOTE": b"hello"}

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "w.dinw"
        path.write_bytes(b"JUNK" + bytes(20))
        with pytest.raises(NotAWeightsFileError):
            load_weights(path)

    def test_bad_version(self, tmp_path, net, small_arch):
        path = save_weights(net, tmp_path / "w.dinw")
        blob = bytearray(path.read_bytes())
        struct.pack_into("<H", blob, 4, 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(WeightsVersionError):
            load_weights(path, small_arch)

    def test_wrong_kernel_count_names_the_layer(self, tmp_path):
        path = save_weights(build_net(ArchitectureConfig(trunk_kernels=(64, 63, 64))), tmp_path / "w.dinw")
        with pytest.raises(WeightsShapeError, match="L2"):
            load_weights(path)

    def test_truncated(self, tmp_path, net, small_arch):
        path = save_weights(net, tmp_path / "w.dinw")
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(TruncatedWeightsError):
            load_weights(path, small_arch)

    def test_bad_extension_tag(self, tmp_path, net):
        with pytest.raises(ContractViolation):
            save_weights(net, tmp_path / "w.dinw", {"TOO_LONG": b""})


def test_shared_trunk_is_cheaper_at_every_benchmark_resolution():
    net = build_net()
    for width, height in TIMING_RESOLUTIONS:
        assert flop_count(net, height, width) < flop_count(net, height, width, shared=False)


@pytest.mark.slow
def test_shared_net_is_faster_than_unshared():
    net = build_net()
    shared = bench("net", lambda frame: deinterlace_frame(net, frame), (128, 96), frames=5, warmup=1)
    split_net = unshared(net)
    split = bench("net_unshared", lambda frame: deinterlace_frame(split_net, frame), (128, 96), frames=5, warmup=1)
    assert shared.mean_seconds < split.mean_seconds
