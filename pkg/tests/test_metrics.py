import math

import numpy as np
import pytest

from deint.frames import Frame
from deint.metrics import (PSNR_CAP_DB, QualityReport, TimingReport, bench, diff_image, evaluate_sequence,
                           frames_table, psnr, quality_table, ssim, timing_table)
from deint.tensor import ContractViolation


class TestPsnr:
    def test_identical_is_capped(self, rng):
        image = rng.random((8, 8))
        assert psnr(image, image) == PSNR_CAP_DB == 99.0

    def test_constant_offset(self):
        a = np.full((4, 4), 0.5)
        assert psnr(a, a + 1 / 16) == pytest.approx(10 * math.log10(256), abs=1e-9)

    def test_matches_loop_oracle(self, rng):
        a, b = rng.random((6, 7)), rng.random((6, 7))
        mse = sum((a[i, j] - b[i, j]) ** 2 for i in range(6) for j in range(7)) / 42
        assert psnr(a, b) == pytest.approx(10 * math.log10(1 / mse), rel=1e-12)

    def test_symmetric(self, rng):
        a, b = rng.random((5, 5)), rng.random((5, 5))
        assert psnr(a, b) == psnr(b, a)

    def test_more_noise_lower_psnr(self, rng):
        clean = rng.random((16, 16))
        noise = rng.normal(size=(16, 16))
        scores = [psnr(clean, clean + s * noise) for s in (0.01, 0.05, 0.2)]
        assert scores[0] > scores[1] > scores[2]

    def test_accepts_frames(self, rng):
        frame = Frame(rng.random((4, 4)))
        assert psnr(frame, frame) == 99.0

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_identical_is_one(self, rng):
        image = rng.random((16, 16))
        assert ssim(image, image) == 1.0

    def test_inverted_is_negative(self, rng):
        image = rng.random((32, 32))
        assert ssim(image, 1.0 - image) < 0.0

    def test_matches_skimage(self, rng):
        metrics = pytest.importorskip("skimage.metrics")
        a = rng.random((32, 40))
        b = np.clip(a + 0.1 * rng.normal(size=a.shape), 0, 1)
        expected = metrics.structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
                                                 use_sample_covariance=False, data_range=1.0)
        assert ssim(a, b) == pytest.approx(expected, abs=1e-6)

    def test_small_frames_rejected(self):
        with pytest.raises(ContractViolation, match="window"):
            ssim(np.zeros((8, 32)), np.zeros((8, 32)))

    def test_colour_rejected(self):
        with pytest.raises(ContractViolation):
            ssim(np.zeros((16, 16, 3)), np.zeros((16, 16, 3)))


def test_diff_image(rng):
    a, b = rng.random((4, 4)), rng.random((4, 4))
    np.testing.assert_allclose(diff_image(a, b).data, np.abs(a - b), atol=1e-7)


def test_evaluate_sequence(rng):
    truths = [Frame(rng.random((16, 16, 3))) for _ in range(3)]
    report = evaluate_sequence(truths, truths, "weave", "static_00", threads=2)
    assert report.frames == 3
    assert report.mean_psnr == 99.0 and report.mean_ssim == 1.0


def test_evaluate_sequence_count_mismatch(rng):
    frames = [Frame(rng.random((16, 16)))]
    with pytest.raises(ContractViolation, match="static_00"):
        evaluate_sequence(frames, frames * 2, "ela", "static_00")


def test_quality_table_orders_by_sequence_then_method():
    reports = [QualityReport("weave", "b", [30.0], [0.9]), QualityReport("ela", "b", [31.0], [0.91]),
               QualityReport("net", "a", [35.0, 37.0], [0.95, 0.97])]
    text, table = quality_table(reports)
    assert list(zip(table["sequence"], table["method"])) == [("a", "net"), ("b", "ela"), ("b", "weave")]
    assert table.loc[0, "psnr"] == 36.0
    assert "36.00/0.9600" in text
    assert "PSNR/SSIM" in text
    assert len(frames_table(reports)) == 4


def test_empty_tables():
    assert quality_table([])[0] == "(no results)"
    assert timing_table([])[0] == "(no results)"


def test_bench_times_every_frame():
    calls = []
    report = bench("weave", calls.append, (24, 16), frames=4, warmup=2)
    assert len(calls) == 6
    assert len(report.seconds) == 4
    assert calls[0].data.shape == (16, 24)
    assert report.label == "24x16"


def test_bench_rejects_no_frames():
    with pytest.raises(ContractViolation):
        bench("weave", lambda frame: None, (8, 8), frames=0)


def test_timing_table_reports_published_ratio():
    reports = [TimingReport("net", (720, 480), [0.1, 0.1], 1, macs=100),
               TimingReport("net_unshared", (720, 480), [0.3, 0.3], 1, macs=150),
               TimingReport("ela", (640, 360), [0.02], 1)]
    text, table = timing_table(reports)
    assert "unshared/shared time ratio 3.00" in text
    assert "published 0.0403/0.0137" in text
    assert "MAC ratio 1.50" in text
    assert table.loc[0, "reference_seconds"] == 0.0137
    assert np.isnan(table.loc[2, "reference_seconds"])
