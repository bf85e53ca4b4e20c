import numpy as np
import pandas as pd
import pytest

from deint.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, explicit_options, run
from deint.config import load_settings
from deint.dataset import read_archive
from deint.model import load_weights
from deint.utils.image_io import list_frames, read_frame


@pytest.fixture
def settings(monkeypatch):
    monkeypatch.setenv("DINW_THREADS", "1")
    return load_settings()


@pytest.fixture
def corpus(tmp_path, settings):
    """One static 32x32 clip of 6 frames, interlaced into out/static_00 with a 16x16 patch archive."""
    code = run(["synth", str(tmp_path / "in"), str(tmp_path / "out"), "--generate", "1", "--size", "32",
                "--clip-frames", "6", "--patches", str(tmp_path / "patches.dipt"), "--rescale", "0",
                "--patch-size", "16", "--stride", "16"], settings)
    assert code == EXIT_OK
    return tmp_path


@pytest.fixture
def weights(corpus, settings):
    path = corpus / "net.dinw"
    assert run(["train", str(corpus / "patches.dipt"), str(path), "--epochs", "2", "--batch-size", "4"],
               settings) == EXIT_OK
    return path


class TestSynth:
    def test_six_frames_give_three_interlaced(self, corpus, capsys):
        seq = corpus / "out" / "static_00"
        assert len(list_frames(seq / "interlaced")) == 3
        assert [p.name for p in list_frames(seq / "truth")] == [
            "000000_t.png", "000000_t1.png", "000001_t.png", "000001_t1.png", "000002_t.png", "000002_t1.png"]

    def test_interlaced_rows_come_from_each_frame(self, corpus):
        seq = corpus / "out" / "static_00"
        interlaced = read_frame(seq / "interlaced" / "000001.png").data
        np.testing.assert_array_equal(interlaced[0::2], read_frame(seq / "truth" / "000001_t.png").data[0::2])
        np.testing.assert_array_equal(interlaced[1::2], read_frame(seq / "truth" / "000001_t1.png").data[1::2])

    def test_patch_archive(self, corpus):
        triplets = read_archive(corpus / "patches.dipt")
        assert len(triplets) == 3 * 4
        assert triplets[0].input_patch.shape == (16, 16)

    def test_default_patch_geometry(self, tmp_path, settings, capsys):
        code = run(["synth", str(tmp_path / "in"), str(tmp_path / "out"), "--generate", "1", "--clip-frames", "2",
                    "--patches", str(tmp_path / "p.dipt")], settings)
        assert code == EXIT_OK
        assert "🧩 64 patch triplets" in capsys.readouterr().out

    def test_missing_input(self, tmp_path, settings):
        assert run(["synth", str(tmp_path / "nope"), str(tmp_path / "out")], settings) == EXIT_FAILURE

    def test_odd_height_input(self, tmp_path, settings):
        from deint.frames import Frame
        from deint.utils.image_io import write_frame
        write_frame(tmp_path / "in" / "000000.png", Frame(np.zeros((5, 4))))
        write_frame(tmp_path / "in" / "000001.png", Frame(np.zeros((5, 4))))
        assert run(["synth", str(tmp_path / "in"), str(tmp_path / "out")], settings) == EXIT_FAILURE


class TestTrain:
    def test_trains_and_echoes_hyperparameters(self, capsys, corpus, weights):
        out = capsys.readouterr().out
        assert "lr=0.001" in out and "lambda_tv=2e-8" in out
        assert "12 patch triplets: 9 training, 3 validation" in out
        assert load_weights(weights).epochs_completed == 2
        log = pd.read_csv(f"{weights}.loss.csv")
        assert list(log.columns) == ["epoch", "train_loss", "val_loss", "seconds"]
        assert list(log["epoch"]) == [1, 2]

    def test_same_seed_same_bytes(self, corpus, weights, settings):
        again = corpus / "again.dinw"
        run(["train", str(corpus / "patches.dipt"), str(again), "--epochs", "2", "--batch-size", "4"], settings)
        assert again.read_bytes() == weights.read_bytes()

    def test_config_file_under_flags(self, corpus, settings, capsys):
        cfg = corpus / "train.cfg"
        cfg.write_text("epochs = 1\nlr = 0.5\nbatch-size = 8\n")
        out_path = corpus / "cfg.dinw"
        code = run(["train", str(corpus / "patches.dipt"), str(out_path), "--config", str(cfg), "--lr", "0.01"],
                   settings)
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "epochs=1 batch=8" in out
        assert "lr=0.01 " in out

    def test_unknown_config_key(self, corpus, settings):
        cfg = corpus / "bad.cfg"
        cfg.write_text("learning_rat = 0.1\n")
        assert run(["train", str(corpus / "patches.dipt"), str(corpus / "x.dinw"), "--config", str(cfg)],
                   settings) == EXIT_USAGE

    def test_missing_archive(self, tmp_path, settings):
        assert run(["train", str(tmp_path / "none.dipt"), str(tmp_path / "w.dinw")], settings) == EXIT_FAILURE

    def test_checkpoint_resume(self, corpus, settings):
        checkpoint = corpus / "ckpt.dinw"
        archive = str(corpus / "patches.dipt")
        run(["train", archive, str(corpus / "a.dinw"), "--epochs", "1", "--checkpoint", str(checkpoint)], settings)
        run(["train", archive, str(corpus / "b.dinw"), "--epochs", "2", "--checkpoint", str(checkpoint)], settings)
        run(["train", archive, str(corpus / "c.dinw"), "--epochs", "2"], settings)
        assert (corpus / "b.dinw").read_bytes() == (corpus / "c.dinw").read_bytes()


class TestInfer:
    def test_weave_on_static_clip_is_exact(self, corpus, settings):
        seq = corpus / "out" / "static_00"
        out = corpus / "weave"
        assert run(["infer", str(seq / "interlaced"), str(out), "--method", "weave"], settings) == EXIT_OK
        outputs = list_frames(out)
        assert len(outputs) == 6
        for produced, truth in zip(outputs, list_frames(seq / "truth")):
            assert produced.name == truth.name
            np.testing.assert_array_equal(read_frame(produced).data, read_frame(truth).data)

    def test_net_with_verify(self, corpus, weights, settings, capsys):
        seq = corpus / "out" / "static_00"
        code = run(["infer", str(seq / "interlaced"), str(corpus / "net"), "--weights", str(weights), "--verify"],
                   settings)
        assert code == EXIT_OK
        assert "Retained fields are bit-exact" in capsys.readouterr().out
        assert len(list_frames(corpus / "net")) == 6

    def test_single_file(self, corpus, settings):
        frame = corpus / "out" / "static_00" / "interlaced" / "000000.png"
        assert run(["infer", str(frame), str(corpus / "one"), "--method", "ela", "--verify"], settings) == EXIT_OK
        assert [p.name for p in list_frames(corpus / "one")] == ["000000_t.png", "000000_t1.png"]

    def test_net_without_weights(self, corpus, settings):
        assert run(["infer", str(corpus / "out"), str(corpus / "x")], settings) == EXIT_USAGE

    def test_unknown_method(self, corpus, settings):
        assert run(["infer", str(corpus / "out"), str(corpus / "x"), "--method", "median"], settings) == EXIT_USAGE


class TestEval:
    def test_identical_frames_score_perfectly(self, corpus, settings, capsys):
        seq = corpus / "out" / "static_00"
        run(["infer", str(seq / "interlaced"), str(corpus / "weave"), "--method", "weave"], settings)
        csv = corpus / "report.csv"
        code = run(["eval", str(corpus / "weave"), str(seq / "truth"), "--csv", str(csv),
                    "--diff-dir", str(corpus / "diff")], settings)
        assert code == EXIT_OK
        assert "99.00/1.0000" in capsys.readouterr().out
        report = pd.read_csv(csv)
        assert report.loc[0, "psnr"] == 99.0
        assert report.loc[0, "ssim"] == 1.0
        assert report.loc[0, "frames"] == 6
        assert read_frame(next(iter(list_frames(corpus / "diff" / "weave" / "truth")))).data.max() == 0.0

    def test_nested_layout(self, corpus, settings, capsys):
        seq = corpus / "out" / "static_00"
        for method in ("bob_linear", "ela"):
            run(["infer", str(seq / "interlaced"), str(corpus / "preds" / method / "static_00"),
                 "--method", method], settings)
        frames_csv = corpus / "frames.csv"
        code = run(["eval", str(corpus / "preds"), str(corpus / "out"), "--frames-csv", str(frames_csv)], settings)
        assert code == EXIT_OK
        table = pd.read_csv(frames_csv)
        assert set(table["method"]) == {"bob_linear", "ela"}
        assert len(table) == 12

    def test_count_mismatch(self, corpus, settings):
        seq = corpus / "out" / "static_00"
        assert run(["eval", str(seq / "interlaced"), str(seq / "truth")], settings) == EXIT_FAILURE


class TestBench:
    def test_small_resolutions(self, tmp_path, settings, capsys):
        csv = tmp_path / "timing.csv"
        code = run(["bench", "--resolutions", "16x8,32x16", "--methods", "net,net_unshared,ela", "--frames", "2",
                    "--warmup", "0", "--csv", str(csv)], settings)
        assert code == EXIT_OK
        assert "unshared/shared time ratio" in capsys.readouterr().out
        table = pd.read_csv(csv)
        assert len(table) == 6
        assert table.loc[table["method"] == "net", "macs"].iloc[0] == 78688 * 16 * 8

    def test_bad_resolution(self, settings):
        assert run(["bench", "--resolutions", "720x481"], settings) == EXIT_USAGE

    def test_bad_method(self, settings):
        assert run(["bench", "--methods", "median"], settings) == EXIT_USAGE


def _help_blocks(text):
    """Help text of each long option, joined across wrapped lines."""
    blocks, current = {}, None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("--"):
            current = stripped.split()[0].rstrip(",")
            blocks[current] = stripped
        elif stripped.startswith("-") or not stripped:
            current = None
        elif current is not None:
            blocks[current] += " " + stripped
    return blocks


@pytest.mark.parametrize("command", ["synth", "train", "infer", "eval", "bench"])
def test_help_lists_every_default(command, settings, monkeypatch, capsys):
    monkeypatch.setenv("COLUMNS", "200")
    assert run([command, "--help"], settings) == EXIT_OK
    blocks = _help_blocks(capsys.readouterr().out)
    assert "--config" in blocks and "--threads" in blocks
    for option, text in blocks.items():
        if option == "--help":
            continue
        assert text.count("(default:") == 1, f"{option}: {text}"


def test_help_shows_train_defaults(settings, monkeypatch, capsys):
    monkeypatch.setenv("COLUMNS", "200")
    run(["train", "--help"], settings)
    blocks = _help_blocks(capsys.readouterr().out)
    assert "(default: 0.001)" in blocks["--lr"]
    assert "(default: 2e-08)" in blocks["--lambda-tv"]
    assert "(default: 200)" in blocks["--epochs"]
    assert "(default: 64)" in blocks["--batch-size"]
    assert "(default: replicate)" in blocks["--padding"]
    assert "(default: 1)" in blocks["--threads"]
    assert "<out_weights>.loss.csv" in blocks["--loss-log"]


def test_environment_sets_command_defaults(monkeypatch, capsys):
    monkeypatch.setenv("COLUMNS", "200")
    monkeypatch.setenv("DINW_THREADS", "1")
    monkeypatch.setenv("DINW_SEED", "5")
    monkeypatch.setenv("DINW_BENCH_FRAMES", "7")
    monkeypatch.setenv("DINW_BENCH_WARMUP", "1")
    monkeypatch.setenv("DINW_BENCH_RESOLUTIONS", "32x16")
    monkeypatch.setenv("DINW_PATCH_SIZE", "16")
    settings = load_settings()

    run(["bench", "--help"], settings)
    bench = _help_blocks(capsys.readouterr().out)
    assert "(default: 7)" in bench["--frames"]
    assert "(default: 1)" in bench["--warmup"]
    assert "(default: 32x16)" in bench["--resolutions"]
    assert "(default: 5)" in bench["--seed"]

    run(["synth", "--help"], settings)
    synth = _help_blocks(capsys.readouterr().out)
    assert "(default: 16)" in synth["--patch-size"]

    run(["train", "--help"], settings)
    assert "(default: 5)" in _help_blocks(capsys.readouterr().out)["--seed"]


def test_bench_records_machine_snapshot(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DINW_THREADS", "1")
    monkeypatch.setenv("DINW_BENCH_FRAMES", "1")
    monkeypatch.setenv("DINW_BENCH_WARMUP", "0")
    monkeypatch.setenv("DINW_BENCH_RESOLUTIONS", "16x8")
    csv = tmp_path / "timing.csv"
    assert run(["bench", "--methods", "bob_linear", "--csv", str(csv)], load_settings()) == EXIT_OK
    assert "logical cores" in capsys.readouterr().out
    table = pd.read_csv(csv)
    assert list(table["resolution"]) == ["16x8"]
    assert list(table["frames"]) == [1]
    machine = pd.read_csv(tmp_path / "timing.system.csv")
    assert "logical_cores" in machine.columns and "pinned" in machine.columns


def test_explicit_options_only_reports_given_flags():
    assert explicit_options("train", ["a.dipt", "w.dinw", "--epochs", "3"]) == {"archive", "out_weights", "epochs"}


def test_unknown_command():
    assert run(["deinterlace"]) == EXIT_USAGE
