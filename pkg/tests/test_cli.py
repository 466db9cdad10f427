import argparse
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import cli.commands
from cli import ProgressReporter, build_parser, run_cli
from cli.commands import COMMANDS, diffusion_config, label_from_path, parse_synth_sets
from efdm import EfdmDataset, load_dataset, save_dataset
from efdm.dataset import HEADER
from helpers import make_dataset
from models import ClassifierConfig, DiffusionConfig, build_classifier
from models.classifier import save_classifier


def run(*argv) -> int:
    return run_cli([str(a) for a in argv])


@pytest.fixture
def recordings(tmp_path) -> Path:
    out = tmp_path / "rec"
    assert run("gen-data", "--duration", 2, "--channels", 4, "--instances", 2, "--seed", 3, "--output-dir", out) == 0
    return out


@pytest.fixture
def classifier_file(tmp_path) -> Path:
    model = build_classifier(ClassifierConfig.desk(head=[8]))
    return save_classifier(model, tmp_path / "clf.clf", ["happy", "sad"])


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------

def test_full_scale_diffusion_flags():
    args = build_parser().parse_args([
        "train-diffusion", "--data", "train.efdm", "--image-size", "128", "--num-channels", "128",
        "--num-res-blocks", "3", "--diffusion-steps", "1000", "--noise-schedule", "linear",
        "--lr", "1e-4", "--batch-size", "32",
    ])
    assert diffusion_config(args) == DiffusionConfig.full()


def test_underscore_aliases():
    args = build_parser().parse_args([
        "train-diffusion", "--data", "d.efdm", "--image_size", "64", "--num_res_blocks", "1",
        "--output_dir", "out", "--checkpoint_every", "5",
    ])
    assert (args.image_size, args.num_res_blocks, args.output_dir, args.checkpoint_every) == (64, 1, "out", 5)


def test_global_flags_follow_the_subcommand():
    args = build_parser().parse_args(["sample", "--checkpoint", "a.ddpm", "--checkpoint", "b.ddpm",
                                      "--seed", "7", "--threads", "2", "-v"])
    assert args.checkpoint == ["a.ddpm", "b.ddpm"]
    assert (args.seed, args.threads, args.verbosity) == (7, 2, 1)


def test_usage_errors_exit_with_two(capsys):
    assert run("train-diffusion", "--bogus") == 2
    assert run("no-such-command") == 2
    assert run("train-classifier", "--train", "t.efdm", "--val", "v.efdm", "--arch", "huge") == 2
    assert "usage:" in capsys.readouterr().err


def subcommand_parser(name: str) -> argparse.ArgumentParser:
    parser = build_parser()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return sub.choices[name]


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_help_lists_every_default(command, capsys):
    assert run(command, "--help") == 0
    out = capsys.readouterr().out
    assert "--seed" in out and "--output-dir" in out
    flags = [a for a in subcommand_parser(command)._actions if a.option_strings and a.dest != "help"]
    assert all(a.option_strings[0] in out for a in flags)
    assert out.count("(default:") >= len(flags)


def test_help_shows_both_spellings(capsys):
    assert run("train-diffusion", "--help") == 0
    out = capsys.readouterr().out
    assert "--image-size" in out and "--image_size" in out
    assert "(default: 32)" in out


# ----------------------------------------------------------------------
# Failures
# ----------------------------------------------------------------------

def test_eval_on_empty_dataset_reports_validation_error(tmp_path, capsys, classifier_file):
    empty = save_dataset(EfdmDataset([], ["happy", "sad"]), tmp_path / "empty.efdm")
    assert run("eval", "--classifier", classifier_file, "--data", empty, "--output-dir", tmp_path) == 1
    err = capsys.readouterr().err
    assert "error: ValidationError:" in err
    assert "empty" in err


def test_missing_input_reports_file_error(tmp_path, capsys):
    assert run("export-image", "--data", tmp_path / "missing.efdm") == 1
    assert "error: FileNotFoundError:" in capsys.readouterr().err


def test_eval_needs_something_to_evaluate(tmp_path, capsys, classifier_file):
    assert run("eval", "--classifier", classifier_file) == 1
    assert "ValidationError" in capsys.readouterr().err


def test_undecodable_dataset_reports_format_error(tmp_path, capsys):
    path = save_dataset(EfdmDataset([], ["ab"]), tmp_path / "bad.efdm")
    raw = bytearray(path.read_bytes())
    raw[HEADER.size + 1:HEADER.size + 3] = b"\xff\xfe"
    path.write_bytes(bytes(raw))
    assert run("export-image", "--data", path) == 1
    assert "error: FormatError:" in capsys.readouterr().err


# ----------------------------------------------------------------------
# Class order and plan defaults
# ----------------------------------------------------------------------

@pytest.fixture
def happy_classifier(tmp_path) -> Path:
    model = build_classifier(ClassifierConfig.desk(head=[8]))
    model.ensure_bound()
    out = model.layers[-1]
    out.weight.data[...] = 0.0
    out.bias.data[...] = 0.0
    out.bias.data[0] = 10.0
    return save_classifier(model, tmp_path / "happy.clf", ["happy", "sad"])


@pytest.mark.parametrize("vocabulary", [["happy", "sad"], ["sad", "happy"]])
def test_eval_scores_in_the_classifier_order(tmp_path, happy_classifier, vocabulary):
    happy = make_dataset(4, seed=1).by_label("happy")
    data = save_dataset(EfdmDataset(happy.items, vocabulary), tmp_path / "happy.efdm")
    assert run("eval", "--classifier", happy_classifier, "--data", data, "--output", tmp_path / "eval.csv") == 0
    row = pd.read_csv(tmp_path / "eval.csv").iloc[0]
    assert row["accuracy"] == 1.0
    assert row["recall_happy"] == 1.0
    assert np.isnan(row["recall_sad"])


def test_eval_rejects_a_foreign_vocabulary(tmp_path, capsys, happy_classifier):
    happy = make_dataset(4, seed=1).by_label("happy")
    data = save_dataset(EfdmDataset(happy.items, ["happy", "calm"]), tmp_path / "calm.efdm")
    assert run("eval", "--classifier", happy_classifier, "--data", data, "--output-dir", tmp_path) == 1
    assert "ValidationError" in capsys.readouterr().err


def test_plan_file_seed_and_threads_survive_flag_defaults(tmp_path, monkeypatch):
    plans = []
    monkeypatch.setattr(cli.commands, "run_augmentation_study", lambda plan, *a, **k: plans.append(plan))
    monkeypatch.setattr(cli.commands, "emit_report", lambda *a, **k: [])
    real = save_dataset(make_dataset(4, seed=2), tmp_path / "real.efdm")
    plan = tmp_path / "plan.txt"
    plan.write_text("base_seed = 7\nthreads = 3\nn_runs = 2\n", encoding="utf-8")

    assert run("experiment", "--plan", plan, "--real", real, "--output-dir", tmp_path) == 0
    assert (plans[-1].base_seed, plans[-1].threads, plans[-1].n_runs) == (7, 3, 2)

    assert run("experiment", "--plan", plan, "--real", real, "--seed", 11, "--threads", 1,
               "--output-dir", tmp_path) == 0
    assert (plans[-1].base_seed, plans[-1].threads) == (11, 1)


# ----------------------------------------------------------------------
# Data commands
# ----------------------------------------------------------------------

def test_gen_data_writes_one_file_per_recording(recordings):
    assert sorted(p.name for p in recordings.iterdir()) == [
        "happy_0.eegr", "happy_1.eegr", "sad_0.eegr", "sad_1.eegr",
    ]


def test_build_efdm_from_directory(tmp_path, recordings):
    out = tmp_path / "efdms.efdm"
    assert run("build-efdm", recordings, "--image-size", 32, "--output", out) == 0
    data = load_dataset(out)
    # 500 samples in 64-sample windows: 7 full frames plus one padded tail
    assert len(data) == 32
    assert data.class_names == ["happy", "sad"]
    assert data.class_counts() == {"happy": 16, "sad": 16}
    assert data.image_shape == (32, 32)


def test_build_efdm_with_split(tmp_path, recordings):
    out = tmp_path / "maps.efdm"
    assert run("build-efdm", recordings, "--output", out, "--train-per-class", 10, "--test-per-class", 4) == 0
    train, test = load_dataset(tmp_path / "maps_train.efdm"), load_dataset(tmp_path / "maps_test.efdm")
    assert train.class_counts() == {"happy": 10, "sad": 10}
    assert test.class_counts() == {"happy": 4, "sad": 4}


def test_text_recordings_need_a_sample_rate(tmp_path, capsys):
    rec = tmp_path / "text"
    assert run("gen-data", "--duration", 1, "--channels", 2, "--format", "text", "--output-dir", rec) == 0
    assert sorted(p.suffix for p in rec.iterdir()) == [".csv", ".csv"]
    assert run("build-efdm", rec, "--output", tmp_path / "t.efdm") == 1
    assert "ValidationError" in capsys.readouterr().err
    assert run("build-efdm", rec, "--sample-rate", 250, "--output", tmp_path / "t.efdm") == 0
    assert load_dataset(tmp_path / "t.efdm").class_names == ["happy", "sad"]


def test_export_image(tmp_path, recordings, capsys):
    data = tmp_path / "efdms.efdm"
    run("build-efdm", recordings, "--output", data)
    assert run("export-image", "--data", data, "--index", 3, "--output-dir", tmp_path) == 0
    assert (tmp_path / "efdm_3.pgm").read_bytes()[:2] == b"P5"
    assert run("export-image", "--data", data, "--grid", 4, "--format", "png", "--output", tmp_path / "g.png") == 0
    assert (tmp_path / "g.png").exists()
    assert run("export-image", "--data", data, "--compare", data, "--compare-index", 1,
               "--output", tmp_path / "c.ppm") == 0
    assert (tmp_path / "c.ppm").read_bytes()[:2] == b"P6"
    assert run("export-image", "--data", data, "--index", 999) == 1
    assert "outside" in capsys.readouterr().err


def test_label_from_path():
    assert label_from_path(Path("happy_3.eegr")) == "happy"
    assert label_from_path(Path("dir/very_sad_12.csv")) == "very_sad"
    assert label_from_path(Path("calm.eegr")) == "calm"
    assert label_from_path(Path("run_x.csv")) == "run_x"


def test_parse_synth_sets():
    assert parse_synth_sets(["s.efdm"]) == [("Augmented", Path("s.efdm"))]
    assert [n for n, _ in parse_synth_sets(["a.efdm", "b.efdm"])] == ["Augmented 1", "Augmented 2"]
    assert parse_synth_sets(["Augmented 40 epochs = s40.efdm"]) == [("Augmented 40 epochs", Path("s40.efdm"))]


# ----------------------------------------------------------------------
# Progress reporting
# ----------------------------------------------------------------------

def test_progress_reporter_logs_once_per_step(caplog):
    log = logging.getLogger("tests.progress")
    reporter = ProgressReporter("task", step_percent=50, log=log)
    with caplog.at_level(logging.INFO, logger="tests.progress"):
        for p in (0.1, 0.2, 0.6, 0.7, 1.0):
            reporter(p, "working")
        reporter.complete()
    messages = [r.getMessage() for r in caplog.records if r.name == "tests.progress"]
    assert len(messages) == 4
    assert messages[0].startswith("task:  10%")
    assert "100%" in messages[2]
    assert "✓ Complete!" in messages[3]


def test_format_time():
    assert ProgressReporter._format_time(59) == "59s"
    assert ProgressReporter._format_time(150) == "2m 30s"
    assert ProgressReporter._format_time(3700) == "1h 1m"


# ----------------------------------------------------------------------
# Determinism
# ----------------------------------------------------------------------

def file_bytes(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_data_commands_rerun_byte_identical(tmp_path):
    for attempt in ("a", "b"):
        out = tmp_path / attempt
        assert run("gen-data", "--duration", 2, "--channels", 4, "--instances", 2, "--seed", 3,
                   "--output-dir", out / "rec") == 0
        assert run("build-efdm", out / "rec", "--output", out / "maps.efdm", "--train-per-class", 10,
                   "--threads", 1) == 0
    assert file_bytes(tmp_path / "a" / "rec") == file_bytes(tmp_path / "b" / "rec")
    assert file_bytes(tmp_path / "a") == file_bytes(tmp_path / "b")


def test_sampling_and_experiment_rerun_byte_identical(tmp_path, recordings):
    maps = tmp_path / "maps.efdm"
    assert run("build-efdm", recordings, "--output", maps, "--train-per-class", 10) == 0
    train, test = tmp_path / "maps_train.efdm", tmp_path / "maps_test.efdm"
    tiny = ["--num-channels", 8, "--num-res-blocks", 1, "--diffusion-steps", 4, "--batch-size", 8, "--epochs", 1]

    for attempt in ("a", "b"):
        out = tmp_path / attempt
        for label in ("happy", "sad"):
            assert run("train-diffusion", "--data", train, "--label", label, *tiny, "--threads", 1,
                       "--output-dir", out / "ckpt") == 0
        assert run("sample", "--checkpoint", out / "ckpt" / "happy_e1.ddpm", "--checkpoint",
                   out / "ckpt" / "sad_e1.ddpm", "-n", 3, "--threads", 1, "--output", out / "synth.efdm") == 0
        assert run("experiment", "--real", train, "--test", test, "--synth", out / "synth.efdm", "--runs", 2,
                   "--epochs", 1, "--train-per-class", 10, "--test-per-class", 6, "--synth-per-class", 3,
                   "--threads", 1, "--output-dir", out / "report") == 0

    for part in ("ckpt", "report"):
        assert file_bytes(tmp_path / "a" / part) == file_bytes(tmp_path / "b" / part)
    assert (tmp_path / "a" / "synth.efdm").read_bytes() == (tmp_path / "b" / "synth.efdm").read_bytes()


# ----------------------------------------------------------------------
# Whole pipeline
# ----------------------------------------------------------------------

@pytest.mark.slow
def test_end_to_end_pipeline(tmp_path, recordings):
    maps = tmp_path / "maps.efdm"
    assert run("build-efdm", recordings, "--output", maps, "--train-per-class", 10) == 0
    train, test = tmp_path / "maps_train.efdm", tmp_path / "maps_test.efdm"

    ckpts = tmp_path / "ckpt"
    tiny = ["--num-channels", 8, "--num-res-blocks", 1, "--diffusion-steps", 8, "--batch-size", 8, "--epochs", 2]
    for label in ("happy", "sad"):
        assert run("train-diffusion", "--data", train, "--label", label, *tiny, "--output-dir", ckpts) == 0
    assert sorted(p.name for p in ckpts.iterdir()) == [
        "happy_e0.ddpm", "happy_e2.ddpm", "sad_e0.ddpm", "sad_e2.ddpm",
    ]

    synth = tmp_path / "synthetic.efdm"
    assert run("sample", "--checkpoint", ckpts / "happy_e2.ddpm", "--checkpoint", ckpts / "sad_e2.ddpm",
               "-n", 6, "--output", synth) == 0
    generated = load_dataset(synth)
    assert generated.class_counts() == {"happy": 6, "sad": 6}

    clf = tmp_path / "clf.clf"
    assert run("train-classifier", "--train", train, "--val", test, "--epochs", 2, "--output", clf,
               "--output-dir", tmp_path) == 0
    assert len(pd.read_csv(tmp_path / "classifier_metrics.csv")) == 4

    assert run("eval", "--classifier", clf, "--data", test, "--diffusion-dir", ckpts, "--samples", 2,
               "--replication-against", train, "--output-dir", tmp_path) == 0
    assert pd.read_csv(tmp_path / "synthetic_eval.csv")["epoch"].tolist() == [0, 2]
    assert len(pd.read_csv(tmp_path / "replication.csv")) == len(load_dataset(test))

    report = tmp_path / "report"
    assert run("experiment", "--real", train, "--test", test, "--synth", f"Augmented={synth}", "--runs", 2,
               "--epochs", 2, "--train-per-class", 10, "--test-per-class", 6, "--synth-per-class", 6,
               "--output-dir", report) == 0
    summary = pd.read_csv(report / "summary.csv")
    assert summary["arm"].tolist() == ["Original", "Augmented"]
    assert (report / "comparison.svg").exists()
