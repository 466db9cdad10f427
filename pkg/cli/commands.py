"""
Subcommand implementations; each maps onto one library operation
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from eeg import SynthSpec, generate_all, load_recording, magnitude, save_binary_recording, save_text_recording, stft
from eeg.stft import default_wsize
from efdm import EfdmDataset, build_efdms, load_dataset, save_comparison, save_dataset, save_grid, save_pgm, save_ppm
from errors import ValidationError
from experiment import (
    ExperimentPlan,
    ExperimentReport,
    emit_report,
    eval_on_synthetic,
    nearest_neighbor_distances,
    run_augmentation_study,
)
from experiment.report import SYNTHETIC_EVAL_FILE, save_synthetic_figure
from models import ClassifierConfig, DiffusionConfig, DiffusionTrainer, build_classifier, evaluate, train_classifier
from models.classifier import load_classifier, save_classifier
from .components import ProgressReporter

logger = logging.getLogger(__name__)

RECORDING_SUFFIXES = (config.RECORDING_EXTENSION, ".csv", ".tsv", ".txt")


def _output_path(args: argparse.Namespace, explicit, default_name: str) -> Path:
    path = Path(explicit) if explicit else Path(args.output_dir) / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def label_from_path(path: Path) -> str:
    """
    ``happy_3.eegr`` -> ``happy``; names without an index suffix are used whole.
    """
    stem = path.stem
    head, _, tail = stem.rpartition("_")
    return head if head and tail.isdigit() else stem


def _collect_recordings(inputs: Sequence[str]) -> List[Path]:
    paths: List[Path] = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            paths.extend(sorted(p for p in path.iterdir() if p.suffix.lower() in RECORDING_SUFFIXES))
        elif path.exists():
            paths.append(path)
        else:
            raise FileNotFoundError(f"Recording file not found: {path}")
    if not paths:
        raise ValidationError(f"no recordings found in {list(inputs)}")
    return paths


def gen_data(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        n_channels=args.channels,
        sample_rate_hz=args.sample_rate,
        duration_s=args.duration,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        n_tones=args.tones,
        pink_tilt=args.pink_tilt,
    )
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = config.RECORDING_EXTENSION if args.format == "binary" else ".csv"
    recordings = generate_all(spec, args.instances)
    for class_index, rec in recordings:
        path = out_dir / f"{rec.label}_{rec.session_id}{suffix}"
        if args.format == "binary":
            save_binary_recording(rec, path)
        else:
            save_text_recording(rec, path)
        logger.debug("Wrote %s", path)
    logger.info("✓ Generated %d recordings (%s) in %s", len(recordings), ", ".join(spec.labels), out_dir)
    return 0


def build_efdm(args: argparse.Namespace) -> int:
    paths = _collect_recordings(args.inputs)
    items = []
    names: List[str] = []
    for path in paths:
        label = args.label or label_from_path(path)
        rec = load_recording(path, sample_rate_hz=args.sample_rate, label=label)
        wsize = args.wsize or default_wsize(rec.sample_rate_hz, args.cut_hz, args.image_size, rec.n_samples)
        spec = stft(rec, wsize, hop=args.hop or None, window=args.window)
        efdms = build_efdms(
            magnitude(spec), spec.freq_resolution_hz, cut_hz=args.cut_hz, image_size=args.image_size,
            label=label, meta={"source": path.name},
        )
        logger.info("  %s: %d EFDMs (wsize %d, %.3f Hz bins)", path.name, len(efdms), wsize, spec.freq_resolution_hz)
        items.extend(efdms)
        if label not in names:
            names.append(label)

    dataset = EfdmDataset(items, names)
    output = _output_path(args, args.output, "efdms" + config.DATASET_EXTENSION)
    if args.train_per_class:
        train, test = dataset.split_per_class(args.train_per_class, args.test_per_class or None)
        save_dataset(train, output.with_name(f"{output.stem}_train{config.DATASET_EXTENSION}"))
        save_dataset(test, output.with_name(f"{output.stem}_test{config.DATASET_EXTENSION}"))
    else:
        save_dataset(dataset, output)
    return 0


def diffusion_config(args: argparse.Namespace) -> DiffusionConfig:
    return DiffusionConfig(
        image_size=args.image_size,
        diffusion_steps=args.diffusion_steps,
        noise_schedule=args.noise_schedule,
        lr=args.lr,
        batch_size=args.batch_size,
        num_channels=args.num_channels,
        num_res_blocks=args.num_res_blocks,
        seed=args.seed,
    )


def train_diffusion(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    label = args.label
    if label is None:
        if dataset.n_classes != 1:
            raise ValidationError(f"dataset holds classes {dataset.class_names}; choose one with --label")
        label = dataset.class_names[0]
    if label not in dataset.class_names:
        raise ValidationError(f"label '{label}' not in dataset classes {dataset.class_names}")

    reporter = ProgressReporter(f"train-diffusion[{label}]")
    trainer = DiffusionTrainer(diffusion_config(args), label=label, progress_callback=reporter)
    prefix = Path(args.output_prefix) if args.output_prefix else Path(args.output_dir) / label
    prefix.parent.mkdir(parents=True, exist_ok=True)
    trainer.train(
        dataset.by_label(label), args.epochs,
        checkpoint_every=args.checkpoint_every, output_prefix=prefix, preview=args.preview,
    )
    reporter.complete()
    return 0


def sample(args: argparse.Namespace) -> int:
    items = []
    names: List[str] = []
    for index, path in enumerate(args.checkpoint):
        trainer = DiffusionTrainer.load(path, progress_callback=None)
        logger.info("Sampling %d '%s' EFDMs from %s (epoch %d)", args.n, trainer.label, path, trainer.epoch)
        items.extend(trainer.generate(args.n, seed=args.seed + index, threads=args.threads))
        if trainer.label not in names:
            names.append(trainer.label)
    output = _output_path(args, args.output, "synthetic" + config.DATASET_EXTENSION)
    save_dataset(EfdmDataset(items, names), output)
    return 0


def train_classifier_command(args: argparse.Namespace) -> int:
    train = load_dataset(args.train)
    val = load_dataset(args.val).aligned_to(train.class_names)
    if train.image_shape is None:
        raise ValidationError("training set is empty")
    side = train.image_shape[0]
    factory = ClassifierConfig.full if args.arch == "full" else ClassifierConfig.desk
    cfg = factory(n_classes=train.n_classes, image_size=side, lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    model = build_classifier(cfg)

    reporter = ProgressReporter("train-classifier")
    record = train_classifier(model, train, val, args.epochs, args.seed, progress_callback=reporter,
                              threads=args.threads)
    reporter.complete()
    save_classifier(model, _output_path(args, args.output, "classifier" + config.CLASSIFIER_EXTENSION),
                    train.class_names)
    record.save_csv(_output_path(args, args.metrics, "classifier_metrics.csv"))
    return 0


def _diffusion_checkpoints(args: argparse.Namespace) -> List[Path]:
    paths = [Path(p) for p in (args.diffusion or [])]
    if args.diffusion_dir:
        directory = Path(args.diffusion_dir)
        if not directory.is_dir():
            raise FileNotFoundError(f"Checkpoint directory not found: {directory}")
        paths.extend(sorted(directory.glob(f"*{config.CHECKPOINT_EXTENSION}")))
    return paths


def eval_command(args: argparse.Namespace) -> int:
    checkpoints = _diffusion_checkpoints(args)
    if not args.data and not checkpoints:
        raise ValidationError("give --data and/or --diffusion/--diffusion-dir to evaluate")

    if args.data:
        data = load_dataset(args.data)
        rows = []
        for path in args.classifier:
            model, names = load_classifier(path)
            # score against the classifier's own output order
            scored = data.aligned_to(names) if names else data
            accuracy, recall = evaluate(model, scored, threads=args.threads)
            logger.info("%s on %s: accuracy %.4f, recall %s", path, args.data, accuracy,
                        ", ".join(f"{n}={r:.4f}" for n, r in zip(scored.class_names, recall)))
            rows.append({"classifier": str(path), "accuracy": accuracy,
                         **{f"recall_{n}": recall[scored.class_names.index(n)] for n in data.class_names}})
        pd.DataFrame(rows).to_csv(_output_path(args, args.output, "eval.csv"), index=False)

        if args.replication_against:
            report = nearest_neighbor_distances(data, load_dataset(args.replication_against))
            frame = pd.DataFrame({"index": np.arange(len(report.distances)),
                                  "nearest_train_index": report.nearest,
                                  "mean_abs_distance": report.distances})
            frame.to_csv(_output_path(args, None, "replication.csv"), index=False)

    if checkpoints:
        result = eval_on_synthetic(args.classifier, checkpoints, args.samples, seed=args.seed,
                                   threads=args.threads, progress_callback=ProgressReporter("eval-synthetic"))
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.to_frame().to_csv(out_dir / SYNTHETIC_EVAL_FILE, index=False)
        save_synthetic_figure(result, out_dir / "synthetic_eval.svg")
    return 0


def parse_synth_sets(entries: Sequence[str]) -> List[Tuple[str, Path]]:
    """
    ``NAME=PATH`` pairs; a bare path becomes the arm "Augmented" (numbered when repeated).
    """
    pairs = []
    for i, entry in enumerate(entries):
        name, sep, path = entry.partition("=")
        if not sep:
            name, path = ("Augmented" if len(entries) == 1 else f"Augmented {i + 1}"), entry
        pairs.append((name.strip(), Path(path.strip())))
    return pairs


def experiment(args: argparse.Namespace) -> int:
    overrides: Dict[str, object] = dict(
        n_runs=args.runs, epochs=args.epochs, train_per_class=args.train_per_class,
        test_per_class=args.test_per_class, synth_per_class=args.synth_per_class,
        architecture=args.arch, base_seed=args.seed, threads=args.threads,
    )
    if args.plan:
        plan = ExperimentPlan.from_file(args.plan, **overrides)
    else:
        plan = ExperimentPlan.from_mapping({k: v for k, v in overrides.items() if v is not None})
    for key, value in plan.to_dict().items():
        logger.info("  plan.%s = %s", key, value)

    real = load_dataset(args.real)
    test = load_dataset(args.test) if args.test else None
    synth_by_arm = {name: load_dataset(path) for name, path in parse_synth_sets(args.synth or [])}
    report: ExperimentReport = run_augmentation_study(
        plan, real, synth_by_arm, test, progress_callback=ProgressReporter("experiment"),
    )
    emit_report(report, args.output_dir)
    return 0


def export_image(args: argparse.Namespace) -> int:
    data = load_dataset(args.data)
    if len(data) == 0:
        raise ValidationError(f"{args.data} holds no EFDMs")
    if not 0 <= args.index < len(data):
        raise ValidationError(f"index {args.index} outside [0, {len(data)})")

    if args.grid:
        default = "grid.png" if args.format == "png" else "grid.pgm"
        save_grid(data.items[args.index:args.index + args.grid], _output_path(args, args.output, default))
    elif args.compare:
        other = load_dataset(args.compare)
        if not 0 <= args.compare_index < len(other):
            raise ValidationError(f"compare index {args.compare_index} outside [0, {len(other)})")
        default = "comparison.png" if args.format == "png" else "comparison.ppm"
        save_comparison(data[args.index], other[args.compare_index], _output_path(args, args.output, default))
    elif args.format == "pgm":
        save_pgm(data[args.index], _output_path(args, args.output, f"efdm_{args.index}.pgm"))
    elif args.format == "ppm":
        save_ppm(data[args.index], _output_path(args, args.output, f"efdm_{args.index}.ppm"))
    else:
        save_grid([data[args.index]], _output_path(args, args.output, f"efdm_{args.index}.png"), columns=1)
    logger.info("✓ Exported EFDM %d of %s", args.index, args.data)
    return 0


COMMANDS = {
    "gen-data": gen_data,
    "build-efdm": build_efdm,
    "train-diffusion": train_diffusion,
    "sample": sample,
    "train-classifier": train_classifier_command,
    "eval": eval_command,
    "experiment": experiment,
    "export-image": export_image,
}
