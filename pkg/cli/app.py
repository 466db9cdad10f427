"""
Command-line entry point: argument parsing, logging setup and dispatch
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

import config
from engine import detect_hardware, resolve_threads
from errors import PipelineError
from .commands import COMMANDS

logger = logging.getLogger(__name__)

PROG = "efdm-diffusion"


def setup_logging(verbosity: int = 0) -> None:
    """
    One stderr handler: -q -> WARNING, default -> INFO, -v -> DEBUG.
    """
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    fmt = "%(message)s" if level > logging.DEBUG else "%(levelname)s %(name)s: %(message)s"
    logging.basicConfig(level=level, format=fmt, stream=sys.stderr, force=True)


def _flag(parser: argparse.ArgumentParser, name: str, **kwargs) -> None:
    """
    Add ``--name-with-dashes`` plus its ``--name_with_underscores`` alias.
    """
    spellings = [f"--{name}"]
    if "-" in name:
        spellings.append(f"--{name.replace('-', '_')}")
    parser.add_argument(*spellings, **kwargs)


def _common_flags(from_plan: bool = False) -> argparse.ArgumentParser:
    """
    Global options; with ``from_plan`` the seed and thread cap default to
    None so that plan-file values apply unless the flags are given.
    """
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("global options")
    if from_plan:
        group.add_argument("--seed", type=int, default=None,
                           help=f"base random seed (plan default {config.DEFAULT_SEED})")
        group.add_argument("--threads", type=int, default=None,
                           help=f"worker thread cap, 0 = all cores (plan default {config.DEFAULT_THREADS})")
    else:
        group.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="base random seed")
        group.add_argument("--threads", type=int, default=config.DEFAULT_THREADS,
                           help="worker thread cap (0 = all cores)")
    group.add_argument("--output-dir", "--output_dir", dest="output_dir", default=".",
                       help="directory for generated files")
    verbosity = group.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", dest="verbosity", action="store_const", const=1, default=0,
                           help="debug logging")
    verbosity.add_argument("-q", "--quiet", dest="verbosity", action="store_const", const=-1,
                           help="warnings and errors only")
    return common


def _subparser(sub, common: argparse.ArgumentParser, name: str, help: str) -> argparse.ArgumentParser:
    return sub.add_parser(name, help=help, parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter)


def _add_gen_data(sub, common) -> None:
    p = _subparser(sub, common, "gen-data", "generate synthetic labelled EEG recordings")
    _flag(p, "channels", type=int, default=config.SYNTH_CHANNELS, help="channels per recording")
    _flag(p, "sample-rate", type=float, default=config.SYNTH_SAMPLE_RATE_HZ, help="sample rate in Hz")
    _flag(p, "duration", type=float, default=config.SYNTH_DURATION_S, help="recording length in seconds")
    _flag(p, "noise-sigma", type=float, default=config.SYNTH_NOISE_SIGMA, help="white noise standard deviation")
    _flag(p, "tones", type=int, default=config.SYNTH_TONES, help="sinusoids drawn inside each class band")
    _flag(p, "pink-tilt", action="store_true", default=False, help="shape the noise to a 1/f spectrum")
    _flag(p, "instances", type=int, default=1, help="recordings per class")
    _flag(p, "format", choices=["binary", "text"], default="binary", help="recording file format")


def _add_build_efdm(sub, common) -> None:
    p = _subparser(sub, common, "build-efdm", "convert recordings into an EFDM dataset")
    p.add_argument("inputs", nargs="+", help="recording files or directories")
    _flag(p, "sample-rate", type=float, default=None, help="sample rate of text recordings in Hz")
    _flag(p, "label", default=None, help="label for every input (default: taken from file names)")
    _flag(p, "wsize", type=int, default=0, help="STFT window length (0 = largest fitting power of two)")
    _flag(p, "hop", type=int, default=0, help="STFT hop (0 = wsize)")
    _flag(p, "window", choices=["hann", "rectangular"], default="hann", help="STFT taper")
    _flag(p, "cut-hz", type=float, default=config.CUT_HZ, help="highest frequency kept")
    _flag(p, "image-size", type=int, default=config.DESK_IMAGE_SIZE, help="EFDM side in pixels")
    _flag(p, "output", default=None, help="dataset file (default: <output-dir>/efdms.efdm)")
    _flag(p, "train-per-class", type=int, default=0, help="if set, write _train and _test splits")
    _flag(p, "test-per-class", type=int, default=0, help="test items per class (0 = all remaining)")


def _add_train_diffusion(sub, common) -> None:
    p = _subparser(sub, common, "train-diffusion", "train a per-class diffusion model")
    _flag(p, "data", required=True, help="EFDM dataset file")
    _flag(p, "label", default=None, help="class to train on")
    _flag(p, "image-size", type=int, default=config.DIFFUSION_IMAGE_SIZE, help="image side (power of two)")
    _flag(p, "num-channels", type=int, default=config.DIFFUSION_CHANNELS, help="denoiser width")
    _flag(p, "num-res-blocks", type=int, default=config.DIFFUSION_RES_BLOCKS, help="residual blocks")
    _flag(p, "diffusion-steps", type=int, default=config.DIFFUSION_STEPS, help="diffusion steps T")
    _flag(p, "noise-schedule", choices=["linear"], default=config.FULL_NOISE_SCHEDULE, help="beta schedule")
    _flag(p, "lr", type=float, default=config.DIFFUSION_LR, help="Adam learning rate")
    _flag(p, "batch-size", type=int, default=config.DIFFUSION_BATCH_SIZE, help="mini-batch size")
    _flag(p, "epochs", type=int, default=config.DIFFUSION_EPOCHS, help="passes over the class's EFDMs")
    _flag(p, "checkpoint-every", type=int, default=0, help="checkpoint period in epochs (0 = first and last only)")
    _flag(p, "output-prefix", default=None, help="checkpoint prefix (default: <output-dir>/<label>)")
    _flag(p, "preview", type=int, default=0, help="samples in a preview grid per checkpoint")


def _add_sample(sub, common) -> None:
    p = _subparser(sub, common, "sample", "draw synthetic EFDMs from diffusion checkpoints")
    _flag(p, "checkpoint", action="append", required=True, help="diffusion checkpoint (repeatable)")
    p.add_argument("-n", "--n", type=int, default=config.EXPERIMENT_SYNTH_PER_CLASS, help="samples per checkpoint")
    _flag(p, "output", default=None, help="dataset file (default: <output-dir>/synthetic.efdm)")


def _add_train_classifier(sub, common) -> None:
    p = _subparser(sub, common, "train-classifier", "train the emotion classifier")
    _flag(p, "train", required=True, help="training dataset file")
    _flag(p, "val", required=True, help="validation dataset file")
    _flag(p, "epochs", type=int, default=config.CLASSIFIER_EPOCHS, help="training epochs")
    _flag(p, "arch", choices=["desk", "full"], default="desk", help="layer configuration")
    _flag(p, "lr", type=float, default=config.CLASSIFIER_LR, help="Adam learning rate")
    _flag(p, "batch-size", type=int, default=config.CLASSIFIER_BATCH_SIZE, help="mini-batch size")
    _flag(p, "output", default=None, help="checkpoint file (default: <output-dir>/classifier.clf)")
    _flag(p, "metrics", default=None, help="metrics CSV (default: <output-dir>/classifier_metrics.csv)")


def _add_eval(sub, common) -> None:
    p = _subparser(sub, common, "eval", "evaluate classifiers on a dataset or on diffusion samples")
    _flag(p, "classifier", action="append", required=True, help="classifier checkpoint (repeatable)")
    _flag(p, "data", default=None, help="dataset to evaluate on")
    _flag(p, "diffusion", action="append", default=None, help="diffusion checkpoint (repeatable)")
    _flag(p, "diffusion-dir", default=None, help="directory of diffusion checkpoints")
    _flag(p, "samples", type=int, default=100, help="samples per class per diffusion checkpoint")
    _flag(p, "replication-against", default=None, help="training dataset for the nearest-neighbour check")
    _flag(p, "output", default=None, help="results CSV (default: <output-dir>/eval.csv)")


def _add_experiment(sub, common) -> None:
    p = _subparser(sub, _common_flags(from_plan=True), "experiment",
                   "run the repeated original vs augmented comparison")
    _flag(p, "plan", default=None, help="plan file of key = value lines")
    _flag(p, "real", required=True, help="real EFDM dataset")
    _flag(p, "test", default=None, help="explicit held-out real dataset")
    _flag(p, "synth", action="append", default=None, help="NAME=PATH synthetic dataset per arm (repeatable)")
    _flag(p, "runs", type=int, default=None, help=f"runs per arm (plan default {config.EXPERIMENT_RUNS})")
    _flag(p, "epochs", type=int, default=None, help=f"epochs per run (plan default {config.EXPERIMENT_EPOCHS})")
    _flag(p, "train-per-class", type=int, default=None,
          help=f"real training items per class (plan default {config.EXPERIMENT_TRAIN_PER_CLASS})")
    _flag(p, "test-per-class", type=int, default=None,
          help=f"held-out items per class (plan default {config.EXPERIMENT_TEST_PER_CLASS})")
    _flag(p, "synth-per-class", type=int, default=None,
          help=f"synthetic items per class (plan default {config.EXPERIMENT_SYNTH_PER_CLASS})")
    _flag(p, "arch", choices=["desk", "full"], default=None, help="classifier configuration (plan default desk)")


def _add_export_image(sub, common) -> None:
    p = _subparser(sub, common, "export-image", "write EFDMs as PGM/PPM/PNG images")
    _flag(p, "data", required=True, help="dataset file")
    _flag(p, "index", type=int, default=0, help="item to export")
    _flag(p, "format", choices=["pgm", "ppm", "png"], default="pgm", help="image format")
    _flag(p, "compare", default=None, help="second dataset for a side-by-side image")
    _flag(p, "compare-index", type=int, default=0, help="item of the second dataset")
    _flag(p, "grid", type=int, default=0, help="export this many items from --index as one grid")
    _flag(p, "output", default=None, help="image file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="EEG EFDM synthesis with diffusion models and augmentation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common_flags()
    for add in (_add_gen_data, _add_build_efdm, _add_train_diffusion, _add_sample,
                _add_train_classifier, _add_eval, _add_experiment, _add_export_image):
        add(sub, common)
    return parser


def _log_config(args: argparse.Namespace) -> None:
    logger.info("%s %s", PROG, args.command)
    for key, value in sorted(vars(args).items()):
        if key != "command":
            logger.info("  %s = %s", key, value)


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and return its exit code.

    Returns:
        0 on success, 1 on a pipeline or I/O failure, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.verbosity)
    if args.threads is not None:
        args.threads = resolve_threads(args.threads)
    _log_config(args)
    logger.debug("Hardware: %s", detect_hardware())

    try:
        return COMMANDS[args.command](args)
    except (PipelineError, OSError) as e:
        message = " ".join(str(e).split())
        print(f"error: {type(e).__name__}: {message}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("error: Interrupted: cancelled by user", file=sys.stderr)
        return 130


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run_cli(argv))
