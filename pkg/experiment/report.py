"""
Experiment reports: per-run curves, best-accuracy summaries and SVG figures
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")

import numpy as np
import pandas as pd
from matplotlib.figure import Figure

import config
from errors import ValidationError
from models.classifier import TrainRunRecord
from .stats import curve_interval

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CURVE_COLUMNS = ["arm", "run", "epoch", "split", "metric", "value"]
SUMMARY_COLUMNS = ["arm", "max_average_accuracy", "best_epoch"]
REFERENCE_FILE = "reference.csv"
SYNTHETIC_EVAL_FILE = "synthetic_eval.csv"

matplotlib.rcParams["svg.hashsalt"] = "efdm-report"
matplotlib.rcParams["svg.fonttype"] = "none"

_SERIES = {
    ("train", "loss"): "train_loss",
    ("train", "accuracy"): "train_accuracy",
    ("validation", "loss"): "val_loss",
    ("validation", "accuracy"): "val_accuracy",
}


@dataclass
class SyntheticEvalResult:
    """
    Accuracy of each classifier (rows) on samples from each diffusion epoch (columns).
    """

    epochs: List[int]
    accuracies: np.ndarray

    def mean(self) -> np.ndarray:
        return self.accuracies.mean(axis=0)

    def interval(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.accuracies.shape[0] < 2:
            return self.mean(), np.zeros(len(self.epochs))
        return curve_interval(self.accuracies)

    def to_frame(self) -> pd.DataFrame:
        means, halves = self.interval()
        return pd.DataFrame({"epoch": self.epochs, "mean_accuracy": means, "ci_half_width": halves})


@dataclass
class ExperimentReport:
    arms: Dict[str, List[TrainRunRecord]]
    plan: Dict[str, Any] = field(default_factory=dict)
    synthetic_eval: Optional[SyntheticEvalResult] = None

    def runs(self, arm: str, split: str, metric: str) -> np.ndarray:
        """
        runs x epochs matrix of one metric.
        """
        attribute = _SERIES[(split, metric)]
        return np.array([getattr(r, attribute) for r in self.arms[arm]], dtype=np.float64)

    def trajectory(self, arm: str, split: str = "validation", metric: str = "accuracy") -> Tuple[np.ndarray, np.ndarray]:
        return curve_interval(self.runs(arm, split, metric))

    def curves_frame(self) -> pd.DataFrame:
        rows = []
        for arm, records in self.arms.items():
            for run, record in enumerate(records):
                for epoch in range(record.epochs):
                    for (split, metric), attribute in _SERIES.items():
                        rows.append((arm, run, epoch + 1, split, metric, getattr(record, attribute)[epoch]))
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)

    def summary_frame(self) -> pd.DataFrame:
        return summarize_curves(self.curves_frame())


def summarize_curves(curves: pd.DataFrame) -> pd.DataFrame:
    """
    Max over epochs of the across-run mean validation accuracy, per arm, in percent.
    Arms keep their order of first appearance.
    """
    accuracy = curves[(curves["split"] == "validation") & (curves["metric"] == "accuracy")]
    rows = []
    for arm in pd.unique(curves["arm"]):
        per_epoch = accuracy[accuracy["arm"] == arm].groupby("epoch", sort=True)["value"].mean()
        best_epoch = int(per_epoch.idxmax())
        rows.append((arm, float(per_epoch.max()) * 100.0, best_epoch))
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def reference_frame() -> pd.DataFrame:
    return pd.DataFrame(
        [(arm, value, "published") for arm, value in config.PUBLISHED_REFERENCE_ROWS.items()],
        columns=["arm", "max_average_accuracy", "source"],
    )


def load_curves(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def _plot_band(ax, epochs: np.ndarray, runs: np.ndarray, label: str, style: str = "-") -> None:
    means, halves = curve_interval(runs)
    line, = ax.plot(epochs, means, style, label=label)
    ax.fill_between(epochs, means - halves, means + halves, color=line.get_color(), alpha=0.2, linewidth=0)


def _save(fig: Figure, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _metric_figure(report: ExperimentReport, metric: str, path: Path) -> Path:
    arms = list(report.arms)
    fig = Figure(figsize=(5 * len(arms), 4))
    axes = fig.subplots(1, len(arms), squeeze=False)[0]
    for ax, arm in zip(axes, arms):
        epochs = np.arange(1, report.arms[arm][0].epochs + 1)
        _plot_band(ax, epochs, report.runs(arm, "train", metric), "train")
        _plot_band(ax, epochs, report.runs(arm, "validation", metric), "validation", "--")
        ax.set_title(arm)
        ax.set_xlabel("epoch")
        ax.set_ylabel(metric)
        ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def _comparison_figure(report: ExperimentReport, baseline: str, path: Path) -> Path:
    others = [arm for arm in report.arms if arm != baseline] or [baseline]
    fig = Figure(figsize=(5 * len(others), 4))
    axes = fig.subplots(1, len(others), squeeze=False)[0]
    for ax, arm in zip(axes, others):
        epochs = np.arange(1, report.arms[baseline][0].epochs + 1)
        _plot_band(ax, epochs, report.runs(baseline, "validation", "accuracy"), baseline)
        if arm != baseline:
            _plot_band(ax, epochs, report.runs(arm, "validation", "accuracy"), arm, "--")
        ax.set_xlabel("epoch")
        ax.set_ylabel("validation accuracy")
        ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def save_synthetic_figure(result: SyntheticEvalResult, path: Path) -> Path:
    fig = Figure(figsize=(5, 4))
    ax = fig.subplots()
    means, halves = result.interval()
    line, = ax.plot(result.epochs, means, "o-")
    ax.fill_between(result.epochs, means - halves, means + halves, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("diffusion epoch")
    ax.set_ylabel("accuracy on synthetic EFDMs")
    fig.tight_layout()
    return _save(fig, path)


def emit_report(report: ExperimentReport, directory: PathLike) -> List[Path]:
    """
    Write curves.csv, summary.csv, reference.csv and the SVG figures.

    Returns:
        Paths written, in order

    Raises:
        ValidationError: If there are no arms or an arm has no runs (nothing is written)
        OSError: If the directory cannot be created or written
    """
    if not report.arms:
        raise ValidationError("report has no arms")
    empty = [arm for arm, records in report.arms.items() if not records]
    if empty:
        raise ValidationError(f"arms without runs: {empty}")
    lengths = {r.epochs for records in report.arms.values() for r in records}
    if len(lengths) != 1:
        raise ValidationError(f"runs disagree on epoch count: {sorted(lengths)}")

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    curves = report.curves_frame()
    path = directory / config.CURVES_FILE
    curves.to_csv(path, index=False)
    written.append(path)

    path = directory / config.SUMMARY_FILE
    summarize_curves(load_curves(directory / config.CURVES_FILE)).to_csv(path, index=False)
    written.append(path)

    path = directory / REFERENCE_FILE
    reference_frame().to_csv(path, index=False)
    written.append(path)

    baseline = next(iter(report.arms))
    multi_run = all(len(records) >= 2 for records in report.arms.values())
    if multi_run:
        written.append(_metric_figure(report, "accuracy", directory / "accuracy.svg"))
        written.append(_metric_figure(report, "loss", directory / "loss.svg"))
        written.append(_comparison_figure(report, baseline, directory / "comparison.svg"))
    else:
        logger.warning("⚠ Fewer than 2 runs per arm: skipping interval figures")

    if report.synthetic_eval is not None:
        path = directory / SYNTHETIC_EVAL_FILE
        report.synthetic_eval.to_frame().to_csv(path, index=False)
        written.append(path)
        written.append(save_synthetic_figure(report.synthetic_eval, directory / "synthetic_eval.svg"))

    for arm, (value, epoch) in zip(report.arms, summarize_curves(curves)[["max_average_accuracy", "best_epoch"]].values):
        logger.info("  %-24s max average accuracy %.3f%% (epoch %d)", arm, value, int(epoch))
    logger.info("✓ Report written to %s (%d files)", directory, len(written))
    return written
