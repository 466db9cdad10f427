"""
Experiment harness: repeated classifier runs, intervals and reports
"""

from .stats import confidence_interval, curve_interval
from .report import ExperimentReport, SyntheticEvalResult, emit_report, summarize_curves, load_curves
from .replication import ReplicationReport, nearest_neighbor_distances
from .runner import (
    ExperimentPlan,
    ORIGINAL_ARM,
    check_disjoint,
    eval_on_synthetic,
    run_arm,
    run_augmentation_study,
    run_two_arm,
)

__all__ = [
    "confidence_interval",
    "curve_interval",
    "ExperimentReport",
    "SyntheticEvalResult",
    "emit_report",
    "summarize_curves",
    "load_curves",
    "ReplicationReport",
    "nearest_neighbor_distances",
    "ExperimentPlan",
    "ORIGINAL_ARM",
    "check_disjoint",
    "eval_on_synthetic",
    "run_arm",
    "run_augmentation_study",
    "run_two_arm",
]
