"""
Repeated-run classifier experiments: real-only against real + synthetic,
and classifier accuracy on samples from diffusion checkpoints
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

import config
from efdm.dataset import EfdmDataset
from eeg.datagen import derive_seed
from errors import ValidationError
from models.classifier import (
    ClassifierConfig,
    EmotionClassifier,
    TrainRunRecord,
    build_classifier,
    evaluate,
    load_classifier,
    train_classifier,
)
from models.trainer import DiffusionTrainer
from .report import ExperimentReport, SyntheticEvalResult

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ProgressCallback = Callable[[float, str], None]

ORIGINAL_ARM = "Original"


@dataclass
class ExperimentPlan:
    n_runs: int = config.EXPERIMENT_RUNS
    epochs: int = config.EXPERIMENT_EPOCHS
    train_per_class: int = config.EXPERIMENT_TRAIN_PER_CLASS
    test_per_class: int = config.EXPERIMENT_TEST_PER_CLASS
    synth_per_class: int = config.EXPERIMENT_SYNTH_PER_CLASS
    checkpoints: List[int] = field(default_factory=lambda: list(config.EXPERIMENT_CHECKPOINTS))
    base_seed: int = config.DEFAULT_SEED
    architecture: str = "desk"
    threads: int = config.DEFAULT_THREADS

    def __post_init__(self):
        self.checkpoints = [int(c) for c in self.checkpoints]
        if self.n_runs < 2:
            raise ValidationError(f"n_runs must be >= 2 for confidence intervals, got {self.n_runs}")
        if min(self.epochs, self.train_per_class, self.test_per_class, self.synth_per_class) < 1:
            raise ValidationError("epochs and per-class counts must be >= 1")
        if self.architecture not in ("desk", "full"):
            raise ValidationError(f"architecture must be 'desk' or 'full', got '{self.architecture}'")
        if self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")

    @classmethod
    def from_file(cls, path: PathLike, **overrides: Any) -> "ExperimentPlan":
        """
        Read ``key = value`` lines; blank lines and ``#`` comments are skipped.
        Keyword overrides (e.g. from CLI flags) win over file values.

        Raises:
            FileNotFoundError: If the file does not exist
            ValidationError: On unknown keys or malformed lines
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Plan file not found: {path}")
        values: Dict[str, Any] = {}
        for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{number}: expected 'key = value', got '{line}'")
            key, raw = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = raw
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ExperimentPlan":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ValidationError(f"unknown plan keys: {unknown}")
        parsed = {}
        for key, raw in values.items():
            try:
                if key == "checkpoints":
                    parsed[key] = [int(v) for v in str(raw).replace(",", " ").split()] \
                        if isinstance(raw, str) else [int(v) for v in raw]
                elif key == "architecture":
                    parsed[key] = str(raw)
                else:
                    parsed[key] = int(raw)
            except ValueError as e:
                raise ValidationError(f"plan key '{key}': cannot parse {raw!r}") from e
        return cls(**parsed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def classifier_config(plan: ExperimentPlan, dataset: EfdmDataset, seed: int) -> ClassifierConfig:
    side = dataset.image_shape[0]
    if plan.architecture == "full":
        return ClassifierConfig.full(n_classes=dataset.n_classes, image_size=side, seed=seed)
    return ClassifierConfig.desk(n_classes=dataset.n_classes, image_size=side, seed=seed)


def check_disjoint(test: EfdmDataset, *training: EfdmDataset) -> None:
    """
    Raises:
        ValidationError: Listing fingerprints shared by test and training data
    """
    seen = set()
    for part in training:
        seen.update(part.fingerprints())
    collisions = sorted(set(test.fingerprints()) & seen)
    if collisions:
        shown = ", ".join(fp[:16] for fp in collisions[:5])
        more = f" (+{len(collisions) - 5} more)" if len(collisions) > 5 else ""
        raise ValidationError(f"{len(collisions)} test EFDMs also appear in training data: {shown}{more}")


def _split_real(plan: ExperimentPlan, real: EfdmDataset, test: Optional[EfdmDataset]) -> Tuple[EfdmDataset, EfdmDataset]:
    if test is None:
        return real.split_per_class(plan.train_per_class, plan.test_per_class)
    train, _ = real.split_per_class(plan.train_per_class)
    held_out, _ = test.split_per_class(plan.test_per_class)
    return train, held_out.aligned_to(train.class_names)


def _augment(train: EfdmDataset, synth: EfdmDataset, per_class: int, arm: str) -> Tuple[EfdmDataset, EfdmDataset]:
    extra = [c for c in synth.class_names if c not in train.class_names]
    if extra:
        raise ValidationError(f"arm '{arm}': synthetic classes {extra} are not in the real vocabulary")
    aligned = EfdmDataset(synth.items, train.class_names)
    chosen, _ = aligned.split_per_class(per_class)
    return train.merge(chosen), chosen


def run_arm(
    plan: ExperimentPlan,
    train: EfdmDataset,
    test: EfdmDataset,
    arm: str = ORIGINAL_ARM,
    progress_callback: Optional[ProgressCallback] = None,
) -> List[TrainRunRecord]:
    """
    Train ``plan.n_runs`` classifiers on one training set; run i uses seed
    base_seed + i for both initialization and shuffling.
    """
    done = []

    def run(i: int) -> TrainRunRecord:
        seed = plan.base_seed + i
        model = build_classifier(classifier_config(plan, train, seed))
        record = train_classifier(model, train, test, plan.epochs, seed)
        done.append(i)
        if progress_callback:
            progress_callback(len(done) / plan.n_runs, f"{arm}: run {len(done)}/{plan.n_runs}")
        return record

    logger.info("Arm '%s': %d runs on %d EFDMs", arm, plan.n_runs, len(train))
    if plan.threads > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            return list(pool.map(run, range(plan.n_runs)))
    return [run(i) for i in range(plan.n_runs)]


def run_augmentation_study(
    plan: ExperimentPlan,
    real: EfdmDataset,
    synth_by_arm: Mapping[str, EfdmDataset],
    test: Optional[EfdmDataset] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    """
    Real-only arm plus one augmented arm per synthetic set, all evaluated
    every epoch on the same held-out real EFDMs with identical run seeds.

    Args:
        plan: Run counts, epochs and per-class sizes
        real: Real EFDMs; split into train/test per class unless ``test`` is given
        synth_by_arm: Arm name -> synthetic EFDMs
        test: Optional explicit held-out real set
        progress_callback: Optional callback function(progress, status_message)

    Raises:
        ValidationError: On overlap between test and training data, or short classes
    """
    if ORIGINAL_ARM in synth_by_arm:
        raise ValidationError(f"'{ORIGINAL_ARM}' is reserved for the real-only arm")
    train, held_out = _split_real(plan, real, test)
    check_disjoint(held_out, train)

    arm_data = {ORIGINAL_ARM: train}
    for name, synth in synth_by_arm.items():
        merged, chosen = _augment(train, synth, plan.synth_per_class, name)
        check_disjoint(held_out, chosen)
        arm_data[name] = merged

    n_arms = len(arm_data)
    arms: Dict[str, List[TrainRunRecord]] = {}
    for index, (name, data) in enumerate(arm_data.items()):
        def scaled(progress: float, message: str, index=index) -> None:
            if progress_callback:
                progress_callback((index + progress) / n_arms, message)
        arms[name] = run_arm(plan, data, held_out, name, scaled)

    return ExperimentReport(arms=arms, plan=plan.to_dict())


def run_two_arm(
    plan: ExperimentPlan,
    real: EfdmDataset,
    synth: EfdmDataset,
    test: Optional[EfdmDataset] = None,
    arm_name: str = "Augmented",
    progress_callback: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    return run_augmentation_study(plan, real, {arm_name: synth}, test, progress_callback)


def _load_classifiers(paths: Sequence[PathLike]) -> List[Tuple[EmotionClassifier, List[str]]]:
    return [load_classifier(p) for p in paths]


def eval_on_synthetic(
    classifier_ckpt: Union[PathLike, Sequence[PathLike]],
    diffusion_ckpts: Sequence[PathLike],
    n_samples: int,
    seed: int = config.DEFAULT_SEED,
    threads: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> SyntheticEvalResult:
    """
    Label samples from each diffusion checkpoint with real-data classifiers.

    Checkpoints are grouped by their stored training epoch; each group must
    hold one checkpoint per class. Samples take the label of the model that
    generated them.

    Args:
        classifier_ckpt: One classifier checkpoint or several (for intervals)
        diffusion_ckpts: Per-class diffusion checkpoints at one or more epochs
        n_samples: Samples drawn per class per checkpoint
        seed: Base sampling seed
        threads: Sampling/evaluation threads

    Returns:
        Accuracy per classifier per diffusion epoch

    Raises:
        FileNotFoundError: Naming the first missing checkpoint
        ValidationError: If n_samples < 1 or a class is missing from an epoch
    """
    if n_samples < 1:
        raise ValidationError(f"n_samples must be >= 1, got {n_samples}")
    classifier_paths = [classifier_ckpt] if isinstance(classifier_ckpt, (str, Path)) else list(classifier_ckpt)
    for path in list(classifier_paths) + list(diffusion_ckpts):
        if not Path(path).exists():
            raise FileNotFoundError(f"Checkpoint not found: {path}")

    classifiers = _load_classifiers(classifier_paths)
    class_names = classifiers[0][1] or [f"class{k}" for k in range(classifiers[0][0].cfg.n_classes)]

    by_epoch: Dict[int, Dict[str, DiffusionTrainer]] = {}
    for path in diffusion_ckpts:
        trainer = DiffusionTrainer.load(path)
        by_epoch.setdefault(trainer.epoch, {})[trainer.label] = trainer

    epochs = sorted(by_epoch)
    accuracies = np.empty((len(classifiers), len(epochs)))
    for j, epoch in enumerate(epochs):
        trainers = by_epoch[epoch]
        missing = [c for c in class_names if c not in trainers]
        if missing:
            raise ValidationError(f"diffusion epoch {epoch} has no checkpoint for classes {missing}")
        items = []
        for k, label in enumerate(class_names):
            items.extend(trainers[label].generate(n_samples, derive_seed(seed, epoch, k), threads))
        samples = EfdmDataset(items, class_names)
        for i, (model, names) in enumerate(classifiers):
            accuracies[i, j], _ = evaluate(model, samples.aligned_to(names) if names else samples, threads=threads)
        logger.info("  diffusion epoch %d: mean accuracy on synthetic %.4f", epoch, accuracies[:, j].mean())
        if progress_callback:
            progress_callback((j + 1) / len(epochs), f"Evaluated diffusion epoch {epoch}")

    return SyntheticEvalResult(epochs=epochs, accuracies=accuracies)
