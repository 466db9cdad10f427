"""
Convolutional emotion classifier over 3-plane EFDM images
"""

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from engine import Adam, Conv2d, LazyLinear, Linear, Module, Tensor, cross_entropy, gelu, maxpool2d, no_grad
from engine.functional import output_extent
from efdm.dataset import EfdmDataset
from errors import ModelBuildError, NonFiniteError, TrainingDivergenceError, ValidationError
from .checkpoint import load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ProgressCallback = Callable[[float, str], None]
Pair = Tuple[int, int]


@dataclass(frozen=True)
class ConvStage:
    """
    One conv -> GELU -> max-pool stage.
    """

    filters: int
    kernel: Pair
    padding: Pair = (0, 0)
    stride: Pair = (1, 1)
    pool: Pair = (2, 1)
    pool_stride: Optional[Pair] = None

    @property
    def pool_step(self) -> Pair:
        return self.pool if self.pool_stride is None else self.pool_stride


def _desk_stages() -> List[ConvStage]:
    return [
        ConvStage(8, (5, 1), padding=(2, 0)),
        ConvStage(16, (3, 1), padding=(1, 0)),
        ConvStage(32, (3, 1), padding=(1, 0)),
    ]


def _full_stages() -> List[ConvStage]:
    return [
        ConvStage(16, (12, 1), padding=(2, 0), pool=(4, 1)),
        ConvStage(64, (8, 1), padding=(1, 0), pool=(2, 1)),
        ConvStage(128, (4, 1), padding=(1, 0), pool=(2, 1)),
    ]


@dataclass
class ClassifierConfig:
    n_classes: int = 2
    image_size: Pair = (config.DESK_IMAGE_SIZE, config.DESK_IMAGE_SIZE)
    planes: int = 3
    stages: List[ConvStage] = field(default_factory=_desk_stages)
    head: List[int] = field(default_factory=lambda: [256, 128, 64])
    lr: float = config.CLASSIFIER_LR
    batch_size: int = config.CLASSIFIER_BATCH_SIZE
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        self.image_size = tuple(int(v) for v in self.image_size)
        self.stages = [s if isinstance(s, ConvStage) else _stage_from_dict(s) for s in self.stages]
        self.head = [int(v) for v in self.head]
        if self.n_classes < 2:
            raise ValidationError(f"a classifier needs at least 2 classes, got {self.n_classes}")
        if len(self.image_size) != 2 or min(self.image_size) < 1:
            raise ValidationError(f"image_size must be (H, W) with positive sides, got {self.image_size}")
        if self.lr < 0 or self.batch_size < 1:
            raise ValidationError("lr must be >= 0 and batch_size >= 1")
        if any(s.filters < 1 for s in self.stages) or any(width < 1 for width in self.head):
            raise ValidationError("filter counts and head widths must be positive")

    @classmethod
    def desk(cls, n_classes: int = 2, image_size: int = config.DESK_IMAGE_SIZE, **overrides: Any) -> "ClassifierConfig":
        return cls(n_classes=n_classes, image_size=(image_size, image_size), **overrides)

    @classmethod
    def full(cls, n_classes: int = 2, image_size: int = config.FULL_IMAGE_SIZE, **overrides: Any) -> "ClassifierConfig":
        """
        Conv stack 16/64/128 with kernels (12,1)/(8,1)/(4,1) and head 5000/2500/1000.
        """
        values = dict(
            stages=_full_stages(),
            head=[5000, 2500, 1000],
            lr=config.FULL_CLASSIFIER_LR,
            batch_size=config.FULL_CLASSIFIER_BATCH_SIZE,
        )
        values.update(overrides)
        return cls(n_classes=n_classes, image_size=(image_size, image_size), **values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ClassifierConfig":
        known = {k: values[k] for k in cls.__dataclass_fields__ if k in values}
        return cls(**known)


def _stage_from_dict(values: Dict[str, Any]) -> ConvStage:
    pool_stride = values.get("pool_stride")
    return ConvStage(
        filters=int(values["filters"]),
        kernel=tuple(values["kernel"]),
        padding=tuple(values.get("padding", (0, 0))),
        stride=tuple(values.get("stride", (1, 1))),
        pool=tuple(values.get("pool", (2, 1))),
        pool_stride=tuple(pool_stride) if pool_stride is not None else None,
    )


def layer_shapes(cfg: ClassifierConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """
    Per-layer output shapes (batch axis omitted) from the configured
    arithmetic alone.

    Raises:
        ModelBuildError: Naming the first layer whose output would be empty
    """
    c, (h, w) = cfg.planes, cfg.image_size
    shapes = []
    for i, stage in enumerate(cfg.stages):
        name = f"conv{i}"
        h_out = output_extent(h, stage.kernel[0], stage.stride[0], stage.padding[0])
        w_out = output_extent(w, stage.kernel[1], stage.stride[1], stage.padding[1])
        if h_out < 1 or w_out < 1:
            raise ModelBuildError(name, f"kernel {stage.kernel} does not fit a {h}x{w} input")
        c, h, w = stage.filters, h_out, w_out
        shapes.append((name, (c, h, w)))

        name = f"pool{i}"
        if stage.pool[0] > h or stage.pool[1] > w:
            raise ModelBuildError(name, f"pool {stage.pool} does not fit a {h}x{w} input")
        step = stage.pool_step
        h = output_extent(h, stage.pool[0], step[0])
        w = output_extent(w, stage.pool[1], step[1])
        shapes.append((name, (c, h, w)))

    shapes.append(("flatten", (c * h * w,)))
    for i, width in enumerate(cfg.head):
        shapes.append((f"fc{i}", (width,)))
    shapes.append(("output", (cfg.n_classes,)))
    return shapes


class EmotionClassifier(Module):
    """
    Conv/pool stages, then a linear head whose first layer binds to the
    flattened size on first use. GELU follows every layer except the output.
    """

    def __init__(self, cfg: ClassifierConfig, rng: np.random.Generator, class_names: Sequence[str] = ()):
        self.cfg = cfg
        # Output index k scores class_names[k]; empty until trained or loaded
        self.class_names: List[str] = list(class_names)
        convs = []
        in_channels = cfg.planes
        for stage in cfg.stages:
            convs.append(Conv2d(in_channels, stage.filters, stage.kernel, rng, stage.stride, stage.padding))
            in_channels = stage.filters
        self.convs = convs

        widths = cfg.head + [cfg.n_classes]
        layers: List[Module] = [LazyLinear(widths[0], rng)]
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            layers.append(Linear(fan_in, fan_out, rng))
        self.layers = layers

    @property
    def flat_features(self) -> int:
        return layer_shapes(self.cfg)[2 * len(self.cfg.stages)][1][0]

    def ensure_bound(self) -> None:
        self.layers[0].bind(self.flat_features)

    def forward(self, x: Tensor) -> Tensor:
        for conv, stage in zip(self.convs, self.cfg.stages):
            x = maxpool2d(gelu(conv(x)), stage.pool, stage.pool_step)
        x = x.flatten(1)
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last:
                x = gelu(x)
        return x


def build_classifier(cfg: ClassifierConfig) -> EmotionClassifier:
    """
    Check the shape arithmetic and build a seeded model.

    Raises:
        ModelBuildError: If any layer would produce an empty output
    """
    shapes = layer_shapes(cfg)
    model = EmotionClassifier(cfg, np.random.default_rng(cfg.seed))
    logger.debug("Classifier layers: %s", ", ".join(f"{n}={s}" for n, s in shapes))
    logger.info("✓ Classifier built: %d conv stages, head %s -> %d classes, flatten %d",
                len(cfg.stages), cfg.head, cfg.n_classes, shapes[2 * len(cfg.stages)][1][0])
    return model


@dataclass
class TrainRunRecord:
    seed: int
    dataset_fingerprint: str
    epochs: int
    train_loss: List[float] = field(default_factory=list)
    train_accuracy: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_accuracy: List[float] = field(default_factory=list)

    def __post_init__(self):
        lengths = {len(self.train_loss), len(self.train_accuracy), len(self.val_loss), len(self.val_accuracy)}
        if lengths != {self.epochs}:
            raise ValidationError(f"metric histories must all have {self.epochs} entries")

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for epoch in range(self.epochs):
            rows.append({"epoch": epoch + 1, "split": "train",
                         "loss": self.train_loss[epoch], "accuracy": self.train_accuracy[epoch]})
            rows.append({"epoch": epoch + 1, "split": "validation",
                         "loss": self.val_loss[epoch], "accuracy": self.val_accuracy[epoch]})
        return pd.DataFrame(rows, columns=["epoch", "split", "loss", "accuracy"])

    def save_csv(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path


def dataset_fingerprint(dataset: EfdmDataset) -> str:
    digest = hashlib.sha256()
    for e, fp in zip(dataset.items, dataset.fingerprints()):
        digest.update(e.label.encode("utf-8"))
        digest.update(fp.encode("ascii"))
    return digest.hexdigest()


def _check_data(model: EmotionClassifier, data: EfdmDataset, role: str) -> None:
    cfg = model.cfg
    if model.class_names and data.class_names != model.class_names:
        raise ValidationError(
            f"{role} vocabulary {data.class_names} differs from the model's {model.class_names}; "
            "align the dataset to the model's class order first"
        )
    if data.n_classes != cfg.n_classes:
        raise ValidationError(
            f"{role} vocabulary {data.class_names} has {data.n_classes} classes, the model has {cfg.n_classes}"
        )
    if len(data) and data.image_shape != cfg.image_size:
        raise ValidationError(f"{role} EFDMs are {data.image_shape}, the model expects {cfg.image_size}")


def predict_logits(
    model: EmotionClassifier,
    data: EfdmDataset,
    batch_size: Optional[int] = None,
    threads: int = 1,
) -> np.ndarray:
    """
    Forward the whole dataset without gradients; batches may run on threads.
    """
    model.ensure_bound()
    batch_size = batch_size or model.cfg.batch_size
    starts = list(range(0, len(data), batch_size))

    def run(start: int) -> np.ndarray:
        indices = range(start, min(start + batch_size, len(data)))
        with no_grad():
            return model(Tensor(data.to_array(model.cfg.planes, indices))).data

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts) if parts else np.empty((0, model.cfg.n_classes))


def evaluate(model: EmotionClassifier, data: EfdmDataset, threads: int = 1) -> Tuple[float, np.ndarray]:
    """
    Argmax accuracy and per-class recall.

    Returns:
        Tuple of (accuracy, recall per class; NaN for classes absent from data)

    Raises:
        ValidationError: If the dataset is empty or its vocabulary does not fit
    """
    if len(data) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    _check_data(model, data, "evaluation")
    labels = data.label_indices()
    predicted = predict_logits(model, data, threads=threads).argmax(axis=1)
    hits = predicted == labels
    recall = np.full(model.cfg.n_classes, np.nan)
    for k in range(model.cfg.n_classes):
        mask = labels == k
        if mask.any():
            recall[k] = hits[mask].mean()
    return float(hits.mean()), recall


def evaluate_loss(model: EmotionClassifier, data: EfdmDataset, threads: int = 1) -> Tuple[float, float]:
    """
    Mean cross-entropy and accuracy without weight updates.
    """
    if len(data) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    labels = data.label_indices()
    logits = predict_logits(model, data, threads=threads)
    with no_grad():
        loss = cross_entropy(Tensor(logits), labels).item()
    return loss, float((logits.argmax(axis=1) == labels).mean())


def train_classifier(
    model: EmotionClassifier,
    train: EfdmDataset,
    val: EfdmDataset,
    epochs: int,
    seed: int,
    progress_callback: Optional[ProgressCallback] = None,
    threads: int = 1,
) -> TrainRunRecord:
    """
    Shuffled mini-batch cross-entropy training with Adam.

    Args:
        model: Classifier to train in place
        train: Training EFDMs
        val: Held-out EFDMs evaluated after every epoch
        epochs: Number of passes over ``train``
        seed: Shuffling seed
        progress_callback: Optional callback function(progress, status_message)
        threads: Threads for validation forward passes

    Returns:
        Per-epoch train and validation loss and accuracy

    Raises:
        ValidationError: On vocabulary or shape mismatch, or empty data
        TrainingDivergenceError: If a loss or gradient becomes non-finite
    """
    _check_data(model, train, "training")
    _check_data(model, val, "validation")
    if val.class_names != train.class_names:
        raise ValidationError(f"validation classes {val.class_names} differ from training classes {train.class_names}")
    if len(train) == 0 or len(val) == 0:
        raise ValidationError("training and validation sets must be non-empty")
    model.class_names = list(train.class_names)

    cfg = model.cfg
    model.ensure_bound()
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(seed)
    inputs = train.to_array(cfg.planes)
    labels = train.label_indices()
    n = len(train)
    batches = (n + cfg.batch_size - 1) // cfg.batch_size
    record = dict(train_loss=[], train_accuracy=[], val_loss=[], val_accuracy=[])
    logger.info("Training classifier: %d train / %d validation EFDMs, %d epochs, seed %d",
                n, len(val), epochs, seed)

    start_time = time.time()
    step = 0
    last_loss = float("nan")
    for epoch in range(epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            try:
                logits = model(Tensor(inputs[idx]))
                loss = cross_entropy(logits, labels[idx])
                last_loss = loss.item()
                loss.backward()
                optimizer.step()
            except NonFiniteError as e:
                raise TrainingDivergenceError(last_loss, step, epoch + 1) from e
            loss_sum += last_loss * len(idx)
            correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())
            step += 1
            if progress_callback:
                progress_callback((epoch * batches + b + 1) / (epochs * batches),
                                  f"Epoch {epoch + 1}/{epochs}: loss {last_loss:.4f}")

        record["train_loss"].append(loss_sum / n)
        record["train_accuracy"].append(correct / n)
        val_loss, val_acc = evaluate_loss(model, val, threads=threads)
        record["val_loss"].append(val_loss)
        record["val_accuracy"].append(val_acc)
        logger.debug("  epoch %d: train loss %.4f acc %.4f | val loss %.4f acc %.4f",
                     epoch + 1, record["train_loss"][-1], record["train_accuracy"][-1], val_loss, val_acc)

    logger.info("✓ Classifier trained in %.1fs (final validation accuracy %.4f)",
                time.time() - start_time, record["val_accuracy"][-1] if epochs else float("nan"))
    return TrainRunRecord(seed=seed, dataset_fingerprint=dataset_fingerprint(train), epochs=epochs, **record)


def save_classifier(model: EmotionClassifier, path: PathLike, class_names: Sequence[str] = ()) -> Path:
    """
    Store config, weights and class order; ``class_names`` defaults to the
    order the model was trained with.

    Raises:
        ValidationError: If ``class_names`` contradicts the trained order
    """
    names = list(class_names) or model.class_names
    if model.class_names and names != model.class_names:
        raise ValidationError(f"class names {names} differ from the trained order {model.class_names}")
    if names and len(names) != model.cfg.n_classes:
        raise ValidationError(f"{len(names)} class names for a {model.cfg.n_classes}-class model")
    model.ensure_bound()
    meta = {**model.cfg.to_dict(), "class_names": names}
    path = save_checkpoint(path, "classifier", meta, model.state_dict())
    logger.info("✓ Classifier saved: %s", path)
    return path


def load_classifier(path: PathLike) -> Tuple[EmotionClassifier, List[str]]:
    """
    Returns:
        Tuple of (model, class names stored with it)
    """
    meta, state = load_checkpoint(path, kind="classifier")
    names = list(meta.get("class_names", []))
    model = EmotionClassifier(ClassifierConfig.from_dict(meta), np.random.default_rng(meta.get("seed", 0)), names)
    model.load_state_dict(state)
    return model, names
