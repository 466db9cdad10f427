"""
Per-class diffusion training loop with periodic checkpoints
"""

import logging
import time
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np

import config
from engine import Adam
from efdm.dataset import EfdmDataset
from efdm.export import save_grid
from errors import ValidationError
from .checkpoint import load_checkpoint, save_checkpoint
from .denoiser import Denoiser, DiffusionConfig, build_denoiser
from .diffusion import NoiseSchedule, linear_schedule, sample, samples_to_efdms, train_step

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ProgressCallback = Callable[[float, str], None]


def checkpoint_path(prefix: PathLike, epoch: int) -> Path:
    prefix = Path(prefix)
    return prefix.with_name(f"{prefix.name}_e{epoch}{config.CHECKPOINT_EXTENSION}")


class DiffusionTrainer:
    """
    Trains one denoiser on the EFDMs of a single class.
    """

    def __init__(
        self,
        cfg: DiffusionConfig,
        label: str = "",
        progress_callback: Optional[ProgressCallback] = None,
    ):
        """
        Args:
            cfg: Model and optimization settings
            label: Emotion class the model is trained on
            progress_callback: Optional callback function(progress, status_message)
        """
        self.cfg = cfg
        self.label = label
        self.progress_callback = progress_callback
        self.schedule: NoiseSchedule = linear_schedule(cfg.diffusion_steps)
        self.model: Denoiser = build_denoiser(cfg)
        self.optimizer = Adam(self.model.parameters(), lr=cfg.lr)
        self.epoch = 0
        self.step = 0
        self.history: List[float] = []

    def train(
        self,
        dataset: EfdmDataset,
        epochs: int,
        checkpoint_every: int = 0,
        output_prefix: Optional[PathLike] = None,
        preview: int = 0,
    ) -> List[float]:
        """
        Run ``epochs`` passes over the dataset in shuffled mini-batches.

        Args:
            dataset: Training EFDMs, already at the model's image size
            epochs: Number of passes
            checkpoint_every: Save ``<prefix>_e<epoch>.ddpm`` every k epochs
                (0 keeps only the initial and final checkpoints)
            output_prefix: Checkpoint path prefix; nothing is saved if None
            preview: If > 0, also save a grid of that many samples per checkpoint

        Returns:
            Mean loss per epoch

        Raises:
            ValidationError: On an empty dataset or an image size mismatch
            TrainingDivergenceError: If the loss becomes non-finite
        """
        if len(dataset) == 0:
            raise ValidationError("cannot train a diffusion model on an empty dataset")
        expected = (self.cfg.image_size, self.cfg.image_size)
        if dataset.image_shape != expected:
            raise ValidationError(f"EFDMs are {dataset.image_shape}, the model expects {expected}")

        data = dataset.to_array(planes=self.cfg.planes)
        rng = np.random.default_rng(self.cfg.seed + 1)
        n = len(data)
        batch = self.cfg.batch_size
        batches_per_epoch = (n + batch - 1) // batch
        total = max(epochs * batches_per_epoch, 1)
        logger.info("Training '%s' denoiser: %d EFDMs, %d epochs, batch %d, T=%d",
                    self.label, n, epochs, batch, self.schedule.T)

        if output_prefix is not None and self.epoch == 0:
            self._checkpoint(output_prefix, preview)

        start_time = time.time()
        done = 0
        last_loss = float("nan")
        for epoch_index in range(epochs):
            order = rng.permutation(n)
            losses = []
            for start in range(0, n, batch):
                last_loss = train_step(
                    self.model, data[order[start:start + batch]], self.schedule, rng,
                    self.optimizer, step=self.step, last_loss=last_loss, epoch=self.epoch + 1,
                )
                losses.append(last_loss)
                self.step += 1
                done += 1
                self._update_progress(
                    done / total,
                    f"Epoch {epoch_index + 1}/{epochs}: loss {losses[-1]:.4f}",
                )
            self.epoch += 1
            self.history.append(float(np.mean(losses)))
            logger.info("  epoch %d: mean loss %.5f", self.epoch, self.history[-1])

            if output_prefix is not None and (
                (checkpoint_every and self.epoch % checkpoint_every == 0) or epoch_index == epochs - 1
            ):
                self._checkpoint(output_prefix, preview)

        logger.info("✓ Diffusion training complete (%.1fs)", time.time() - start_time)
        return self.history

    def _checkpoint(self, prefix: PathLike, preview: int) -> Path:
        path = self.save(checkpoint_path(prefix, self.epoch))
        if preview > 0:
            efdms = self.generate(preview, seed=self.cfg.seed)
            save_grid(efdms, path.with_suffix(".png"))
        return path

    def save(self, path: PathLike) -> Path:
        meta = {**self.cfg.to_dict(), "label": self.label, "epoch": self.epoch, "step": self.step}
        path = save_checkpoint(path, "diffusion", meta, self.model.state_dict())
        logger.info("✓ Checkpoint saved: %s", path)
        return path

    @classmethod
    def load(cls, path: PathLike, progress_callback: Optional[ProgressCallback] = None) -> "DiffusionTrainer":
        """
        Restore a trainer (model weights, label and epoch) from a checkpoint.
        """
        meta, state = load_checkpoint(path, kind="diffusion")
        fields = {k: meta[k] for k in DiffusionConfig.__dataclass_fields__ if k in meta}
        trainer = cls(DiffusionConfig(**fields), label=meta.get("label", ""), progress_callback=progress_callback)
        trainer.model.load_state_dict(state)
        trainer.epoch = int(meta.get("epoch", 0))
        trainer.step = int(meta.get("step", 0))
        return trainer

    def generate(self, n: int, seed: int, threads: int = 1) -> List:
        """
        Sample n synthetic EFDMs labelled with this trainer's class.
        """
        if n < 0:
            raise ValidationError(f"sample count must be >= 0, got {n}")
        images = sample(self.model, n, self.schedule, seed, self.cfg.image_shape, threads=threads)
        return samples_to_efdms(images, self.label, {"epoch": self.epoch})

    def _update_progress(self, progress: float, message: str) -> None:
        if self.progress_callback:
            self.progress_callback(progress, message)


if __name__ == "__main__":
    import sys

    from efdm.dataset import load_dataset

    if len(sys.argv) < 3:
        print("Usage: python -m models.trainer <dataset.efdm> <label>")
        sys.exit(1)

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    data = load_dataset(sys.argv[1]).by_label(sys.argv[2])
    trainer = DiffusionTrainer(DiffusionConfig(diffusion_steps=50, num_channels=16, num_res_blocks=1), sys.argv[2])
    losses = trainer.train(data, epochs=2)
    print(f"Losses: {[round(x, 4) for x in losses]}")
