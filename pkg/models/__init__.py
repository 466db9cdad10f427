"""
Models: diffusion (schedule, denoiser, trainer) and the emotion classifier
"""

from .checkpoint import save_checkpoint, load_checkpoint
from .diffusion import (
    NoiseSchedule,
    linear_schedule,
    q_sample,
    q_step,
    train_step,
    p_sample_loop,
    sample,
    sample_to_efdm,
    samples_to_efdms,
)
from .denoiser import DiffusionConfig, Denoiser, build_denoiser, timestep_embedding
from .trainer import DiffusionTrainer, checkpoint_path
from .classifier import (
    ClassifierConfig,
    ConvStage,
    EmotionClassifier,
    TrainRunRecord,
    build_classifier,
    layer_shapes,
    train_classifier,
    evaluate,
    evaluate_loss,
    predict_logits,
    save_classifier,
    load_classifier,
)

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "NoiseSchedule",
    "linear_schedule",
    "q_sample",
    "q_step",
    "train_step",
    "p_sample_loop",
    "sample",
    "sample_to_efdm",
    "samples_to_efdms",
    "DiffusionConfig",
    "Denoiser",
    "build_denoiser",
    "timestep_embedding",
    "DiffusionTrainer",
    "checkpoint_path",
    "ClassifierConfig",
    "ConvStage",
    "EmotionClassifier",
    "TrainRunRecord",
    "build_classifier",
    "layer_shapes",
    "train_classifier",
    "evaluate",
    "evaluate_loss",
    "predict_logits",
    "save_classifier",
    "load_classifier",
]
