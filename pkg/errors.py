"""
Error types raised across the pipeline
"""

from typing import Optional, Sequence


class PipelineError(Exception):
    """
    Base class for every failure the CLI reports with exit code 1.
    """


class DimensionError(PipelineError, ValueError):
    """
    Operand shapes do not fit together.
    """

    def __init__(self, message: str, *shapes: Sequence[int]):
        if shapes:
            message = f"{message} (shapes: {', '.join(str(tuple(s)) for s in shapes)})"
        super().__init__(message)
        self.shapes = [tuple(s) for s in shapes]


class ValidationError(PipelineError, ValueError):
    pass


class CapacityError(PipelineError, ValueError):
    pass


class FormatError(PipelineError, ValueError):
    pass


class ModelBuildError(PipelineError, ValueError):
    def __init__(self, layer: str, message: str):
        super().__init__(f"layer '{layer}': {message}")
        self.layer = layer


class OptimizerStateError(PipelineError, RuntimeError):
    pass


class NonFiniteError(PipelineError, FloatingPointError):
    pass


class TrainingDivergenceError(PipelineError, RuntimeError):
    """
    Loss became NaN or infinite during training.
    """

    def __init__(
        self,
        last_loss: float,
        step: int,
        epoch: Optional[int] = None,
    ):
        where = f"step {step}" if epoch is None else f"epoch {epoch}, step {step}"
        super().__init__(f"training diverged at {where}: last loss {last_loss!r}")
        self.last_loss = last_loss
        self.step = step
        self.epoch = epoch


class SamplingDivergenceError(PipelineError, RuntimeError):
    def __init__(self, t: int):
        super().__init__(f"sampling produced non-finite values at t={t}")
        self.t = t
