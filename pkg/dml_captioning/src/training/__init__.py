"""DML Training Package"""

from .checkpoint import Checkpoint, load_checkpoint, restore_model, save_checkpoint
from .optimizer import AdamW, OptimizerConfig, clip_gradients, lr_schedule, optimizer_update
from .trainer import StepMetrics, TrainConfig, TrainState, TrainingResult, run_training, train_step

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "restore_model",
    "save_checkpoint",
    "AdamW",
    "OptimizerConfig",
    "clip_gradients",
    "lr_schedule",
    "optimizer_update",
    "StepMetrics",
    "TrainConfig",
    "TrainState",
    "TrainingResult",
    "run_training",
    "train_step",
]
