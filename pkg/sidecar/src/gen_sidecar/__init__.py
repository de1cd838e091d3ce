"""Model-serving and fine-tuning companion for the generation wire protocol."""

from .model import ModelBundle, load_checkpoint, make_checkpoint
from .serving import ServeConfig, create_app
from .training import TrainConfig, finetune

__all__ = [
    "ModelBundle",
    "load_checkpoint",
    "make_checkpoint",
    "ServeConfig",
    "create_app",
    "TrainConfig",
    "finetune",
]
