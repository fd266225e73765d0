"""Trainable voting network: forward, exact backprop, Adam, weight files."""
from .model import (ModelConfig, ModelParams, PointPrediction, backward,
                    conv_layer_plan, detection_loss, forward, init_params)
from .optim import AdamState, adam_step, init_adam, lr_schedule
from .training import TrainConfig, TrainState, TrainingDivergedError, train
from .weights_io import FORMAT_VERSION, MAGIC, WeightsFormatError, load_params, save_params

__all__ = [
    "ModelConfig", "ModelParams", "PointPrediction", "backward", "conv_layer_plan",
    "detection_loss", "forward", "init_params", "AdamState", "adam_step", "init_adam",
    "lr_schedule", "TrainConfig", "TrainState", "TrainingDivergedError", "train",
    "FORMAT_VERSION", "MAGIC", "WeightsFormatError", "load_params", "save_params",
]
