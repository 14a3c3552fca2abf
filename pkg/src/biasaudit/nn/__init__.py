from .model import (CnnModel, ConvSpec, NetConfig, argmax_label, forward, init_model,
                    loss_and_gradients, normalize, param_shapes, predict)
from .serialize import load_weights, save_weights
from .train import TrainConfig, train

__all__ = [
    "CnnModel", "ConvSpec", "NetConfig", "TrainConfig", "argmax_label", "forward",
    "init_model", "load_weights", "loss_and_gradients", "normalize", "param_shapes",
    "predict", "save_weights", "train",
]
