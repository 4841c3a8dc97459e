from .checkpoint import load_checkpoint, save_checkpoint
from .losses import loss, relative_position_error, relative_rotation_error
from .model import ModelConfig, SlideNet, impulse_features
from .optim import Adam, exp_decay_lr
from .tensor import Tensor, batchnorm, concat, linear, norm, relu, set_maxpool

__all__ = [
    "Adam", "ModelConfig", "SlideNet", "Tensor", "batchnorm", "concat", "exp_decay_lr", "impulse_features",
    "linear", "load_checkpoint", "loss", "norm", "relative_position_error", "relative_rotation_error", "relu",
    "save_checkpoint", "set_maxpool",
]
