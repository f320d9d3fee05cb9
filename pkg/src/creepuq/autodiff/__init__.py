from .mlp import MlpArchitecture, dropout_masks, forward, init_params
from .optim import adagrad_step, adam_step, make_optimizer, rmsprop_step, sgd_step
from .tensor import Tensor, as_tensor, concatenate, grad, relu, value_and_grad

__all__ = [
    "MlpArchitecture",
    "Tensor",
    "adagrad_step",
    "adam_step",
    "as_tensor",
    "concatenate",
    "dropout_masks",
    "forward",
    "grad",
    "init_params",
    "make_optimizer",
    "relu",
    "rmsprop_step",
    "sgd_step",
    "value_and_grad",
]
