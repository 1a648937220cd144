"""Dense rank <= 2 tensors, a gradient tape, and the ops built on them."""
from . import ops
from .lstm import lstm_cell_step
from .ops import activation, cross_entropy, linear_apply
from .optim import sgd_momentum_step
from .params import LinearMap, ParameterStore
from .tensor import GradientTape, Tensor, as_tensor, backward, default_dtype, precision

__all__ = [
    "GradientTape", "LinearMap", "ParameterStore", "Tensor", "activation", "as_tensor",
    "backward", "cross_entropy", "default_dtype", "linear_apply", "lstm_cell_step", "ops",
    "precision", "sgd_momentum_step",
]
