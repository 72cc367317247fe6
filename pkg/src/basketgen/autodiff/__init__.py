from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, numeric_grad, relative_error
from .nn import MLP, Linear, UnsupportedLayerError, glorot_uniform, gradient_penalty, input_gradient
from .optim import Adam, clip_grad_norm, clip_weights
from .tensor import (
    NonFiniteError,
    Parameter,
    ShapeError,
    Tensor,
    add,
    backward,
    bce_with_logits,
    concat,
    cross_entropy,
    forward,
    getitem,
    lstm_sequence,
    matmul,
    mean,
    mse,
    mul,
    norm,
    relu,
    sigmoid,
    square,
    step,
    sub,
    tanh,
    transpose,
)
from .tensor import sum as tsum

__all__ = [
    "Adam", "CheckpointError", "Linear", "MLP", "NonFiniteError", "Parameter", "ShapeError",
    "Tensor", "UnsupportedLayerError", "add", "backward", "bce_with_logits", "check_gradients",
    "clip_grad_norm", "clip_weights", "concat", "cross_entropy", "forward", "glorot_uniform",
    "gradient_penalty", "input_gradient", "load_checkpoint", "lstm_sequence", "matmul", "mean",
    "mse", "mul", "getitem", "norm", "numeric_grad", "relative_error", "relu", "save_checkpoint", "sigmoid",
    "square", "step", "sub", "tanh", "transpose", "tsum",
]
