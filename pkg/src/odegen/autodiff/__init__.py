from .tensor import (
    Tensor,
    abs_,
    add,
    broadcast_to,
    concat,
    div,
    enable_grad,
    exp,
    gather_cols,
    grad,
    grad_enabled,
    gradients,
    input_gradient,
    leaky_relu,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    pad,
    relu,
    reshape,
    scatter_cols,
    slice_,
    sqrt,
    sub,
    sum_,
    tanh,
    transpose,
    unslice,
)
from .conv import avg_pool2d, conv2d, conv3d, upsample_nearest_2x
from .ops import OP_KINDS, batch_standardize, forward_op, l1_norm, sigmoid, square
from .optim import Adam, ParameterStore
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, numeric_gradient

__all__ = [
    "Adam",
    "OP_KINDS",
    "ParameterStore",
    "Tensor",
    "abs_",
    "add",
    "avg_pool2d",
    "batch_standardize",
    "broadcast_to",
    "check_gradients",
    "concat",
    "conv2d",
    "conv3d",
    "div",
    "enable_grad",
    "exp",
    "forward_op",
    "gather_cols",
    "grad",
    "grad_enabled",
    "gradients",
    "input_gradient",
    "l1_norm",
    "leaky_relu",
    "load_checkpoint",
    "matmul",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "numeric_gradient",
    "pad",
    "relu",
    "reshape",
    "save_checkpoint",
    "scatter_cols",
    "sigmoid",
    "slice_",
    "sqrt",
    "square",
    "sub",
    "sum_",
    "tanh",
    "transpose",
    "unslice",
    "upsample_nearest_2x",
]
