"""Reverse-mode tensor engine: tape, ops, gradient checking, SGD, checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, restore_params, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .nn_ops import (
    Rect,
    adaptive_avg_pool,
    channel_concat,
    channel_slice,
    conv2d,
    conv_out_size,
    global_avg_pool,
    linear,
    roi_avg_pool,
    softmax,
    softmax_cross_entropy,
)
from .optim import MissingGradientError, sgd_step, step_decay_lr
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    TensorError,
    add,
    backward,
    collect_gradless,
    div,
    gather_rows,
    matmul,
    mul,
    neg,
    parameter,
    relu,
    reshape,
    select_stack,
    sqrt,
    sub,
    tensor_sum,
    transpose,
)

__all__ = [
    "CheckpointError",
    "GradCheckReport",
    "MissingGradientError",
    "NonFiniteError",
    "Rect",
    "ShapeError",
    "Tape",
    "Tensor",
    "TensorError",
    "adaptive_avg_pool",
    "add",
    "backward",
    "channel_concat",
    "channel_slice",
    "collect_gradless",
    "conv2d",
    "conv_out_size",
    "div",
    "gather_rows",
    "global_avg_pool",
    "grad_check",
    "linear",
    "load_checkpoint",
    "matmul",
    "mul",
    "neg",
    "parameter",
    "relu",
    "reshape",
    "restore_params",
    "roi_avg_pool",
    "save_checkpoint",
    "select_stack",
    "sgd_step",
    "softmax",
    "softmax_cross_entropy",
    "sqrt",
    "step_decay_lr",
    "sub",
    "tensor_sum",
    "transpose",
]
