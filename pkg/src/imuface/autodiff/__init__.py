from . import ops
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import gradcheck, numerical_grad
from .ops import (
    add,
    concat,
    gelu,
    l1_loss,
    layer_norm,
    linear,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    slice_,
    softmax,
    sub,
    sum_,
    transpose,
)
from .optim import AdamState, adam_step
from .tensor import Tape, Tensor, as_tensor, backward, get_default_dtype, set_default_dtype

__all__ = [
    "AdamState",
    "CheckpointError",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "concat",
    "gelu",
    "gradcheck",
    "get_default_dtype",
    "l1_loss",
    "layer_norm",
    "linear",
    "load_checkpoint",
    "matmul",
    "mean",
    "mul",
    "numerical_grad",
    "ops",
    "relu",
    "reshape",
    "save_checkpoint",
    "set_default_dtype",
    "slice_",
    "softmax",
    "sub",
    "sum_",
    "transpose",
]
