from .autodiff import (
    NumericalError,
    ShapeError,
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    clamp_min,
    concat,
    custom_op,
    div,
    exp,
    get_tape,
    getitem,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    reshape,
    set_default_dtype,
    sigmoid,
    softmax,
    stack,
    sub,
    sum_,
    tanh,
    transpose,
    unbroadcast,
)
from .gradcheck import GradcheckReport, NonDeterministicClosure, gradcheck
from .optim import adagrad_step, clip_by_global_norm, global_norm
from .params import ParamStore

__all__ = [
    "GradcheckReport",
    "NonDeterministicClosure",
    "NumericalError",
    "ParamStore",
    "ShapeError",
    "Tape",
    "Tensor",
    "adagrad_step",
    "add",
    "as_tensor",
    "backward",
    "clamp_min",
    "clip_by_global_norm",
    "concat",
    "custom_op",
    "div",
    "exp",
    "get_tape",
    "getitem",
    "global_norm",
    "gradcheck",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "reshape",
    "set_default_dtype",
    "sigmoid",
    "softmax",
    "stack",
    "sub",
    "sum_",
    "tanh",
    "transpose",
    "unbroadcast",
]
