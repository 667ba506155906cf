"""Minimal reverse-mode tensor engine used by every model in the package."""
from .batchnorm import RunningStats, batch_norm3d
from .conv import (
    conv2d,
    conv3d,
    conv3d_transposed,
    conv_output_size,
    output_padding_for,
    transposed_output_size,
)
from .gradcheck import GradCheckReport, grad_check, relative_error
from .ops import (
    add,
    concat,
    getitem,
    hadamard,
    leaky_relu,
    mean,
    mse,
    mul,
    pointwise,
    reshape,
    sigmoid,
    square,
    stack,
    sub,
    tanh,
    unstack,
)
from .tensor import (
    NumericalError,
    ShapeError,
    Tensor,
    as_tensor,
    default_dtype,
    frozen,
    get_precision,
    no_grad,
    precision,
    set_precision,
    zero_grad,
)
from .ops import sum as tsum

__all__ = [
    "add",
    "as_tensor",
    "batch_norm3d",
    "concat",
    "conv2d",
    "conv3d",
    "conv3d_transposed",
    "conv_output_size",
    "default_dtype",
    "frozen",
    "get_precision",
    "getitem",
    "grad_check",
    "GradCheckReport",
    "hadamard",
    "leaky_relu",
    "mean",
    "mse",
    "mul",
    "no_grad",
    "NumericalError",
    "output_padding_for",
    "pointwise",
    "precision",
    "relative_error",
    "reshape",
    "RunningStats",
    "set_precision",
    "ShapeError",
    "sigmoid",
    "square",
    "stack",
    "sub",
    "tanh",
    "Tensor",
    "transposed_output_size",
    "tsum",
    "unstack",
    "zero_grad",
]
