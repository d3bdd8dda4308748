"""Self-contained tensor engine: reverse-mode tape over numpy storage."""

from .tensor import (
    Parameter,
    Tensor,
    absolute,
    add,
    as_tensor,
    atan2,
    backward,
    clamp_magnitude,
    clip,
    concat,
    constant,
    cos,
    div,
    exp,
    log,
    matmul,
    mul,
    narrow,
    neg,
    no_grad,
    percentile,
    pow_const,
    relu,
    reshape,
    rmean,
    rmin,
    rsum,
    sigmoid,
    sin,
    softmax,
    sqrt,
    sub,
    tanh,
    transpose,
)
from .spatial import avg_pool2, bilinear_resize, conv2d
from .fourier import fft2, ifft2
from .scan import linear_scan
from .random import Rng, rng_randn, rng_uniform

__all__ = [
    "Parameter",
    "Tensor",
    "Rng",
    "absolute",
    "add",
    "as_tensor",
    "atan2",
    "avg_pool2",
    "backward",
    "bilinear_resize",
    "clamp_magnitude",
    "clip",
    "concat",
    "constant",
    "conv2d",
    "cos",
    "div",
    "exp",
    "fft2",
    "ifft2",
    "linear_scan",
    "log",
    "matmul",
    "mul",
    "narrow",
    "neg",
    "no_grad",
    "percentile",
    "pow_const",
    "relu",
    "reshape",
    "rmean",
    "rmin",
    "rng_randn",
    "rng_uniform",
    "rsum",
    "sigmoid",
    "sin",
    "softmax",
    "sqrt",
    "sub",
    "tanh",
    "transpose",
]
