"""Minimal numeric core: tensors with reverse-mode gradients, Adam, RNG, checks."""
from .gradcheck import CoordCheck, GradCheckReport, grad_check
from .optim import ParamStore, adam_step, clip_grad_norm, grad_norm
from .rng import CHECK, DROPOUT, INIT, SHUFFLE, SYNTH, make_rng
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    add_all,
    concat,
    dropout,
    embedding,
    lstm,
    matmul,
    scale,
    sigmoid,
    slice_cols,
    slice_rows,
    softmax_rows,
    tanh,
    weighted_nll,
)

__all__ = [
    "CoordCheck", "GradCheckReport", "grad_check", "ParamStore", "adam_step", "clip_grad_norm",
    "grad_norm", "make_rng", "CHECK", "DROPOUT", "INIT", "SHUFFLE", "SYNTH", "NonFiniteError", "ShapeError", "Tensor", "add", "add_all", "concat",
    "dropout", "embedding", "lstm", "matmul", "scale", "sigmoid", "slice_cols", "slice_rows",
    "softmax_rows", "tanh", "weighted_nll",
]
