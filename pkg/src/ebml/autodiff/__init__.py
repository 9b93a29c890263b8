"""Tensors, a dynamic tape and reverse-mode differentiation."""

from . import ops
from .params import ParamEntry, ParamStore
from .program import backward, finite_diff_check, forward, value_and_grad
from .rng import RngStream, as_rng, derive_seed
from .tape import ContractError, Tape, Var
from .tensor import NonFiniteError, ShapeError, Tensor

__all__ = [
    "ops", "ParamEntry", "ParamStore", "backward", "finite_diff_check", "forward",
    "value_and_grad", "RngStream", "as_rng", "derive_seed", "ContractError", "Tape", "Var",
    "NonFiniteError", "ShapeError", "Tensor",
]
