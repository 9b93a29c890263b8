"""Differentiable building blocks and input preprocessing."""

from .attention import AttentionBlock, attention
from .base import Block, affine
from .conv import Conv1dBlock, conv1d
from .gru import GruBlock, gru_run, gru_step
from .linear import IdentityBlock, LinearBlock, Sequential, mlp
from .norm import (DegenerateBatchError, NormBlock, SingularityError, apply_whitening,
                   batch_norm, center_and_whiten, layer_norm)
from .position import (rope_angles, rope_matrix, rope_rotate, rope_rows, sinusoidal_pe,
                       sinusoidal_table)

__all__ = [
    "AttentionBlock", "attention", "Block", "affine", "Conv1dBlock", "conv1d", "GruBlock",
    "gru_run", "gru_step", "IdentityBlock", "LinearBlock", "Sequential", "mlp", "DegenerateBatchError",
    "NormBlock", "SingularityError", "apply_whitening", "batch_norm", "center_and_whiten",
    "layer_norm", "rope_angles", "rope_matrix", "rope_rotate", "rope_rows", "sinusoidal_pe",
    "sinusoidal_table",
]
