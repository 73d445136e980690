"""Minimal reverse-mode autodiff over numpy arrays."""

from . import functional
from .checkpoint import load_checkpoint, load_into, save_checkpoint
from .functional import cross_entropy, layer_norm, matmul, smooth_l1, softmax
from .gradcheck import finite_diff_check
from .nn import EncoderLayer, LayerNorm, Linear, MLP, Module, MultiHeadAttention
from .tensor import GraphReleasedError, Tensor, backward, no_grad, topological_order

__all__ = [
    "Tensor", "backward", "no_grad", "topological_order", "GraphReleasedError",
    "functional", "matmul", "layer_norm", "softmax", "cross_entropy", "smooth_l1",
    "finite_diff_check", "Module", "Linear", "LayerNorm", "MLP", "MultiHeadAttention",
    "EncoderLayer", "save_checkpoint", "load_checkpoint", "load_into",
]
