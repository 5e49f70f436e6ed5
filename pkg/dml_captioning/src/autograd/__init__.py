"""Reverse-mode autograd over dense float64 tensors"""

from . import functional
from .tensor import Function, Graph, Tensor, as_tensor, is_grad_enabled, no_grad, parameter

__all__ = [
    "Function",
    "Graph",
    "Tensor",
    "as_tensor",
    "functional",
    "is_grad_enabled",
    "no_grad",
    "parameter",
]
