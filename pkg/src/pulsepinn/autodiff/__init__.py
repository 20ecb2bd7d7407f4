from .graph import DiffGraph, Node, OpKind, TangentSeed, Var, backward, forward_tangent, record_primitive
from .tensor import Tensor, concatenate, stack, value_of

__all__ = [
    "DiffGraph", "Node", "OpKind", "TangentSeed", "Var", "backward", "forward_tangent",
    "record_primitive", "Tensor", "concatenate", "stack", "value_of",
]
