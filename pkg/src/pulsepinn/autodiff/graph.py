"""Scalar-node computation tape with reverse-mode adjoints and forward tangents.

Every node holds one real number. Nodes are appended in evaluation order, so
the append index is a valid topological order and a single reverse sweep over
the list computes all adjoints.

>>> g = DiffGraph()
>>> x, y = g.input(2.0), g.input(3.0)
>>> z = g.record(OpKind.MUL, x, y)
>>> g.backward(z).tolist()
[3.0, 2.0]
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteValue


class OpKind(enum.Enum):
    CONSTANT = "constant"
    INPUT = "input"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    NEG = "neg"
    SIN = "sin"
    COS = "cos"
    EXP = "exp"
    SQRT = "sqrt"
    SQUARE = "square"
    ABS = "abs"


_ARITY = {
    OpKind.CONSTANT: 0,
    OpKind.INPUT: 0,
    OpKind.ADD: 2,
    OpKind.SUB: 2,
    OpKind.MUL: 2,
    OpKind.DIV: 2,
    OpKind.NEG: 1,
    OpKind.SIN: 1,
    OpKind.COS: 1,
    OpKind.EXP: 1,
    OpKind.SQRT: 1,
    OpKind.SQUARE: 1,
    OpKind.ABS: 1,
}


def _evaluate(op: OpKind, args: list[float]) -> float:
    with np.errstate(all="ignore"):
        if op is OpKind.ADD:
            return args[0] + args[1]
        if op is OpKind.SUB:
            return args[0] - args[1]
        if op is OpKind.MUL:
            return args[0] * args[1]
        if op is OpKind.DIV:
            return args[0] / args[1] if args[1] != 0.0 else math.nan
        if op is OpKind.NEG:
            return -args[0]
        if op is OpKind.SIN:
            return math.sin(args[0])
        if op is OpKind.COS:
            return math.cos(args[0])
        if op is OpKind.EXP:
            try:
                return math.exp(args[0])
            except OverflowError:
                return math.inf
        if op is OpKind.SQRT:
            return math.sqrt(args[0]) if args[0] >= 0.0 else math.nan
        if op is OpKind.SQUARE:
            return args[0] * args[0]
        if op is OpKind.ABS:
            return abs(args[0])
    raise ValueError(f"cannot evaluate {op}")


def _partials(op: OpKind, args: list[float], value: float) -> tuple[float, ...]:
    """Local derivatives of ``op`` with respect to each of its inputs."""
    if op is OpKind.ADD:
        return (1.0, 1.0)
    if op is OpKind.SUB:
        return (1.0, -1.0)
    if op is OpKind.MUL:
        return (args[1], args[0])
    if op is OpKind.DIV:
        return (1.0 / args[1], -value / args[1])
    if op is OpKind.NEG:
        return (-1.0,)
    if op is OpKind.SIN:
        return (math.cos(args[0]),)
    if op is OpKind.COS:
        return (-math.sin(args[0]),)
    if op is OpKind.EXP:
        return (value,)
    if op is OpKind.SQRT:
        return (0.5 / value if value > 0.0 else math.inf,)
    if op is OpKind.SQUARE:
        return (2.0 * args[0],)
    if op is OpKind.ABS:
        return (math.copysign(1.0, args[0]) if args[0] != 0.0 else 0.0,)
    return ()


@dataclass
class Node:
    op_kind: OpKind
    inputs: tuple[int, ...]
    value: float
    adjoint: float = 0.0
    tangent: float = 0.0


@dataclass(frozen=True)
class TangentSeed:
    seeded_input: int
    seed_value: float = 1.0


@dataclass
class DiffGraph:
    nodes: list[Node] = field(default_factory=list)
    inputs: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.nodes)

    def constant(self, value: float) -> int:
        return self._append(Node(OpKind.CONSTANT, (), float(value)))

    def input(self, value: float) -> int:
        index = self._append(Node(OpKind.INPUT, (), float(value)))
        self.inputs.append(index)
        return index

    def record(self, op_kind: OpKind, *inputs: int) -> int:
        if op_kind in (OpKind.CONSTANT, OpKind.INPUT):
            raise ValueError("use constant() or input() for leaf nodes")
        if len(inputs) != _ARITY[op_kind]:
            raise ValueError(f"{op_kind.value} takes {_ARITY[op_kind]} inputs, got {len(inputs)}")
        for i in inputs:
            if not 0 <= i < len(self.nodes):
                raise IndexError(f"node {i} does not exist")
        value = _evaluate(op_kind, [self.nodes[i].value for i in inputs])
        return self._append(Node(op_kind, tuple(inputs), value))

    def _append(self, node: Node) -> int:
        if not math.isfinite(node.value):
            raise NonFiniteValue(f"{node.op_kind.value} produced {node.value}")
        self.nodes.append(node)
        return len(self.nodes) - 1

    def backward(self, root: int) -> np.ndarray:
        """Reverse sweep from ``root``; returns adjoints aligned with ``self.inputs``."""
        for node in self.nodes:
            node.adjoint = 0.0
        self.nodes[root].adjoint = 1.0
        for i in range(root, -1, -1):
            node = self.nodes[i]
            if node.adjoint == 0.0 or not node.inputs:
                continue
            args = [self.nodes[j].value for j in node.inputs]
            for j, d in zip(node.inputs, _partials(node.op_kind, args, node.value)):
                self.nodes[j].adjoint += node.adjoint * d
        adjoints = np.array([self.nodes[i].adjoint for i in self.inputs])
        if not np.all(np.isfinite(adjoints)):
            raise NonFiniteValue("non-finite adjoint")
        return adjoints

    def forward_tangent(self, seed: TangentSeed) -> np.ndarray:
        """Dual-number sweep; returns d(node)/d(seeded input) for every node."""
        if self.nodes[seed.seeded_input].op_kind is not OpKind.INPUT:
            raise ValueError("tangent seed must be an input node")
        for i, node in enumerate(self.nodes):
            if not node.inputs:
                node.tangent = seed.seed_value if i == seed.seeded_input else 0.0
                continue
            args = [self.nodes[j].value for j in node.inputs]
            partials = _partials(node.op_kind, args, node.value)
            node.tangent = sum(d * self.nodes[j].tangent for j, d in zip(node.inputs, partials)
                               if self.nodes[j].tangent != 0.0)
        return np.array([node.tangent for node in self.nodes])

    def materialize_tangent(self, seed_input: int, nodes: list[int] | None = None) -> dict[int, int]:
        """Record d(node)/d(seed_input) as new graph nodes.

        The returned map sends an original node index to the index of a node
        holding its tangent. Because the tangents are ordinary primitives, a
        later ``backward`` through them yields mixed second derivatives.
        Nodes whose tangent is structurally zero are absent from the map.
        """
        if self.nodes[seed_input].op_kind is not OpKind.INPUT:
            raise ValueError("tangent seed must be an input node")
        last = max(nodes) if nodes else len(self.nodes) - 1
        tan: dict[int, int] = {seed_input: self.constant(1.0)}
        rec = self.record
        for i in range(last + 1):
            node = self.nodes[i]
            if not node.inputs:
                continue
            ins = node.inputs
            dts = [tan.get(j) for j in ins]
            if all(d is None for d in dts):
                continue
            op = node.op_kind
            if op in (OpKind.ADD, OpKind.SUB):
                a, b = dts
                if b is None:
                    tan[i] = a
                elif a is None:
                    tan[i] = b if op is OpKind.ADD else rec(OpKind.NEG, b)
                else:
                    tan[i] = rec(op, a, b)
            elif op is OpKind.MUL:
                terms = [rec(OpKind.MUL, dts[0], ins[1])] if dts[0] is not None else []
                if dts[1] is not None:
                    terms.append(rec(OpKind.MUL, ins[0], dts[1]))
                tan[i] = terms[0] if len(terms) == 1 else rec(OpKind.ADD, *terms)
            elif op is OpKind.DIV:
                # (a/b)' = (a' - (a/b) b') / b
                a_dot, b_dot = dts
                num = a_dot
                if b_dot is not None:
                    corr = rec(OpKind.MUL, i, b_dot)
                    num = rec(OpKind.SUB, a_dot, corr) if a_dot is not None else rec(OpKind.NEG, corr)
                tan[i] = rec(OpKind.DIV, num, ins[1])
            elif op is OpKind.NEG:
                tan[i] = rec(OpKind.NEG, dts[0])
            elif op is OpKind.SIN:
                tan[i] = rec(OpKind.MUL, rec(OpKind.COS, ins[0]), dts[0])
            elif op is OpKind.COS:
                tan[i] = rec(OpKind.NEG, rec(OpKind.MUL, rec(OpKind.SIN, ins[0]), dts[0]))
            elif op is OpKind.EXP:
                tan[i] = rec(OpKind.MUL, i, dts[0])
            elif op is OpKind.SQRT:
                tan[i] = rec(OpKind.DIV, dts[0], rec(OpKind.ADD, i, i))
            elif op is OpKind.SQUARE:
                tan[i] = rec(OpKind.MUL, rec(OpKind.ADD, ins[0], ins[0]), dts[0])
            elif op is OpKind.ABS:
                sign = self.constant(math.copysign(1.0, self.nodes[ins[0]].value)
                                     if self.nodes[ins[0]].value != 0.0 else 0.0)
                tan[i] = rec(OpKind.MUL, sign, dts[0])
        return tan


def record_primitive(graph: DiffGraph, op_kind: OpKind, inputs) -> int:
    return graph.record(op_kind, *inputs)


def backward(graph: DiffGraph, root: int) -> np.ndarray:
    return graph.backward(root)


def forward_tangent(graph: DiffGraph, seed: TangentSeed) -> np.ndarray:
    return graph.forward_tangent(seed)


class Var:
    """Operator-overloading handle on a graph node.

    Numpy object arrays of ``Var`` support ``@``, ``sum`` and the ``np.sin``
    family (numpy dispatches object ufuncs to same-named methods), which lets
    the complex linear algebra run unchanged on the scalar tape.
    """

    __slots__ = ("graph", "index")

    def __init__(self, graph: DiffGraph, index: int):
        self.graph = graph
        self.index = index

    @classmethod
    def input(cls, graph: DiffGraph, value: float) -> "Var":
        return cls(graph, graph.input(value))

    @property
    def value(self) -> float:
        return self.graph.nodes[self.index].value

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Var({self.value!r}, node={self.index})"

    def _lift(self, other) -> int:
        if isinstance(other, Var):
            if other.graph is not self.graph:
                raise ValueError("cannot mix nodes from different graphs")
            return other.index
        return self.graph.constant(float(other))

    def _binary(self, op, other, reflected=False):
        a, b = self.index, self._lift(other)
        if reflected:
            a, b = b, a
        return Var(self.graph, self.graph.record(op, a, b))

    def _unary(self, op):
        return Var(self.graph, self.graph.record(op, self.index))

    def __add__(self, other):
        return self._binary(OpKind.ADD, other)

    def __radd__(self, other):
        return self._binary(OpKind.ADD, other, True)

    def __sub__(self, other):
        return self._binary(OpKind.SUB, other)

    def __rsub__(self, other):
        return self._binary(OpKind.SUB, other, True)

    def __mul__(self, other):
        return self._binary(OpKind.MUL, other)

    def __rmul__(self, other):
        return self._binary(OpKind.MUL, other, True)

    def __truediv__(self, other):
        return self._binary(OpKind.DIV, other)

    def __rtruediv__(self, other):
        return self._binary(OpKind.DIV, other, True)

    def __neg__(self):
        return self._unary(OpKind.NEG)

    def __abs__(self):
        return self._unary(OpKind.ABS)

    def sin(self):
        return self._unary(OpKind.SIN)

    def cos(self):
        return self._unary(OpKind.COS)

    def exp(self):
        return self._unary(OpKind.EXP)

    def sqrt(self):
        return self._unary(OpKind.SQRT)

    def square(self):
        return self._unary(OpKind.SQUARE)
