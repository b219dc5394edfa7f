"""Safe arithmetic expressions for curvature profiles and conformal factors.

Expressions are parsed with :mod:`ast` and walked node by node into a sympy
tree, so only the supported grammar ever reaches evaluation:
numbers, the declared variables, ``+ - * / ^ **``, parentheses, the functions
in :data:`FUNCTIONS` and the constants ``pi`` and ``e``.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import sympy as sp

from jacobi_anosov.errors import ExpressionParseError

FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "cosh": sp.cosh,
    "sinh": sp.sinh,
    "tanh": sp.tanh,
    "abs": sp.Abs,
}

CONSTANTS = {"pi": sp.pi, "e": sp.E}

_BINARY = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}

_UNARY = {
    ast.USub: lambda a: -a,
    ast.UAdd: lambda a: a,
}


@dataclass(frozen=True)
class Expression:
    """A parsed expression in a fixed tuple of variables."""

    source: str
    variables: tuple[str, ...]
    tree: sp.Expr
    _fn: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = [sp.Symbol(v) for v in self.variables]
        object.__setattr__(self, "_fn", sp.lambdify(symbols, self.tree, modules="numpy"))

    @property
    def is_constant(self) -> bool:
        return not self.tree.free_symbols

    def __call__(self, *args):
        if len(args) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} arguments, got {len(args)}")
        arrays = [np.asarray(a, dtype=float) for a in args]
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        with np.errstate(all="ignore"):
            out = np.asarray(self._fn(*arrays), dtype=float)
        out = np.broadcast_to(out, shape)
        if out.shape == ():
            return float(out)
        return np.array(out)

    def diff(self, variable: str) -> "Expression":
        if variable not in self.variables:
            raise ValueError(f"unknown variable {variable!r}")
        return Expression(
            source=f"d/d{variable}({self.source})",
            variables=self.variables,
            tree=sp.diff(self.tree, sp.Symbol(variable)),
        )

    def with_tree(self, tree: sp.Expr, source: str) -> "Expression":
        return Expression(source=source, variables=self.variables, tree=tree)


def parse_expression(source: str, variables: Sequence[str] = ("s",)) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``variables``."""
    if not isinstance(source, str) or not source.strip():
        raise ExpressionParseError("empty expression", source=str(source), position=1)

    variables = tuple(variables)
    clash = set(variables) & (set(FUNCTIONS) | set(CONSTANTS))
    if clash:
        raise ValueError(f"variable names clash with reserved names: {sorted(clash)}")

    # ``^`` is power here, not xor; keep track of the shift for error positions
    translated, inserted = [], []
    for ch in source:
        if ch == "^":
            inserted.append(len(translated))
            translated.extend("**")
        else:
            translated.append(ch)
    text = "".join(translated)

    def original_position(offset: int) -> int:
        # offset is 1-based in the translated text
        return offset - sum(1 for i in inserted if i < offset - 1)

    try:
        parsed = ast.parse(text, mode="eval")
    except SyntaxError as e:
        offset = e.offset if e.offset is not None else len(text) + 1
        raise ExpressionParseError(e.msg, source=source, position=original_position(offset)) from None

    symbols = {v: sp.Symbol(v) for v in variables}

    def fail(node, message):
        raise ExpressionParseError(message, source=source, position=original_position(node.col_offset + 1))

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                fail(node, f"unsupported literal {node.value!r}")
            return sp.Integer(node.value) if isinstance(node.value, int) else sp.Float(node.value)
        if isinstance(node, ast.Name):
            if node.id in symbols:
                return symbols[node.id]
            if node.id in CONSTANTS:
                return CONSTANTS[node.id]
            fail(node, f"unknown name {node.id!r}")
        if isinstance(node, ast.BinOp):
            op = _BINARY.get(type(node.op))
            if op is None:
                fail(node, f"unsupported operator {type(node.op).__name__}")
            return op(walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp):
            op = _UNARY.get(type(node.op))
            if op is None:
                fail(node, f"unsupported operator {type(node.op).__name__}")
            return op(walk(node.operand))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                fail(node, "unsupported function")
            if node.keywords or len(node.args) != 1:
                fail(node, f"{node.func.id} takes exactly one argument")
            return FUNCTIONS[node.func.id](walk(node.args[0]))
        fail(node, f"unsupported syntax {type(node).__name__}")

    tree = walk(parsed)
    return Expression(source=source, variables=variables, tree=sp.sympify(tree))
