"""Tiny arithmetic-expression evaluator for config-supplied functions.

Supports +, -, *, /, ^ (power), exp/sin/cos/sqrt/abs, the constant pi,
and piecewise definitions via where(condition, a, b) with comparison
operators.  Evaluation is vectorized over numpy arrays bound to the
variable names (x, and y in 2-D).
"""

from __future__ import annotations

import ast
import operator

import numpy as np

from .errors import ConfigError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_CMPOPS = {
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
}
_FUNCS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "where": np.where,
}
_CONSTS = {"pi": np.pi}


def evaluate(expression: str, **variables):
    """Evaluate an expression string with the given variable bindings."""
    source = expression.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {expression!r}: {exc}") from exc

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return node.value
            raise ConfigError(f"non-numeric constant in {expression!r}")
        if isinstance(node, ast.Name):
            if node.id in variables:
                return variables[node.id]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ConfigError(f"unknown name {node.id!r} in {expression!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Compare):
            if len(node.ops) != 1 or type(node.ops[0]) not in _CMPOPS:
                raise ConfigError(f"unsupported comparison in {expression!r}")
            return _CMPOPS[type(node.ops[0])](walk(node.left), walk(node.comparators[0]))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ConfigError(f"unsupported function call in {expression!r}")
            return _FUNCS[node.func.id](*[walk(a) for a in node.args])
        raise ConfigError(f"unsupported syntax in expression {expression!r}")

    result = walk(tree)
    if not np.all(np.isfinite(result)):
        raise ConfigError(f"expression {expression!r} evaluates to non-finite values")
    return result
