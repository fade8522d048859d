"""Parsing of exact arithmetic expressions used in graph and operator specs.

Lengths such as ``"cbrt(2)"`` and profiles such as ``"x*(1-x)"`` are parsed
with a whitelist-checked AST and then handed to sympy, so that constants are
evaluated to more digits than ``np.longdouble`` can hold before rounding.
"""
from __future__ import annotations

import ast

import numpy as np
import sympy

LD = np.longdouble
X = sympy.Symbol("x", real=True)

_FUNCS = {
    "cbrt": lambda a: sympy.real_root(a, 3),
    "sqrt": sympy.sqrt,
    "cos": sympy.cos,
    "sin": sympy.sin,
    "exp": sympy.exp,
    "log": sympy.log,
}
_CONSTS = {"pi": sympy.pi, "e": sympy.E, "inf": sympy.oo, "x": X}
_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub,
    ast.UAdd,
)


class ExpressionError(ValueError):
    """Raised when an expression string is malformed or uses unknown names."""


def _check(node: ast.AST, allow_x: bool) -> None:
    for sub in ast.walk(node):
        if not isinstance(sub, _ALLOWED):
            raise ExpressionError(f"unsupported syntax: {type(sub).__name__}")
        if isinstance(sub, ast.Name):
            known = sub.id in _FUNCS or sub.id in _CONSTS
            if not known or (sub.id == "x" and not allow_x):
                raise ExpressionError(f"unknown name {sub.id!r}")
        if isinstance(sub, ast.Call):
            if not isinstance(sub.func, ast.Name) or sub.func.id not in _FUNCS:
                raise ExpressionError("only cbrt, sqrt, cos, sin, exp, log calls are allowed")
        if isinstance(sub, ast.Constant) and not isinstance(sub.value, (int, float)):
            raise ExpressionError(f"unsupported literal {sub.value!r}")


def _to_sympy(node: ast.AST):
    if isinstance(node, ast.Expression):
        return _to_sympy(node.body)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, int):
            return sympy.Integer(node.value)
        return sympy.Rational(repr(node.value)) if np.isfinite(node.value) else sympy.oo
    if isinstance(node, ast.Name):
        return _CONSTS[node.id]
    if isinstance(node, ast.UnaryOp):
        val = _to_sympy(node.operand)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](*[_to_sympy(a) for a in node.args])
    left, right = _to_sympy(node.left), _to_sympy(node.right)
    op = type(node.op)
    if op is ast.Add:
        return left + right
    if op is ast.Sub:
        return left - right
    if op is ast.Mult:
        return left * right
    if op is ast.Div:
        return left / right
    return left ** right


def parse_sympy(text: str | float | int, allow_x: bool = False):
    """Parse ``text`` into a sympy expression.

    Parameters
    ----------
    text : str or number
        Arithmetic expression. Names allowed: ``pi``, ``e``, ``inf`` and,
        when ``allow_x`` is set, the coordinate ``x``.
    allow_x : bool
        Whether the free coordinate ``x`` may appear.
    """
    if isinstance(text, (int, np.integer)):
        return sympy.Integer(int(text))
    if isinstance(text, (float, np.floating)):
        return sympy.Rational(repr(float(text))) if np.isfinite(text) else sympy.oo
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _check(tree, allow_x)
    return _to_sympy(tree)


def sympy_to_ld(value) -> np.longdouble:
    """Round a closed sympy number to ``np.longdouble``."""
    if value in (sympy.oo, sympy.zoo):
        return LD(np.inf)
    if value == -sympy.oo:
        return LD(-np.inf)
    num = sympy.N(value, 40)
    if not num.is_real:
        raise ExpressionError(f"expression {value} is not real")
    return LD(str(num))


def parse_real(text: str | float | int) -> np.longdouble:
    """Evaluate a constant expression such as ``"cbrt(2)"`` in long double."""
    return sympy_to_ld(parse_sympy(text))
