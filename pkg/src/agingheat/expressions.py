"""Minimal arithmetic expressions over named variables.

Grammar: numbers, ``+ - * / ^`` (``**`` also accepted), parentheses, the
functions ``exp``, ``sin``, ``cos`` and the constant ``pi``.  Parsing goes
through :mod:`ast` with a node whitelist; nothing is ever handed to ``eval``.
Parsed expressions evaluate on numpy arrays and can be differentiated
symbolically with respect to one of their variables.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = ["Expression", "ExpressionError", "parse_expression"]

_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}
_CONSTS = {"pi": float(np.pi)}


class ExpressionError(ValueError):
    """Raised for expressions outside the supported grammar."""


def _num(value: float) -> ast.Constant:
    return ast.Constant(value=float(value))


def _is_const(node: ast.AST, value: float | None = None) -> bool:
    if not isinstance(node, ast.Constant):
        return False
    return value is None or node.value == value


def _add(a: ast.AST, b: ast.AST) -> ast.AST:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return _num(a.value + b.value)
    return ast.BinOp(left=a, op=ast.Add(), right=b)


def _sub(a: ast.AST, b: ast.AST) -> ast.AST:
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return _num(a.value - b.value)
    if _is_const(a, 0.0):
        return _neg(b)
    return ast.BinOp(left=a, op=ast.Sub(), right=b)


def _mul(a: ast.AST, b: ast.AST) -> ast.AST:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _num(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return _num(a.value * b.value)
    return ast.BinOp(left=a, op=ast.Mult(), right=b)


def _div(a: ast.AST, b: ast.AST) -> ast.AST:
    if _is_const(a, 0.0):
        return _num(0.0)
    if _is_const(b, 1.0):
        return a
    return ast.BinOp(left=a, op=ast.Div(), right=b)


def _pow(a: ast.AST, b: ast.AST) -> ast.AST:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return _num(1.0)
    return ast.BinOp(left=a, op=ast.Pow(), right=b)


def _neg(a: ast.AST) -> ast.AST:
    if _is_const(a):
        return _num(-a.value)
    return ast.UnaryOp(op=ast.USub(), operand=a)


def _call(name: str, arg: ast.AST) -> ast.AST:
    return ast.Call(func=ast.Name(id=name, ctx=ast.Load()), args=[arg], keywords=[])


def _validate(node: ast.AST, variables: frozenset[str], source: str) -> None:
    def fail(msg: str, sub: ast.AST) -> None:
        col = getattr(sub, "col_offset", None)
        where = f" at column {col + 1}" if col is not None else ""
        raise ExpressionError(f"{msg}{where} in {source!r}")

    for sub in ast.walk(node):
        if isinstance(sub, (ast.Expression, ast.Load)):
            continue
        if isinstance(sub, ast.Constant):
            if isinstance(sub.value, bool) or not isinstance(sub.value, (int, float)):
                fail("only numeric literals are allowed", sub)
        elif isinstance(sub, ast.BinOp):
            if not isinstance(sub.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)):
                fail(f"unsupported operator {type(sub.op).__name__}", sub)
        elif isinstance(sub, ast.UnaryOp):
            if not isinstance(sub.op, (ast.USub, ast.UAdd)):
                fail("unsupported unary operator", sub)
        elif isinstance(sub, ast.Call):
            if not (isinstance(sub.func, ast.Name) and sub.func.id in _FUNCS):
                fail("unknown function", sub)
            if len(sub.args) != 1 or sub.keywords:
                fail("functions take exactly one argument", sub)
        elif isinstance(sub, ast.Name):
            if sub.id in _FUNCS:
                continue
            if sub.id not in variables and sub.id not in _CONSTS:
                fail(f"unknown name {sub.id!r}", sub)
        elif isinstance(sub, (ast.operator, ast.unaryop)):
            continue
        else:
            fail(f"unsupported syntax {type(sub).__name__}", sub)


def _eval(node: ast.AST, env: Mapping[str, object]):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        return _CONSTS[node.id]
    if isinstance(node, ast.UnaryOp):
        val = _eval(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        op = node.op
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        return np.power(a, b)
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval(node.args[0], env))
    raise ExpressionError(f"cannot evaluate node {type(node).__name__}")


def _diff(node: ast.AST, var: str) -> ast.AST:
    if isinstance(node, ast.Constant):
        return _num(0.0)
    if isinstance(node, ast.Name):
        return _num(1.0 if node.id == var else 0.0)
    if isinstance(node, ast.UnaryOp):
        d = _diff(node.operand, var)
        return _neg(d) if isinstance(node.op, ast.USub) else d
    if isinstance(node, ast.BinOp):
        a, b = node.left, node.right
        da, db = _diff(a, var), _diff(b, var)
        op = node.op
        if isinstance(op, ast.Add):
            return _add(da, db)
        if isinstance(op, ast.Sub):
            return _sub(da, db)
        if isinstance(op, ast.Mult):
            return _add(_mul(da, b), _mul(a, db))
        if isinstance(op, ast.Div):
            return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, _num(2.0)))
        # power
        if _is_const(db, 0.0):
            # d(a^c) = c a^(c-1) da
            return _mul(_mul(b, _pow(a, _sub(b, _num(1.0)))), da)
        # general a^b = exp(b log a); log is outside the grammar
        raise ExpressionError("cannot differentiate a power with a variable exponent")
    if isinstance(node, ast.Call):
        name = node.func.id
        arg = node.args[0]
        darg = _diff(arg, var)
        if name == "exp":
            outer = _call("exp", arg)
        elif name == "sin":
            outer = _call("cos", arg)
        else:
            outer = _neg(_call("sin", arg))
        return _mul(outer, darg)
    raise ExpressionError(f"cannot differentiate node {type(node).__name__}")


@dataclass(frozen=True)
class Expression:
    """A parsed expression; call it with keyword variable values."""

    source: str
    variables: frozenset[str]
    _tree: ast.AST = field(repr=False, compare=False)

    def __call__(self, **values):
        missing = [v for v in self.free_variables() if v not in values]
        if missing:
            raise ExpressionError(f"missing value for {', '.join(sorted(missing))}")
        env = {k: np.asarray(v, dtype=float) if not np.isscalar(v) else float(v)
               for k, v in values.items()}
        out = _eval(self._tree, env)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        return float(out) if out.ndim == 0 else np.array(out)

    def free_variables(self) -> frozenset[str]:
        return frozenset(
            n.id for n in ast.walk(self._tree)
            if isinstance(n, ast.Name) and n.id in self.variables
        )

    def diff(self, var: str) -> "Expression":
        tree = _diff(self._tree, var)
        return Expression(ast.unparse(tree), self.variables, tree)

    def is_constant_zero(self) -> bool:
        return _is_const(self._tree, 0.0)


def parse_expression(source: str | float | int, variables=("x", "t")) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``variables``."""
    if isinstance(source, bool):
        raise ExpressionError("booleans are not expressions")
    if isinstance(source, (int, float)):
        source = repr(float(source))
    if not isinstance(source, str) or not source.strip():
        raise ExpressionError("expression must be a non-empty string")
    text = source.replace("^", "**")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        col = exc.offset or 0
        raise ExpressionError(f"syntax error at column {col} in {source!r}") from None
    variables = frozenset(variables)
    _validate(tree, variables, source)
    return Expression(source, variables, tree.body)
