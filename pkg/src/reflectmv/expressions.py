"""A tiny, safe polynomial expression language for user-defined coefficients.

Expressions are ordinary Python arithmetic over the names ``x1 .. xd`` and
``t`` with numeric literals and the operators ``+ - * / **``. Exponents must be
non-negative integer literals, so every accepted expression is a polynomial
(division is allowed by numeric constants only). Expressions are validated on
the AST before being compiled, so nothing else (attribute access, calls,
subscripts, names) can reach ``eval``.

>>> fn = compile_expression("-2*(x1 - 1)", dimension=1)
>>> import numpy as np
>>> fn(0.0, np.array([[0.0], [1.0]]))
array([ 2., -0.])
"""
from __future__ import annotations

import ast

import numpy as np

__all__ = ["ExpressionError", "compile_expression", "compile_vector", "compile_matrix"]


class ExpressionError(ValueError):
    """Raised for expressions outside the polynomial grammar."""


_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY = (ast.UAdd, ast.USub)


def _is_constant(node):
    if isinstance(node, ast.Constant):
        return True
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARY):
        return _is_constant(node.operand)
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        return _is_constant(node.left) and _is_constant(node.right)
    return False


def _check(node, names, text):
    if isinstance(node, ast.Expression):
        return _check(node.body, names, text)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals are allowed in {text!r}")
        return
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}; allowed: {sorted(names)}")
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARY):
        return _check(node.operand, names, text)
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        if isinstance(node.op, ast.Pow):
            exp = node.right
            if not (isinstance(exp, ast.Constant) and isinstance(exp.value, int) and exp.value >= 0):
                raise ExpressionError(f"exponents must be non-negative integer literals in {text!r}")
        if isinstance(node.op, ast.Div) and not _is_constant(node.right):
            raise ExpressionError(f"division only by constants in {text!r}")
        _check(node.left, names, text)
        _check(node.right, names, text)
        return
    raise ExpressionError(f"unsupported syntax {type(node).__name__} in {text!r}")


def _names(dimension):
    return {f"x{i + 1}" for i in range(dimension)} | {"t"}


def compile_expression(text, dimension):
    """Compile a scalar polynomial into ``fn(t, X) -> (N,)`` for ``X`` of shape ``(N, d)``."""
    if not isinstance(text, str):
        text = repr(float(text))
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _check(tree, _names(dimension), text)
    code = compile(tree, "<expression>", "eval")

    def fn(t, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        env = {f"x{i + 1}": X[:, i] for i in range(dimension)}
        env["t"] = float(t)
        val = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - AST validated above
        return np.broadcast_to(np.asarray(val, dtype=float), (X.shape[0],)).copy()

    fn.source = text
    return fn


def compile_vector(texts, dimension):
    """Compile a list of ``dimension`` expressions into ``fn(t, X) -> (N, d)``."""
    if isinstance(texts, str):
        texts = [texts]
    if len(texts) != dimension:
        raise ExpressionError(f"expected {dimension} components, got {len(texts)}")
    parts = [compile_expression(s, dimension) for s in texts]

    def fn(t, X):
        return np.stack([p(t, X) for p in parts], axis=-1)

    fn.source = list(texts)
    return fn


def compile_matrix(rows, dimension):
    """Compile a nested list (d rows x d' columns) into ``fn(t, X) -> (N, d, d')``."""
    if len(rows) != dimension:
        raise ExpressionError(f"sigma needs {dimension} rows, got {len(rows)}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ExpressionError("sigma rows must have equal length")
    parts = [[compile_expression(s, dimension) for s in row] for row in rows]

    def fn(t, X):
        return np.stack([np.stack([p(t, X) for p in row], axis=-1) for row in parts], axis=-2)

    fn.source = [list(r) for r in rows]
    return fn
