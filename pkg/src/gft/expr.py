"""Minimal arithmetic expressions over coordinate names.

Accepted: ``+ - * / ^``, parentheses, numeric literals, ``pi``, the
functions ``sin cos tan sinh cosh exp log sqrt`` and coordinate names.
Expressions compile to numpy-vectorized callables.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ManifestError

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
_CONSTS = {"pi": np.pi}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


@dataclass(frozen=True)
class Expr:
    """A parsed expression; call it with one array per coordinate."""

    source: str
    variables: tuple[str, ...]
    _tree: ast.AST

    def __call__(self, *coords):
        env = dict(zip(self.variables, coords))
        shape = np.broadcast(*coords).shape if coords else ()
        out = _eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)


def parse_expr(text: str, variables: Sequence[str]) -> Expr:
    src = str(text).strip()
    if not src:
        raise ManifestError("empty expression")
    try:
        tree = ast.parse(src.replace("^", "**"), mode="eval").body
    except SyntaxError as exc:
        raise ManifestError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _validate(tree, set(variables), text)
    return Expr(src, tuple(variables), tree)


def _validate(node: ast.AST, names: set, text: str) -> None:
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ManifestError(f"operator not allowed in {text!r}")
        _validate(node.left, names, text)
        _validate(node.right, names, text)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ManifestError(f"operator not allowed in {text!r}")
        _validate(node.operand, names, text)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ManifestError(f"unknown function in {text!r}")
        if len(node.args) != 1 or node.keywords:
            raise ManifestError(f"functions take one argument in {text!r}")
        _validate(node.args[0], names, text)
    elif isinstance(node, ast.Name):
        if node.id not in names and node.id not in _CONSTS:
            raise ManifestError(f"unknown name {node.id!r} in {text!r}")
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ManifestError(f"bad literal in {text!r}")
    else:
        raise ManifestError(f"unsupported syntax in {text!r}")


def _eval(node: ast.AST, env: dict):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        val = _eval(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval(node.args[0], env))
    if isinstance(node, ast.Name):
        if node.id in env:
            return np.asarray(env[node.id], dtype=float)
        return _CONSTS[node.id]
    return float(node.value)
