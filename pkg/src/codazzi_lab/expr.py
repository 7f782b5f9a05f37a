"""Restricted expression programs for immersions and scalar potentials.

Expressions are parsed with :mod:`ast` and only arithmetic, numeric literals,
named variables and a fixed function vocabulary are admitted.  Compiled
programs run unchanged on floats, numpy arrays and :class:`Jet` values.
"""
from __future__ import annotations

import ast
import math
from typing import Callable, Sequence

import numpy as np

from .errors import CodazziLabError
from .jets import Jet


def _dispatch(name: str, npfunc):
    def f(x):
        if isinstance(x, Jet):
            return getattr(x, name)()
        return npfunc(x)

    f.__name__ = name
    return f


FUNCTIONS = {
    "sin": _dispatch("sin", np.sin),
    "cos": _dispatch("cos", np.cos),
    "tan": _dispatch("tan", np.tan),
    "exp": _dispatch("exp", np.exp),
    "log": _dispatch("log", np.log),
    "sqrt": _dispatch("sqrt", np.sqrt),
    "sinh": _dispatch("sinh", np.sinh),
    "cosh": _dispatch("cosh", np.cosh),
}
CONSTANTS = {"pi": math.pi, "e": math.e}

sin, cos, tan = FUNCTIONS["sin"], FUNCTIONS["cos"], FUNCTIONS["tan"]
exp, log, sqrt = FUNCTIONS["exp"], FUNCTIONS["log"], FUNCTIONS["sqrt"]
sinh, cosh = FUNCTIONS["sinh"], FUNCTIONS["cosh"]

_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


class ExpressionError(CodazziLabError, ValueError):
    pass


def check_expression(source: str, names: Sequence[str]) -> ast.Expression:
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {source!r}: {exc.msg}") from None
    allowed = set(names) | set(FUNCTIONS) | set(CONSTANTS)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ExpressionError(f"disallowed construct {type(node).__name__} in {source!r}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"unknown function in {source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"functions take exactly one argument: {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric literal in {source!r}")
    return tree


def compile_expression(source: str, names: Sequence[str]) -> Callable:
    """Compile ``source`` into ``f(*values)`` with positional ``names``."""
    tree = check_expression(source, names)
    code = compile(tree, "<expr>", "eval")
    names = tuple(names)

    def program(*values):
        env = dict(FUNCTIONS)
        env.update(CONSTANTS)
        env.update(zip(names, values))
        return eval(code, {"__builtins__": {}}, env)  # noqa: S307 - AST-whitelisted

    program.source = source
    return program
