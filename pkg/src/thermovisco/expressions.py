"""Small arithmetic expression language for scenario data.

Expressions use ``+ - * / ^`` (``**`` is accepted too), parentheses, numeric
literals, the constants ``pi`` and ``e``, the variables ``x, y, t, theta,
nx, ny`` (``nx, ny``: outward boundary normal) and the functions listed in
:data:`FUNCTIONS`.  Parsing goes through Python's ``ast`` with a whitelist,
so nothing else can be evaluated.
"""
from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs,
    "log": np.log, "tanh": np.tanh, "min": np.minimum, "max": np.maximum,
}
CONSTANTS = {"pi": np.pi, "e": np.e}
VARIABLES = ("x", "y", "t", "theta", "nx", "ny")

_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}
_UNARY = {ast.UAdd: np.positive, ast.USub: np.negative}


class Expression:
    """A parsed expression; call with keyword variables (arrays broadcast)."""

    def __init__(self, text: str, allowed=VARIABLES):
        self.text = str(text).strip()
        if not self.text:
            raise ConfigError("empty expression")
        source = self.text.replace("^", "**")
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            col = (exc.offset or 1)
            raise ConfigError(f"cannot parse expression {self.text!r} at column {col}: {exc.msg}") from None
        self.variables = set()
        self._check(tree.body, set(allowed))
        self._tree = tree.body

    def _check(self, node, allowed):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left, allowed)
            self._check(node.right, allowed)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            self._check(node.operand, allowed)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            pass
        elif isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return
            if node.id not in allowed:
                raise ConfigError(f"unknown name {node.id!r} in expression {self.text!r} "
                                  f"(column {node.col_offset + 1}); allowed: {sorted(allowed)}")
            self.variables.add(node.id)
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in FUNCTIONS and not node.keywords:
            for arg in node.args:
                self._check(arg, allowed)
        else:
            raise ConfigError(f"unsupported construct {type(node).__name__} in expression {self.text!r} "
                              f"(column {getattr(node, 'col_offset', 0) + 1})")

    def __call__(self, **env):
        missing = self.variables - set(env)
        if missing:
            raise ConfigError(f"expression {self.text!r} needs {sorted(missing)}")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self._eval(self._tree, env)

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return CONSTANTS[node.id]
            return np.asarray(env[node.id], dtype=float)
        return FUNCTIONS[node.func.id](*(self._eval(a, env) for a in node.args))

    @property
    def is_constant(self) -> bool:
        return not self.variables

    def __repr__(self):
        return f"Expression({self.text!r})"
