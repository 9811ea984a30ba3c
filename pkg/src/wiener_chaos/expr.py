"""Safe arithmetic expressions in (t, x) with sin, cos, exp.

    >>> f = parse_expr("1 + 0.2*sin(x)")
    >>> f.uses_x, f.uses_t
    (True, False)
"""
from __future__ import annotations

import ast

import numpy as np

from .errors import DomainError

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": np.pi}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


class Expr:
    """Compiled expression; call as ``f(t, x)``."""

    def __init__(self, text: str):
        self.text = text
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise DomainError(f"cannot parse expression {text!r}: {exc.msg}") from None
        self._names: set[str] = set()
        self._check(tree.body)
        self._tree = tree.body
        self.uses_x = "x" in self._names
        self.uses_t = "t" in self._names

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            pass
        elif isinstance(node, ast.Name) and node.id in ("t", "x", *_CONSTS):
            self._names.add(node.id)
        elif (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
              and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            self._check(node.args[0])
        else:
            raise DomainError(f"unsupported construct in expression {self.text!r}: "
                              f"{ast.dump(node)[:40]}")

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        out = self._eval(self._tree, {"t": float(t), "x": x, **_CONSTS})
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape)

    def constant(self) -> float | None:
        """The value if the expression depends on neither t nor x."""
        if self.uses_x or self.uses_t:
            return None
        return float(self._eval(self._tree, dict(_CONSTS)))

    def __repr__(self):
        return f"Expr({self.text!r})"


def parse_expr(text) -> Expr | float:
    """Numbers pass through; strings compile to :class:`Expr` (constants fold to floats)."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    e = Expr(str(text))
    c = e.constant()
    return e if c is None else c
