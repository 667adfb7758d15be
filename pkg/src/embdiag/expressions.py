"""Tiny arithmetic expression language for weights and profiles.

Grammar: numeric literals, the variables ``x`` (first coordinate),
``x1``..``x3``, ``absx`` (euclidean norm of the point), ``r`` (distance to
the domain boundary, when the evaluation context provides one), the
constants ``pi`` and ``e``, the binary operators ``+ - * / ^`` (``^`` is
power; ``**`` also accepted), unary minus, and the functions ``exp``,
``log``, ``sqrt``, ``sin``, ``cos``, ``abs``, ``pow``.

Anything else is rejected at compile time with an ExpressionError.
"""

from __future__ import annotations

import ast
import math

from .errors import ExpressionError

_ALLOWED_FUNCS = {
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "abs": abs,
    "pow": math.pow,
}

_ALLOWED_CONSTS = {"pi": math.pi, "e": math.e}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)


class EvalFailure(Exception):
    """Raised when a compiled expression hits a math-domain problem.

    Quadrature treats this as "a singular point was sampled" and reroutes
    with endpoint grading rather than crashing.
    """

    def __init__(self, reason):
        super().__init__(reason)


def _validate(node, var_names):
    if isinstance(node, ast.Expression):
        _validate(node.body, var_names)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _validate(node.left, var_names)
        _validate(node.right, var_names)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise ExpressionError(f"unary {type(node.op).__name__} not allowed")
        _validate(node.operand, var_names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
            raise ExpressionError("only exp/log/sqrt/sin/cos/abs/pow calls allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments not allowed")
        for arg in node.args:
            _validate(arg, var_names)
    elif isinstance(node, ast.Name):
        if node.id not in var_names and node.id not in _ALLOWED_CONSTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"literal {node.value!r} not allowed")
    else:
        raise ExpressionError(f"syntax node {type(node).__name__} not allowed")


def compile_weight_expression(source, dimension=1):
    """Compile an expression over a point into ``fn(coords, r) -> float``.

    ``coords`` is a 1-d numpy array (or tuple) of length ``dimension``;
    ``r`` is the boundary distance, or None when the caller has no domain.
    Using ``r`` in an expression without providing one raises EvalFailure.
    """
    var_names = {"x", "absx", "r"}
    for i in range(dimension):
        var_names.add(f"x{i + 1}")
    code = _compile(source, var_names)

    def fn(coords, r=None):
        env = dict(_ALLOWED_CONSTS)
        env["x"] = float(coords[0])
        total = 0.0
        for i in range(dimension):
            env[f"x{i + 1}"] = float(coords[i])
            total += float(coords[i]) ** 2
        env["absx"] = math.sqrt(total)
        if r is None:
            env["r"] = _MissingBoundaryDistance()
        else:
            env["r"] = float(r)
        return _run(code, env)

    fn.source = source
    return fn


def compile_profile_expression(source, var="r"):
    """Compile a scalar profile expression ``fn(s) -> float`` in one variable."""
    code = _compile(source, {var})

    def fn(s):
        env = dict(_ALLOWED_CONSTS)
        env[var] = float(s)
        return _run(code, env)

    fn.source = source
    return fn


class _MissingBoundaryDistance:
    def _fail(self, *_):
        raise EvalFailure("expression uses r but no boundary distance is available")

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _fail
    __truediv__ = __rtruediv__ = __pow__ = __rpow__ = __neg__ = __float__ = _fail


def _compile(source, var_names):
    text = source.replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {source!r}: {exc}") from exc
    _validate(tree, var_names)
    return compile(tree, "<expression>", "eval")


def _run(code, env):
    env.update(_ALLOWED_FUNCS)
    try:
        out = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - whitelisted AST
    except ZeroDivisionError as exc:
        raise EvalFailure("division by zero") from exc
    except OverflowError as exc:
        raise EvalFailure("overflow") from exc
    except ValueError as exc:
        # log of a nonpositive number, fractional power of a negative, ...
        raise EvalFailure(str(exc)) from exc
    if isinstance(out, complex):
        raise EvalFailure("complex value")
    return float(out)
