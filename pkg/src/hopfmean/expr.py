"""Arithmetic expressions for user-defined vector fields.

A small recursive-descent parser turns strings such as
``"A - (alpha+1)*x1 + x1^2*x2"`` into an immutable tree of
:class:`ExpressionAst` nodes, which :func:`eval_expression` evaluates
with IEEE double semantics (division by zero gives ``inf``, ``log(-1)``
gives ``nan``; nothing raises).

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

State variables are ``x1 .. xn``; every other bare name must be a
declared parameter. There is no implicit multiplication.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    ArityError,
    ExpressionSyntaxError,
    MissingParameterError,
    UnknownIdentifierError,
)

__all__ = [
    "ExpressionAst",
    "ModelFile",
    "parse_expression",
    "eval_expression",
    "to_source",
    "load_model_file",
    "FUNCTIONS",
]


def _safe_log(x):
    if x > 0.0:
        return math.log(x)
    if x == 0.0:
        return -math.inf
    return math.nan


def _safe_sqrt(x):
    if x >= 0.0:
        return math.sqrt(x)
    return math.nan


def _safe_exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _nan_on_domain(fn):
    def wrapped(x):
        try:
            return fn(x)
        except ValueError:  # sin(inf), cos(inf)
            return math.nan
    return wrapped


FUNCTIONS = {
    "exp": _safe_exp,
    "log": _safe_log,
    "sin": _nan_on_domain(math.sin),
    "cos": _nan_on_domain(math.cos),
    "tanh": math.tanh,
    "sqrt": _safe_sqrt,
    "abs": abs,
}


def ieee_div(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a != a or a == 0.0:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def ieee_pow(a: float, b: float) -> float:
    try:
        r = a ** b
    except ZeroDivisionError:
        # 0.0 ** negative; sign follows C pow for odd integer exponents
        if b == int(b) and int(b) % 2 and math.copysign(1.0, a) < 0:
            return -math.inf
        return math.inf
    except OverflowError:
        if a < 0 and b == int(b) and int(b) % 2:
            return -math.inf
        return math.inf
    if isinstance(r, complex):
        return math.nan
    return r


_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": ieee_div,
    "pow": ieee_pow,
}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_OPS = {v: k for k, v in _SYMBOL.items()}


@dataclass(frozen=True)
class ExpressionAst:
    """Immutable expression node.

    ``kind`` is one of ``const``, ``var``, ``param``, ``neg``, ``add``,
    ``sub``, ``mul``, ``div``, ``pow`` or ``call``. ``value`` holds the
    constant, the zero-based state index, the parameter name or the
    function name, depending on the kind.
    """

    kind: str
    value: object = None
    children: tuple = ()

    def variables(self) -> set:
        if self.kind == "var":
            return {self.value}
        return set().union(*(c.variables() for c in self.children)) if self.children else set()

    def parameters(self) -> set:
        if self.kind == "param":
            return {self.value}
        return set().union(*(c.parameters() for c in self.children)) if self.children else set()


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_STATE_RE = re.compile(r"x([1-9][0-9]*)\Z")


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source, dimension, parameter_names):
        self.source = source
        self.dimension = dimension
        self.params = set(parameter_names)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ExpressionSyntaxError(f"{message}, found {what}", _byte_offset(self.source, tok[2]))

    def expect(self, symbol):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != symbol:
            self.fail(f"expected {symbol!r}")
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = _OPS[self.advance()[1]]
            node = ExpressionAst(op, None, (node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = _OPS[self.advance()[1]]
            node = ExpressionAst(op, None, (node, self.unary()))
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return ExpressionAst("neg", None, (self.unary(),))
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return ExpressionAst("pow", None, (base, self.unary()))
        return base

    def atom(self):
        tok = self.advance()
        kind, text, _ = tok
        if kind == "num":
            return ExpressionAst("const", float(text))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                return self.call(tok)
            return self.identifier(tok)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.i -= 1
        self.fail("expected a number, name or '('")

    def identifier(self, tok):
        name = tok[1]
        m = _STATE_RE.match(name)
        if m:
            index = int(m.group(1))
            if index > self.dimension:
                raise UnknownIdentifierError(
                    f"state variable {name!r} exceeds dimension {self.dimension} "
                    f"(offset {_byte_offset(self.source, tok[2])})"
                )
            return ExpressionAst("var", index - 1)
        if name in self.params:
            return ExpressionAst("param", name)
        raise UnknownIdentifierError(
            f"unknown identifier {name!r} (offset {_byte_offset(self.source, tok[2])})"
        )

    def call(self, tok):
        name = tok[1]
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(
                f"unknown function {name!r} (offset {_byte_offset(self.source, tok[2])})"
            )
        self.expect("(")
        args = []
        if not (self.peek()[0] == "op" and self.peek()[1] == ")"):
            args.append(self.expr())
            while self.peek()[0] == "op" and self.peek()[1] == ",":
                self.advance()
                args.append(self.expr())
        self.expect(")")
        if len(args) != 1:
            raise ArityError(f"{name}() takes exactly 1 argument ({len(args)} given)")
        return ExpressionAst("call", name, tuple(args))


def parse_expression(source: str, dimension: int, parameter_names: Sequence[str] = ()) -> ExpressionAst:
    """Parse ``source`` into an :class:`ExpressionAst`.

    Raises
    ------
    ExpressionSyntaxError
        With the byte offset of the offending token.
    UnknownIdentifierError
        For names that are neither ``x1..x<dimension>``, a declared
        parameter, nor a supported function.
    ArityError
        When a function is not called with exactly one argument.
    """
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    if dimension < 1:
        raise ValueError("dimension must be positive")
    names = list(parameter_names)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate parameter names in {names}")
    for name in names:
        if _STATE_RE.match(name) or name in FUNCTIONS:
            raise ValueError(f"parameter name {name!r} shadows a state variable or function")
    return _Parser(source, dimension, names).parse()


def eval_expression(ast: ExpressionAst, state: Sequence[float], params: Mapping[str, float]) -> float:
    """Evaluate ``ast`` at ``state`` with parameter values ``params``."""
    kind = ast.kind
    if kind == "const":
        return ast.value
    if kind == "var":
        return float(state[ast.value])
    if kind == "param":
        try:
            return float(params[ast.value])
        except KeyError:
            raise MissingParameterError(f"parameter {ast.value!r} has no value") from None
    if kind == "neg":
        return -eval_expression(ast.children[0], state, params)
    if kind == "call":
        return FUNCTIONS[ast.value](eval_expression(ast.children[0], state, params))
    left, right = ast.children
    return _BINARY[kind](eval_expression(left, state, params), eval_expression(right, state, params))


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _prec(node):
    if node.kind == "const" and node.value < 0:
        return 3
    return _PREC.get(node.kind, 5)


def to_source(ast: ExpressionAst) -> str:
    """Render ``ast`` back to text with the minimal parentheses needed."""
    kind = ast.kind
    if kind == "const":
        if not math.isfinite(ast.value):
            raise ValueError("non-finite constants cannot be rendered")
        text = repr(float(ast.value))
        return text
    if kind == "var":
        return f"x{ast.value + 1}"
    if kind == "param":
        return ast.value
    if kind == "call":
        return f"{ast.value}({to_source(ast.children[0])})"
    if kind == "neg":
        child = ast.children[0]
        inner = to_source(child)
        if _prec(child) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    left, right = ast.children
    p = _PREC[kind]
    ls, rs = to_source(left), to_source(right)
    if kind == "pow":
        if _prec(left) <= 4:
            ls = f"({ls})"
        if _prec(right) < 3:
            rs = f"({rs})"
    else:
        if _prec(left) < p:
            ls = f"({ls})"
        if _prec(right) <= p:
            rs = f"({rs})"
    return f"{ls}{_SYMBOL[kind]}{rs}"


@dataclass(frozen=True)
class ModelFile:
    """Parsed contents of a JSON model file."""

    dimension: int
    parameters: dict
    bifurcation_parameter: str
    equations: tuple
    sources: tuple
    name: str = "custom"


def load_model_file(path_or_data) -> ModelFile:
    """Read a model description.

    The JSON layout is::

        {"dimension": n,
         "parameters": {"name": default, ...},
         "bifurcation_parameter": "alpha",
         "equations": ["expr1", ..., "exprn"]}

    ``path_or_data`` may be a path or an already decoded mapping.
    """
    if isinstance(path_or_data, Mapping):
        data = path_or_data
        name = data.get("name", "custom")
    else:
        path = Path(path_or_data)
        data = json.loads(path.read_text())
        name = data.get("name", path.stem)
    try:
        n = int(data["dimension"])
        params = {str(k): float(v) for k, v in data.get("parameters", {}).items()}
        bif = str(data["bifurcation_parameter"])
        sources = tuple(data["equations"])
    except KeyError as exc:
        raise ValueError(f"model file is missing key {exc.args[0]!r}") from None
    if len(sources) != n:
        raise ValueError(f"expected {n} equations, got {len(sources)}")
    names = list(params)
    if bif not in params:
        names.append(bif)
        params[bif] = math.nan
    asts = tuple(parse_expression(s, n, names) for s in sources)
    return ModelFile(n, params, bif, asts, sources, name)
