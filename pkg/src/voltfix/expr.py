"""Arithmetic expressions over named variables.

Problems and comparison functions are supplied as text, e.g.
``"(1/(t^2+1))*exp(0-s^2)*cos(x)"``. This module turns such text into an
immutable tree and evaluates it either on scalars or on numpy arrays.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Domain violations (``ln`` of a non-positive number, ``sqrt`` of a negative
number, division by zero, non-finite results) raise :class:`DomainError`
instead of producing NaN or infinity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Token",
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "LexError",
    "ExprSyntaxError",
    "EvalError",
    "UnboundVariableError",
    "DomainError",
    "BUILTINS",
    "tokenize",
    "parse",
    "parse_expr",
    "compile_expr",
    "evaluate",
    "evaluate_array",
    "to_source",
]

#: builtin function name -> arity
BUILTINS = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "ln": 1,
    "abs": 1,
    "sqrt": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}


class ExprError(ValueError):
    """Base class for expression errors; carries a 0-based character offset."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        self.detail = message
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class LexError(ExprError):
    pass


class ExprSyntaxError(ExprError):
    pass


class EvalError(ExprError):
    """Evaluation failure.

    ``index`` is the array index of the first offending sample when the
    expression was evaluated on arrays, otherwise ``None``.
    """

    def __init__(self, message, position=None, index=None):
        self.index = index
        super().__init__(message, position)


class UnboundVariableError(EvalError):
    pass


class DomainError(EvalError):
    pass


# ---------------------------------------------------------------------------
# tokens

@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | left-paren | right-paren | comma
    lexeme: str
    position: int


_NUMBER = re.compile(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_SINGLE = {
    "+": "operator",
    "-": "operator",
    "*": "operator",
    "/": "operator",
    "^": "operator",
    "(": "left-paren",
    ")": "right-paren",
    ",": "comma",
}


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens; whitespace is skipped."""
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        ch = source[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch in _SINGLE:
            tokens.append(Token(_SINGLE[ch], ch, pos))
            pos += 1
            continue
        m = _NUMBER.match(source, pos)
        if m:
            tokens.append(Token("number", m.group(), pos))
            pos = m.end()
            continue
        m = _IDENT.match(source, pos)
        if m:
            tokens.append(Token("identifier", m.group(), pos))
            pos = m.end()
            continue
        raise LexError(f"illegal character {ch!r}", pos)
    return tokens


# ---------------------------------------------------------------------------
# tree

class Expr:
    """Base class of expression nodes. Nodes are immutable.

    Equality is structural and ignores source positions.
    """

    pos: int

    @cached_property
    def variables(self) -> frozenset:
        out = set()
        for child in self.children():
            out |= child.variables
        return frozenset(out)

    def children(self) -> tuple:
        return ()

    def __str__(self):
        return to_source(self)

    def __call__(self, **bindings):
        return evaluate(self, bindings)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str
    pos: int = field(default=0, compare=False)

    @cached_property
    def variables(self):
        return frozenset((self.name,))


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    operand: Expr
    pos: int = field(default=0, compare=False)

    def children(self):
        return (self.operand,)


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    pos: int = field(default=0, compare=False)

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=True)
class Call(Expr):
    name: str
    args: tuple
    pos: int = field(default=0, compare=False)

    def children(self):
        return self.args


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, tokens: list[Token], end: int):
        self.tokens = tokens
        self.i = 0
        self.end = end

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression", self.end)
        self.i += 1
        return tok

    def at_op(self, *ops):
        tok = self.peek()
        return tok is not None and tok.kind == "operator" and tok.lexeme in ops

    def expect(self, kind, what):
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError(f"expected {what}, found end of expression", self.end)
        if tok.kind != kind:
            raise ExprSyntaxError(f"expected {what}, found {tok.lexeme!r}", tok.position)
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.at_op("+", "-"):
            tok = self.next()
            node = BinOp(tok.lexeme, node, self.term(), tok.position)
        return node

    def term(self):
        node = self.factor()
        while self.at_op("*", "/"):
            tok = self.next()
            node = BinOp(tok.lexeme, node, self.factor(), tok.position)
        return node

    def factor(self):
        if self.at_op("-"):
            tok = self.next()
            return Neg(self.factor(), tok.position)
        return self.power()

    def power(self):
        base = self.atom()
        if self.at_op("^"):
            tok = self.next()
            return BinOp("^", base, self.factor(), tok.position)
        return base

    def atom(self):
        tok = self.next()
        if tok.kind == "number":
            value = float(tok.lexeme)
            if not np.isfinite(value):
                raise ExprSyntaxError(f"number out of range {tok.lexeme!r}", tok.position)
            return Num(value, tok.position)
        if tok.kind == "identifier":
            nxt = self.peek()
            if nxt is not None and nxt.kind == "left-paren":
                return self.call(tok)
            return Var(tok.lexeme, tok.position)
        if tok.kind == "left-paren":
            node = self.expr()
            self.expect("right-paren", "')'")
            return node
        raise ExprSyntaxError(f"unexpected {tok.lexeme!r}", tok.position)

    def call(self, name_tok):
        name = name_tok.lexeme
        if name not in BUILTINS:
            raise ExprSyntaxError(f"unknown function {name!r}", name_tok.position)
        self.next()  # '('
        args = [self.expr()]
        while self.peek() is not None and self.peek().kind == "comma":
            self.next()
            args.append(self.expr())
        self.expect("right-paren", "')'")
        if len(args) != BUILTINS[name]:
            raise ExprSyntaxError(
                f"function {name!r} takes {BUILTINS[name]} argument(s), got {len(args)}",
                name_tok.position,
            )
        return Call(name, tuple(args), name_tok.position)


def parse(tokens: list[Token], end: int | None = None) -> Expr:
    """Build an expression tree from ``tokens``.

    ``end`` is the source length, used as the position of
    "unexpected end" errors; it defaults to the end of the last token.
    """
    if end is None:
        end = tokens[-1].position + len(tokens[-1].lexeme) if tokens else 0
    p = _Parser(tokens, end)
    node = p.expr()
    tok = p.peek()
    if tok is not None:
        raise ExprSyntaxError(f"unexpected {tok.lexeme!r}", tok.position)
    return node


def parse_expr(source: str, variables: Iterable[str] | None = None) -> Expr:
    """Tokenize and parse ``source``.

    If ``variables`` is given, every variable of the expression must be in it.
    """
    e = parse(tokenize(source), len(source))
    if variables is not None:
        check_variables(e, variables)
    return e


def check_variables(e: Expr, variables: Iterable[str]) -> None:
    allowed = set(variables)
    for node in _walk(e):
        if isinstance(node, Var) and node.name not in allowed:
            raise UnboundVariableError(
                f"unknown variable {node.name!r} (allowed: {', '.join(sorted(allowed))})",
                node.pos,
            )


def compile_expr(e: Expr | str, variables: Iterable[str] | None = None) -> Expr:
    """Accept either a parsed tree or source text."""
    if isinstance(e, Expr):
        if variables is not None:
            check_variables(e, variables)
        return e
    return parse_expr(e, variables)


def _walk(e: Expr):
    yield e
    for c in e.children():
        yield from _walk(c)


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}.get(e.op, _PREC_POW)
    if isinstance(e, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_source(e)
    return s if _prec(e) >= min_prec else f"({s})"


def to_source(e: Expr) -> str:
    """Print with the minimal parentheses that re-parse to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _PREC_NEG)
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_source(a) for a in e.args)})"
    if isinstance(e, BinOp):
        if e.op == "^":
            return f"{_wrap(e.left, _PREC_ATOM)}^{_wrap(e.right, _PREC_NEG)}"
        p = _prec(e)
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation

def _fail(cls, message, node, bad, mask):
    """Raise ``cls`` if any sample flagged in ``bad`` is inside ``mask``."""
    if mask is False or not np.any(bad):
        return
    if mask is not None and np.ndim(bad) > 0:
        shape = np.broadcast_shapes(np.shape(bad), np.shape(mask))
        bad = np.broadcast_to(bad, shape) & np.broadcast_to(mask, shape)
        if not bad.any():
            return
    index = None
    if np.ndim(bad) > 0:
        index = tuple(int(i) for i in np.unravel_index(np.argmax(bad), np.shape(bad)))
        message = f"{message} (sample index {index if len(index) > 1 else index[0]})"
    raise cls(message, node.pos, index)


def _check_finite(value, node, mask):
    with np.errstate(invalid="ignore"):
        bad = ~np.isfinite(value)
    _fail(DomainError, f"non-finite result in {to_source(node)!r}", node, bad, mask)


def _apply(node, args, mask):
    name = node.name
    (a,) = args[:1]
    if name == "sin":
        return np.sin(a)
    if name == "cos":
        return np.cos(a)
    if name == "tan":
        return np.tan(a)
    if name == "exp":
        return np.exp(a)
    if name == "abs":
        return np.abs(a)
    if name == "ln":
        _fail(DomainError, "ln of non-positive argument", node, a <= 0, mask)
        return np.log(a)
    if name == "sqrt":
        _fail(DomainError, "sqrt of negative argument", node, a < 0, mask)
        return np.sqrt(a)
    b = args[1]
    if name == "min":
        return np.minimum(a, b)
    if name == "max":
        return np.maximum(a, b)
    if name == "pow":
        return _power(node, a, b, mask)
    raise EvalError(f"unknown function {name!r}", node.pos)


def _power(node, a, b, mask):
    _fail(DomainError, "zero raised to a negative power", node, (a == 0) & (b < 0), mask)
    _fail(DomainError, "negative base with non-integer exponent", node, (a < 0) & (b != np.round(b)), mask)
    return np.power(a, b)


def _eval(e, env, mask, memo, dynamic):
    cacheable = memo is not None and not (e.variables & dynamic)
    if cacheable and id(e) in memo:
        return memo[id(e)][1]
    if isinstance(e, Num):
        value = np.float64(e.value)
    elif isinstance(e, Var):
        try:
            value = env[e.name]
        except KeyError:
            raise UnboundVariableError(f"unbound variable {e.name!r}", e.pos) from None
    elif isinstance(e, Neg):
        value = -_eval(e.operand, env, mask, memo, dynamic)
    elif isinstance(e, BinOp):
        a = _eval(e.left, env, mask, memo, dynamic)
        b = _eval(e.right, env, mask, memo, dynamic)
        if e.op == "+":
            value = a + b
        elif e.op == "-":
            value = a - b
        elif e.op == "*":
            value = a * b
        elif e.op == "/":
            _fail(DomainError, "division by zero", e, b == 0, mask)
            value = a / b
        else:
            value = _power(e, a, b, mask)
        _check_finite(value, e, mask)
    else:
        args = [_eval(a, env, mask, memo, dynamic) for a in e.args]
        value = _apply(e, args, mask)
        _check_finite(value, e, mask)
    if cacheable:
        # keep the node alive so its id stays unique while cached
        memo[id(e)] = (e, value)
    return value


def evaluate_array(e: Expr, env: Mapping[str, object], mask=None, memo=None, dynamic=frozenset()):
    """Evaluate ``e`` with numpy broadcasting.

    Parameters
    ----------
    env : mapping of variable name to scalar or array
    mask : bool array or False, optional
        Only samples where ``mask`` is true are checked for domain errors.
        Values outside the mask are unspecified. ``False`` disables the
        checks entirely and lets NaN/inf through.
    memo : dict, optional
        Cache for sub-expressions that do not involve any ``dynamic``
        variable; pass the same dict across calls that only change the
        dynamic bindings.
    """
    with np.errstate(all="ignore"):
        return _eval(e, env, mask, memo, frozenset(dynamic))


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` at a single point."""
    env = {k: np.float64(v) for k, v in bindings.items()}
    return float(evaluate_array(e, env))


def is_constant(e: Expr) -> bool:
    return not e.variables


def constant_value(e: Expr) -> float:
    return evaluate(e, {})
