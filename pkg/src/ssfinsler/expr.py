"""Expression language for phi(r, s) and one-variable profile functions.

Grammar (EBNF)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" exponent)?          (right associative)
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

The exponent of ``^`` must fold to a rational literal (``2``, ``-1``,
``(1/3)``, ``0.5``).  Variables are restricted per use site: ``r`` and ``s``
for metric functions, ``v`` for profile functions, ``r`` alone for
coefficient functions.

Parsing is a small Pratt parser; every node carries the half-open source span
it was parsed from.  :func:`evaluate` works on floats and on :class:`Jet2`
values alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Union

import mpmath

from . import jets
from .errors import DomainError, ParseError
from .jets import Jet2

__all__ = [
    "Node",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "FUNCTIONS",
    "parse_phi",
    "parse_expr",
    "pretty",
    "evaluate",
    "variables_of",
    "is_literal_zero",
]

Span = tuple[int, int]


@dataclass(frozen=True)
class Node:
    span: Span = field(default=(0, 0), compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    operand: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: Fraction


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node


Value = Union[float, Jet2]


def _float_sqrt(x: float) -> float:
    if x < 0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _float_log(x: float) -> float:
    if x <= 0:
        raise DomainError(f"log of nonpositive value {x!r}")
    return math.log(x)


# name -> (float implementation, jet implementation)
FUNCTIONS: dict[str, tuple[Callable[[float], float], Callable[[Jet2], Jet2]]] = {
    "sqrt": (_float_sqrt, jets.jet_sqrt),
    "exp": (math.exp, jets.jet_exp),
    "log": (_float_log, jets.jet_log),
    "sin": (math.sin, jets.jet_sin),
    "cos": (math.cos, jets.jet_cos),
    "tan": (math.tan, jets.jet_tan),
    "sinh": (math.sinh, jets.jet_sinh),
    "cosh": (math.cosh, jets.jet_cosh),
    "atan": (math.atan, jets.jet_atan),
}

# extended-precision counterparts, used by the finite-difference oracle
_MP_FUNCTIONS: dict[str, Callable] = {
    "sqrt": mpmath.sqrt,
    "exp": mpmath.exp,
    "log": mpmath.log,
    "sin": mpmath.sin,
    "cos": mpmath.cos,
    "tan": mpmath.tan,
    "sinh": mpmath.sinh,
    "cosh": mpmath.cosh,
    "atan": mpmath.atan,
}


def _mp_call(func: str, arg):
    if func == "sqrt" and arg < 0:
        raise DomainError(f"sqrt of negative value {arg}")
    if func == "log" and arg <= 0:
        raise DomainError(f"log of nonpositive value {arg}")
    return _MP_FUNCTIONS[func](arg)


# ------------------------------------------------------------------- lexing
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "name", "op", "end"
    text: str
    span: Span


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(src, pos)
        if not m:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ParseError(f"unexpected character {src[start]!r}", (start, start + 1), src)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.span(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", (len(src), len(src))))
    return toks


# ------------------------------------------------------------------ parsing
_INFIX_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_PREFIX_BP = 30


class _Parser:
    def __init__(self, src: str, variables: frozenset[str]):
        self.src = src
        self.variables = variables
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, span: Span):
        raise ParseError(msg, span, self.src)

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind != "op":
            what = "end of input" if tok.kind == "end" else repr(tok.text)
            self.error(f"expected {text!r}, found {what}", tok.span)
        return self.advance()

    def parse(self) -> Node:
        if self.peek().kind == "end":
            self.error("empty expression", (0, len(self.src)))
        node = self.expr(0)
        tok = self.peek()
        if tok.kind != "end":
            if tok.text == ")":
                self.error("unbalanced ')'", tok.span)
            self.error(f"unexpected token {tok.text!r}", tok.span)
        return node

    def expr(self, rbp: int) -> Node:
        left = self.nud(self.advance())
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX_BP:
                break
            lbp = _INFIX_BP[tok.text]
            if lbp <= rbp:
                break
            self.advance()
            left = self.led(tok, left)
        return left

    def nud(self, tok: _Tok) -> Node:
        if tok.kind == "num":
            return Num(float(tok.text), span=tok.span)
        if tok.kind == "name":
            if self.peek().text == "(" and self.peek().kind == "op":
                return self.call(tok)
            if tok.text in FUNCTIONS:
                self.error(f"function {tok.text!r} needs an argument", tok.span)
            if tok.text not in self.variables:
                allowed = ", ".join(sorted(self.variables)) or "none"
                self.error(f"unknown identifier {tok.text!r} (allowed variables: {allowed})", tok.span)
            return Var(tok.text, span=tok.span)
        if tok.kind == "op" and tok.text == "-":
            operand = self.expr(_PREFIX_BP)
            return Neg(operand, span=(tok.span[0], operand.span[1]))
        if tok.kind == "op" and tok.text == "+":
            return self.expr(_PREFIX_BP)
        if tok.kind == "op" and tok.text == "(":
            inner = self.expr(0)
            if self.peek().text != ")":
                tok2 = self.peek()
                if tok2.kind == "end":
                    self.error("unbalanced '(': missing ')'", tok.span)
                self.error(f"expected ')', found {tok2.text!r}", tok2.span)
            close = self.advance()
            return _respan(inner, (tok.span[0], close.span[1]))
        if tok.kind == "end":
            self.error("unexpected end of input", tok.span)
        self.error(f"unexpected token {tok.text!r}", tok.span)

    def call(self, name: _Tok) -> Node:
        if name.text not in FUNCTIONS:
            self.error(f"unknown function {name.text!r}", name.span)
        open_tok = self.advance()
        if self.peek().text == ")":
            self.error(f"function {name.text!r} takes exactly 1 argument, got 0", (name.span[0], self.peek().span[1]))
        arg = self.expr(0)
        nargs = 1
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            self.expr(0)
            nargs += 1
        if nargs != 1:
            self.error(f"function {name.text!r} takes exactly 1 argument, got {nargs}", (name.span[0], self.peek().span[1]))
        if self.peek().text != ")":
            if self.peek().kind == "end":
                self.error("unbalanced '(': missing ')'", open_tok.span)
            self.error(f"expected ')', found {self.peek().text!r}", self.peek().span)
        close = self.advance()
        return Call(name.text, arg, span=(name.span[0], close.span[1]))

    def led(self, tok: _Tok, left: Node) -> Node:
        if tok.text == "^":
            right = self.expr(_INFIX_BP["^"] - 1)
            exponent = _fold_rational(right)
            if exponent is None:
                self.error("exponent of '^' must be a rational literal", right.span)
            return Pow(left, exponent, span=(left.span[0], right.span[1]))
        right = self.expr(_INFIX_BP[tok.text])
        return BinOp(tok.text, left, right, span=(left.span[0], right.span[1]))


def _respan(node: Node, span: Span) -> Node:
    object.__setattr__(node, "span", span)
    return node


def _fold_rational(node: Node) -> Fraction | None:
    if isinstance(node, Num):
        return Fraction(repr(node.value)) if math.isfinite(node.value) else None
    if isinstance(node, Neg):
        v = _fold_rational(node.operand)
        return None if v is None else -v
    if isinstance(node, BinOp):
        a, b = _fold_rational(node.left), _fold_rational(node.right)
        if a is None or b is None:
            return None
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            return None
        return a / b
    if isinstance(node, Pow):
        a = _fold_rational(node.base)
        if a is None or node.exponent.denominator != 1 or (a == 0 and node.exponent < 0):
            return None
        return a ** int(node.exponent)
    return None


def parse_expr(src: str, variables: Iterable[str] = ("r", "s")) -> Node:
    """Parse ``src`` allowing only the given variable names."""
    return _Parser(src, frozenset(variables)).parse()


def parse_phi(src: str) -> Node:
    """Parse a metric function phi(r, s)."""
    return parse_expr(src, ("r", "s"))


# ----------------------------------------------------------- pretty-printing
def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _INFIX_BP[node.op]
    if isinstance(node, Neg):
        return _PREFIX_BP
    if isinstance(node, Pow):
        return _INFIX_BP["^"]
    return 100


def _fmt_fraction(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator) if q >= 0 else f"({q.numerator})"
    return f"({q.numerator}/{q.denominator})"


def pretty(node: Node) -> str:
    """Render an AST back to source text that reparses to the same AST."""
    if isinstance(node, Num):
        v = node.value
        if not math.isfinite(v):
            raise ValueError(f"cannot render non-finite literal {v!r}")
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, Neg):
        inner = pretty(node.operand)
        if _prec(node.operand) <= _PREFIX_BP and not isinstance(node.operand, (Pow, Neg)):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = pretty(node.base)
        if _prec(node.base) <= _INFIX_BP["^"]:
            base = f"({base})"
        return f"{base}^{_fmt_fraction(node.exponent)}"
    if isinstance(node, BinOp):
        p = _INFIX_BP[node.op]
        left = pretty(node.left)
        if _prec(node.left) < p:
            left = f"({left})"
        right = pretty(node.right)
        # left associative: equal precedence on the right needs parentheses
        if _prec(node.right) <= p or (isinstance(node.right, Neg)):
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def variables_of(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Neg,)):
        return variables_of(node.operand)
    if isinstance(node, Call):
        return variables_of(node.arg)
    if isinstance(node, Pow):
        return variables_of(node.base)
    if isinstance(node, BinOp):
        return variables_of(node.left) | variables_of(node.right)
    return set()


def is_literal_zero(node: Node) -> bool:
    v = _fold_rational(node)
    return v is not None and v == 0


# ---------------------------------------------------------------- evaluation
def evaluate(node: Node, env: Mapping[str, Value]) -> Value:
    """Evaluate an AST with variables bound to floats, jets or mpmath numbers.

    Numeric domain violations (sqrt/log of negatives, division by zero,
    non-integer powers of negatives) raise :class:`DomainError`.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise DomainError(f"variable {node.name!r} is unbound") from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        arg = evaluate(node.arg, env)
        f_float, f_jet = FUNCTIONS[node.func]
        if isinstance(arg, Jet2):
            return f_jet(arg)
        if isinstance(arg, mpmath.mpf):
            return _mp_call(node.func, arg)
        try:
            return f_float(arg)
        except (ValueError, OverflowError) as exc:
            raise DomainError(f"{node.func}({arg!r}): {exc}") from None
    if isinstance(node, Pow):
        base = evaluate(node.base, env)
        if isinstance(base, Jet2):
            return jets.jet_pow(base, node.exponent)
        q = node.exponent
        if q.denominator == 1:
            if base == 0 and q < 0:
                raise DomainError("zero raised to a negative power")
            return base ** int(q)
        if base < 0:
            raise DomainError(f"non-integer power {q} of negative value {base!r}")
        if isinstance(base, mpmath.mpf):
            return base ** (mpmath.mpf(q.numerator) / q.denominator)
        return base ** float(q)
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if not isinstance(a, Jet2) and not isinstance(b, Jet2):
            if b == 0:
                raise DomainError("division by zero")
            return a / b
        if not isinstance(a, Jet2):
            return b.__rtruediv__(a)
        return a / b
    raise TypeError(f"not an expression node: {node!r}")
