"""A small arithmetic expression grammar for user-declared constraints.

Supported syntax: ``+ - * / ^`` (with unary minus, ``^`` binding right),
parentheses, decimal literals, named variables, and the functions
``exp``, ``sin``, ``cos``, ``cosh``, ``sqrt``. Expressions compile to
plain callables that evaluate elementwise, so numpy arrays pass through.
"""

from __future__ import annotations

import re
from typing import Callable, Sequence

import numpy as np

__all__ = ["ExpressionError", "compile_expression"]

_FUNCTIONS: dict[str, Callable] = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "cosh": np.cosh,
    "sqrt": np.sqrt,
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r"|(?P<mul>·))"
)


class ExpressionError(ValueError):
    """Raised when an expression fails to tokenize or parse."""


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            raise ExpressionError(f"unrecognized input at position {pos}: {text[pos:pos + 10]!r}")
        if match.group("num") is not None:
            tokens.append(("num", match.group("num")))
        elif match.group("name") is not None:
            tokens.append(("name", match.group("name")))
        elif match.group("mul") is not None:
            tokens.append(("op", "*"))
        else:
            tokens.append(("op", match.group("op")))
        pos = match.end()
    return tokens


class _Parser:
    # Grammar (precedence low to high):
    #   expr   := term (('+'|'-') term)*
    #   term   := unary (('*'|'/') unary)*
    #   unary  := ('+'|'-') unary | power
    #   power  := atom ('^' unary)?          -- right associative
    #   atom   := number | name | name '(' expr ')' | '(' expr ')'

    def __init__(self, tokens: list[tuple[str, str]], variables: Sequence[str]):
        self.tokens = tokens
        self.pos = 0
        self.index = {name: i for i, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, text = self.take()
        if kind != "op" or text != value:
            raise ExpressionError(f"expected {value!r}, found {text!r}")

    def parse(self) -> Callable:
        fn = self.expr()
        if self.pos != len(self.tokens):
            raise ExpressionError(f"unexpected trailing input: {self.tokens[self.pos][1]!r}")
        return fn

    def expr(self) -> Callable:
        left = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.take()[1]
            right = self.term()
            if op == "+":
                left = (lambda a, b: lambda *v: a(*v) + b(*v))(left, right)
            else:
                left = (lambda a, b: lambda *v: a(*v) - b(*v))(left, right)
        return left

    def term(self) -> Callable:
        left = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            op = self.take()[1]
            right = self.unary()
            if op == "*":
                left = (lambda a, b: lambda *v: a(*v) * b(*v))(left, right)
            else:
                left = (lambda a, b: lambda *v: a(*v) / b(*v))(left, right)
        return left

    def unary(self) -> Callable:
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return (lambda a: lambda *v: -a(*v))(inner)
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Callable:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            exponent = self.unary()
            return (lambda a, b: lambda *v: a(*v) ** b(*v))(base, exponent)
        return base

    def atom(self) -> Callable:
        kind, text = self.take()
        if kind == "num":
            value = float(text)
            return lambda *v: value
        if kind == "name":
            if self.peek() == ("op", "("):
                fn = _FUNCTIONS.get(text)
                if fn is None:
                    raise ExpressionError(
                        f"unknown function {text!r}; available: {', '.join(sorted(_FUNCTIONS))}"
                    )
                self.take()
                inner = self.expr()
                self.expect(")")
                return (lambda f, a: lambda *v: f(a(*v)))(fn, inner)
            if text not in self.index:
                raise ExpressionError(
                    f"unknown variable {text!r}; available: {', '.join(self.index)}"
                )
            idx = self.index[text]
            return (lambda i: lambda *v: v[i])(idx)
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExpressionError(f"unexpected token {text!r}" if text else "unexpected end of expression")


def compile_expression(text: str, variables: Sequence[str]) -> Callable:
    """Compile ``text`` into a callable of ``len(variables)`` positional args.

    Args:
        text: Expression source, e.g. ``"a^2 + 0.5*sin(a + b)"``.
        variables: Ordered variable names the expression may reference.

    Returns:
        A function mapping variable values (scalars or same-shape arrays)
        to the expression value.

    Raises:
        ExpressionError: On any lexical or syntactic problem, including
            references to unknown variables or functions.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    return _Parser(_tokenize(text), variables).parse()
