"""A small arithmetic expression language for custom systems.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('+' | '-') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Expressions compile to closures over a variable mapping.
"""

from __future__ import annotations

import math
import re
from typing import Callable, Dict, Iterable

from .errors import ConfigError
from .lie import shortest_angle

FUNCTIONS: Dict[str, tuple] = {
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "tan": (1, math.tan),
    "exp": (1, math.exp),
    "log": (1, math.log),
    "sqrt": (1, math.sqrt),
    "abs": (1, abs),
    "atan": (1, math.atan),
    "atan2": (2, math.atan2),
    "wrap": (1, lambda a: float(shortest_angle(a))),
}
NAMED = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^(),]))")


def tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ConfigError(f"unexpected character {text[pos:].strip()[:1]!r} in expression {text!r}")
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        else:
            out.append(("op", "^" if op == "**" else op))
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, text, allowed):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, op):
        t = self.take()
        if t != ("op", op):
            raise ConfigError(f"expected {op!r} in expression {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ConfigError(f"trailing input in expression {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = _bin(op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = _bin(op, node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda env: -inner(env)
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            ex = self.unary()
            return lambda env: base(env) ** ex(env)
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return lambda env, v=val: v
        if kind == "name":
            if self.peek() == ("op", "("):
                if val not in FUNCTIONS:
                    raise ConfigError(f"unknown function {val!r} in expression {self.text!r}")
                self.take()
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity, fn = FUNCTIONS[val]
                if len(args) != arity:
                    raise ConfigError(f"{val} takes {arity} argument(s)")
                return lambda env: fn(*(a(env) for a in args))
            if val in NAMED and val not in self.allowed:
                return lambda env, v=NAMED[val]: v
            if val not in self.allowed:
                raise ConfigError(f"unknown variable {val!r} in expression {self.text!r}")
            return lambda env: env[val]
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ConfigError(f"unexpected token {val!r} in expression {self.text!r}")


def _bin(op, a, b):
    if op == "+":
        return lambda env: a(env) + b(env)
    if op == "-":
        return lambda env: a(env) - b(env)
    if op == "*":
        return lambda env: a(env) * b(env)
    return lambda env: a(env) / b(env)


def compile_expression(text: str, variables: Iterable[str]) -> Callable[[dict], float]:
    """Compile ``text``; referencing a name outside ``variables`` (or ``pi``/``e``) is an error."""
    return _Parser(text, set(variables)).parse()


def pair_variables(n: int):
    return [f"q0_{i}" for i in range(n)] + [f"q1_{i}" for i in range(n)]


def point_variables(n: int):
    return [f"q_{i}" for i in range(n)]


def pair_env(q0, q1, constants):
    env = dict(constants)
    for i, v in enumerate(q0):
        env[f"q0_{i}"] = float(v)
    for i, v in enumerate(q1):
        env[f"q1_{i}"] = float(v)
    return env


def point_env(q, constants):
    env = dict(constants)
    for i, v in enumerate(q):
        env[f"q_{i}"] = float(v)
    return env
