"""The input/output property mini-language.

A property is a boolean combination of comparisons between a single
variable (`x[k]` or `y`) and a rational constant, e.g.

    x[0] >= 7000 => y >= 500000

Grammar (EBNF), with "=>" right-associative and precedence ! > && > || > =>:

    prop  := imp
    imp   := or ("=>" imp)?
    or    := and ("||" and)*
    and   := unary ("&&" unary)*
    unary := "!" unary | "(" prop ")" | atom
    atom  := ("x[" INT "]" | "y") CMP DECIMAL
    CMP   := "<" | "<=" | ">" | ">=" | "==" | "!="

Equality on real-kind features is accepted syntactically but rarely
useful: it holds on a measure-zero set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .rational import to_fraction


class PropertySyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class PropertyBindError(ValueError):
    """A feature index in the property does not exist in the target model."""


@dataclass(frozen=True)
class Atom:
    target: str  # "x" or "y"
    index: int | None
    op: str  # "<", "<=", ">", ">=", "==", "!="
    value: Fraction


@dataclass(frozen=True)
class Not:
    operand: "Property"


@dataclass(frozen=True)
class And:
    left: "Property"
    right: "Property"


@dataclass(frozen=True)
class Or:
    left: "Property"
    right: "Property"


@dataclass(frozen=True)
class Implies:
    antecedent: "Property"
    consequent: "Property"


Property = Union[Atom, Not, And, Or, Implies]

_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_INT = re.compile(r"\d+")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> PropertySyntaxError:
        return PropertySyntaxError(message, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, token: str) -> bool:
        self.skip_ws()
        return self.text.startswith(token, self.pos)

    def accept(self, token: str) -> bool:
        if self.peek(token):
            self.pos += len(token)
            return True
        return False

    def expect(self, token: str) -> None:
        if not self.accept(token):
            raise self.error(f"expected {token!r}")

    def parse(self) -> Property:
        node = self.parse_implies()
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error("unexpected trailing input")
        return node

    def parse_implies(self) -> Property:
        left = self.parse_or()
        if self.accept("=>"):
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self) -> Property:
        node = self.parse_and()
        while self.accept("||"):
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> Property:
        node = self.parse_unary()
        while self.accept("&&"):
            node = And(node, self.parse_unary())
        return node

    def parse_unary(self) -> Property:
        if self.accept("!"):
            return Not(self.parse_unary())
        if self.accept("("):
            node = self.parse_implies()
            self.expect(")")
            return node
        return self.parse_atom()

    def parse_atom(self) -> Property:
        self.skip_ws()
        if self.accept("x"):
            self.expect("[")
            self.skip_ws()
            match = _INT.match(self.text, self.pos)
            if not match:
                raise self.error("feature index must be a non-negative integer")
            index = int(match.group())
            self.pos = match.end()
            self.expect("]")
            target: str | None = "x"
        elif self.accept("y"):
            target, index = "y", None
        else:
            raise self.error("expected 'x[k]' or 'y'")
        op = self.parse_cmp()
        value = self.parse_number()
        return Atom(target, index, op, value)

    def parse_cmp(self) -> str:
        for op in ("<=", ">=", "==", "!=", "<", ">"):
            if self.accept(op):
                return op
        raise self.error("expected a comparison operator")

    def parse_number(self) -> Fraction:
        self.skip_ws()
        match = _NUMBER.match(self.text, self.pos)
        if not match:
            raise self.error("expected a decimal constant")
        self.pos = match.end()
        return to_fraction(match.group())


def parse_property(text: str) -> Property:
    """Parse property text; raises PropertySyntaxError with a position."""
    return _Parser(text).parse()


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def evaluate_property(phi: Property, x: Sequence[Fraction], y: Fraction) -> bool:
    """Standard boolean/comparison semantics over exact rationals."""
    if isinstance(phi, Atom):
        if phi.target == "y":
            operand = y
        else:
            if phi.index is None or phi.index >= len(x):
                raise PropertyBindError(f"x[{phi.index}] is unbound for a {len(x)}-dimensional input")
            operand = x[phi.index]
        return _CMP[phi.op](operand, phi.value)
    if isinstance(phi, Not):
        return not evaluate_property(phi.operand, x, y)
    if isinstance(phi, And):
        return evaluate_property(phi.left, x, y) and evaluate_property(phi.right, x, y)
    if isinstance(phi, Or):
        return evaluate_property(phi.left, x, y) or evaluate_property(phi.right, x, y)
    if isinstance(phi, Implies):
        return (not evaluate_property(phi.antecedent, x, y)) or evaluate_property(phi.consequent, x, y)
    raise TypeError(f"not a property node: {phi!r}")


def iter_atoms(phi: Property):
    if isinstance(phi, Atom):
        yield phi
    elif isinstance(phi, Not):
        yield from iter_atoms(phi.operand)
    elif isinstance(phi, (And, Or)):
        yield from iter_atoms(phi.left)
        yield from iter_atoms(phi.right)
    elif isinstance(phi, Implies):
        yield from iter_atoms(phi.antecedent)
        yield from iter_atoms(phi.consequent)
    else:
        raise TypeError(f"not a property node: {phi!r}")


def bind_property(phi: Property, n_features: int) -> None:
    """Check every x[k] against the model dimensionality; raise if out of range."""
    bad = sorted({a.index for a in iter_atoms(phi) if a.target == "x" and a.index >= n_features})
    if bad:
        raise PropertyBindError(
            f"feature indices {bad} out of range for a model with {n_features} features"
        )
