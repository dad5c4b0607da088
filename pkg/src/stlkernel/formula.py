"""STL formula syntax tree, canonical printer and text parser.

Grammar (whitespace-insensitive)::

    formula := "true" | atom | "not" formula | formula ("and"|"or") formula
             | formula "U" window? formula | ("F"|"G") window? formula
             | "(" formula ")"
    atom    := "x" (">="|"<=") number
    window  := "[" number "," number "]"

Precedence, tightest first: ``not``, then ``F``/``G``/``U`` (right-associative),
then ``and``, then ``or``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

__all__ = [
    "TimeWindow",
    "TrueF",
    "Atom",
    "Not",
    "And",
    "Or",
    "Until",
    "Eventually",
    "Globally",
    "Formula",
    "ParseError",
    "parse_formula",
    "print_formula",
    "depth",
    "size",
    "atoms",
    "max_abs_threshold",
    "contains_true",
    "subformulas",
]

GEQ = ">="
LEQ = "<="


@dataclass(frozen=True)
class TimeWindow:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"time window bounds must be finite, got [{self.lo}, {self.hi}]")
        if self.lo < 0 or self.lo >= self.hi:
            raise ValueError(f"time window must satisfy 0 <= lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Atom:
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in (GEQ, LEQ):
            raise ValueError(f"atom polarity must be '>=' or '<=', got {self.op!r}")
        if not math.isfinite(self.threshold):
            raise ValueError("atom threshold must be finite")


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    window: Optional[TimeWindow] = None


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"
    window: Optional[TimeWindow] = None


@dataclass(frozen=True)
class Globally:
    arg: "Formula"
    window: Optional[TimeWindow] = None


Formula = Union[TrueF, Atom, Not, And, Or, Until, Eventually, Globally]


def children(f: Formula) -> tuple:
    if isinstance(f, (TrueF, Atom)):
        return ()
    if isinstance(f, (Not, Eventually, Globally)):
        return (f.arg,)
    return (f.left, f.right)


def subformulas(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal of ``f`` and all its descendants."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def depth(f: Formula) -> int:
    kids = children(f)
    return 1 + (max(depth(k) for k in kids) if kids else 0)


def size(f: Formula) -> int:
    return sum(1 for _ in subformulas(f))


def atoms(f: Formula) -> list[Atom]:
    return [g for g in subformulas(f) if isinstance(g, Atom)]


def max_abs_threshold(f: Formula) -> float:
    return max((abs(a.threshold) for a in atoms(f)), default=0.0)


def contains_true(f: Formula) -> bool:
    return any(isinstance(g, TrueF) for g in subformulas(f))


# ---------------------------------------------------------------- printing


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _window(w: Optional[TimeWindow]) -> str:
    return "" if w is None else f"[{_num(w.lo)},{_num(w.hi)}]"


def print_formula(f: Formula) -> str:
    """Fully parenthesized canonical text; ``parse_formula`` inverts it."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Atom):
        return f"x {f.op} {_num(f.threshold)}"
    if isinstance(f, Not):
        return f"not ({print_formula(f.arg)})"
    if isinstance(f, And):
        return f"({print_formula(f.left)}) and ({print_formula(f.right)})"
    if isinstance(f, Or):
        return f"({print_formula(f.left)}) or ({print_formula(f.right)})"
    if isinstance(f, Until):
        return f"({print_formula(f.left)}) U{_window(f.window)} ({print_formula(f.right)})"
    if isinstance(f, Eventually):
        return f"F{_window(f.window)} ({print_formula(f.arg)})"
    if isinstance(f, Globally):
        return f"G{_window(f.window)} ({print_formula(f.arg)})"
    raise TypeError(f"not a formula: {f!r}")


# ----------------------------------------------------------------- parsing


class ParseError(ValueError):
    """Syntax error at byte ``offset``; ``expected`` lists acceptable tokens."""

    def __init__(self, message: str, offset: int, expected: frozenset = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<cmp>>=|<=)
  | (?P<punct>[()\[\],])
  | (?P<word>[A-Za-z_]+)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"true", "not", "and", "or", "U", "F", "G", "x"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    raw = text.encode("utf-8")
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            offset = len(text[:pos].encode("utf-8"))
            raise ParseError(f"unexpected character {text[pos]!r}", offset)
        kind = m.lastgroup
        value = m.group()
        offset = len(text[:pos].encode("utf-8"))
        if kind == "word":
            if value not in _KEYWORDS:
                raise ParseError(f"unknown identifier {value!r}", offset, frozenset(_KEYWORDS))
            kind = value
        elif kind in ("cmp", "punct"):
            kind = value
        if kind != "ws":
            tokens.append((kind, value, offset))
        pos = m.end()
    tokens.append(("eof", "", len(raw)))
    return tokens


_FORMULA_START = frozenset({"true", "x", "not", "F", "G", "("})


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def offset(self) -> int:
        return self.tokens[self.i][2]

    def fail(self, expected) -> ParseError:
        kind, value, offset = self.tokens[self.i]
        shown = "end of input" if kind == "eof" else repr(value)
        return ParseError(f"unexpected {shown}", offset, frozenset(expected))

    def take(self, *kinds: str) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        if tok[0] not in kinds:
            raise self.fail(kinds)
        self.i += 1
        return tok

    def close(self, kind: str) -> None:
        # after a complete sub-formula a binary operator is also acceptable
        if self.peek() != kind:
            raise self.fail({kind, "and", "or", "U"})
        self.i += 1

    def parse(self) -> Formula:
        f = self.disjunction()
        self.close("eof")
        return f

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() == "or":
            self.i += 1
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.peek() == "and":
            self.i += 1
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.i += 1
            w = self.window()
            return Until(left, self.until(), w)
        return left

    def unary(self) -> Formula:
        kind = self.peek()
        if kind == "not":
            self.i += 1
            return Not(self.unary())
        if kind in ("F", "G"):
            self.i += 1
            w = self.window()
            arg = self.until()
            return Eventually(arg, w) if kind == "F" else Globally(arg, w)
        return self.primary()

    def primary(self) -> Formula:
        kind = self.peek()
        if kind not in ("true", "x", "("):
            raise self.fail(_FORMULA_START)
        self.i += 1
        if kind == "true":
            return TrueF()
        if kind == "x":
            _, op, _ = self.take(">=", "<=")
            return Atom(op, self.number())
        f = self.disjunction()
        self.close(")")
        return f

    def number(self) -> float:
        _, value, _ = self.take("num")
        return float(value)

    def window(self) -> Optional[TimeWindow]:
        if self.peek() != "[":
            return None
        start = self.offset()
        self.i += 1
        lo = self.number()
        self.take(",")
        hi = self.number()
        self.take("]")
        try:
            return TimeWindow(lo, hi)
        except ValueError as exc:
            raise ParseError(str(exc), start) from None


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()
