"""Linear temporal logic over a finite proposition alphabet.

Formulae are immutable trees of frozen dataclasses, so they hash and compare
structurally.  Letters of the alphabet ``2^Pi`` are plain ``int`` bitmasks:
bit ``i`` is set when the proposition with id ``i`` holds at that step.

The concrete ASCII grammar, loosest binding first::

    iff     := impl ('<->' iff)?
    impl    := or ('->' impl)?
    or      := and ('|' and)*
    and     := until ('&' until)*
    until   := unary (('U' | 'R') until)?
    unary   := ('!' | 'X' | 'F' | 'G') unary | primary
    primary := 'true' | 'false' | IDENT | '(' iff ')' | '{' IDENT (',' IDENT)* '}'

``{p, q}`` is a subset-of-propositions atom and means ``p & q``.
``true U f`` and ``false R f`` are read as ``F f`` and ``G f``.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, fields
from typing import Union

__all__ = [
    "Proposition",
    "Alphabet",
    "LassoWord",
    "Formula",
    "Atom",
    "TrueF",
    "FalseF",
    "Not",
    "And",
    "Or",
    "Implies",
    "Iff",
    "Next",
    "Until",
    "Release",
    "Eventually",
    "Always",
    "TRUE",
    "FALSE",
    "LtlSyntaxError",
    "UnknownPropositionError",
    "parse_ltl",
    "to_text",
    "desugar",
    "negation_normal_form",
    "satisfies_lasso",
    "propositions_of",
    "subformulas",
    "is_core",
    "is_nnf",
]


@dataclass(frozen=True, order=True)
class Proposition:
    name: str
    id: int


class Alphabet:
    """Ordered set of propositions with dense ids ``0..n-1``."""

    def __init__(self, names: Iterable[str]):
        names = list(names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate proposition names in {names!r}")
        for name in names:
            if not _IDENT_RE.fullmatch(name) or name in _KEYWORDS:
                raise ValueError(f"invalid proposition name {name!r}")
        if len(names) > 63:
            raise ValueError("at most 63 propositions are supported")
        self.propositions = tuple(Proposition(n, i) for i, n in enumerate(names))
        self._by_name = {p.name: p for p in self.propositions}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.propositions)

    def __len__(self) -> int:
        return len(self.propositions)

    def __iter__(self):
        return iter(self.propositions)

    def __contains__(self, name) -> bool:
        return name in self._by_name

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"Alphabet({list(self.names)!r})"

    def __getitem__(self, name: str) -> Proposition:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown proposition {name!r}") from None

    def symbol(self, names: Iterable[str]) -> int:
        """Bitmask letter for the set of proposition ``names``."""
        bits = 0
        for name in names:
            bits |= 1 << self[name].id
        return bits

    def names_of(self, bits: int) -> tuple[str, ...]:
        return tuple(p.name for p in self.propositions if bits >> p.id & 1)

    def letters(self) -> range:
        """Every element of ``2^Pi`` as a bitmask."""
        return range(1 << len(self))

    @classmethod
    def coerce(cls, alphabet: "Alphabet | Iterable[str] | Iterable[Proposition]") -> "Alphabet":
        if isinstance(alphabet, Alphabet):
            return alphabet
        items = list(alphabet)
        if items and isinstance(items[0], Proposition):
            items = [p.name for p in sorted(items, key=lambda p: p.id)]
        return cls(items)


@dataclass(frozen=True)
class LassoWord:
    """The ultimately periodic word ``stem . loop^omega`` over bitmask letters."""

    stem: tuple[int, ...]
    loop: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "stem", tuple(self.stem))
        object.__setattr__(self, "loop", tuple(self.loop))
        if not self.loop:
            raise ValueError("lasso loop must be nonempty")

    def __len__(self) -> int:
        return len(self.stem) + len(self.loop)

    def letter(self, i: int) -> int:
        if i < len(self.stem):
            return self.stem[i]
        return self.loop[(i - len(self.stem)) % len(self.loop)]

    def shift(self) -> "LassoWord":
        """The suffix ``w1 w2 ...``."""
        if self.stem:
            return LassoWord(self.stem[1:], self.loop)
        return LassoWord((), self.loop[1:] + self.loop[:1])


# --------------------------------------------------------------------------
# AST


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Atom(Formula):
    prop: Proposition


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula


@dataclass(frozen=True)
class Always(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


def _cached_hash(self) -> int:
    # structural hashes of deep trees are recomputed on every dict lookup otherwise
    h = self.__dict__.get("_hash")
    if h is None:
        h = hash((type(self).__name__,) + tuple(getattr(self, f.name) for f in fields(self)))
        object.__setattr__(self, "_hash", h)
    return h


for _cls in (Atom, TrueF, FalseF, Not, Next, Eventually, Always, And, Or, Implies, Iff, Until, Release):
    _cls.__hash__ = _cached_hash

TRUE = TrueF()
FALSE = FalseF()

_UNARY = (Not, Next, Eventually, Always)
_BINARY = (And, Or, Implies, Iff, Until, Release)
AnyFormula = Union[Atom, TrueF, FalseF, Not, Next, Eventually, Always, And, Or, Implies, Iff, Until, Release]


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, _UNARY):
        return (f.child,)
    if isinstance(f, _BINARY):
        return (f.left, f.right)
    return ()


def subformulas(f: Formula) -> list[Formula]:
    """Distinct subformulae of ``f``, children before parents."""
    seen: dict[Formula, None] = {}
    stack: list[tuple[Formula, bool]] = [(f, False)]
    while stack:
        node, expanded = stack.pop()
        if node in seen:
            continue
        if expanded:
            seen[node] = None
        else:
            stack.append((node, True))
            stack.extend((c, False) for c in reversed(children(node)))
    return list(seen)


def propositions_of(f: Formula) -> set[Proposition]:
    return {g.prop for g in subformulas(f) if isinstance(g, Atom)}


# --------------------------------------------------------------------------
# parsing and printing


class LtlSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownPropositionError(LtlSyntaxError):
    pass


_IDENT_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*")
_KEYWORDS = {"true", "false", "X", "U", "R", "F", "G"}
_TOKEN_RE = re.compile(r"\s*(?:(<->|->|[!&|(){},])|([a-zA-Z_][a-zA-Z0-9_]*))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            start = len(text) - len(text[pos:].lstrip())
            raise LtlSyntaxError(f"unexpected character {text[start]!r}", start, text)
        tok = m.group(1) or m.group(2)
        tokens.append((tok, m.start(m.lastindex)))
        pos = m.end()
    tokens.append(("<eof>", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: Alphabet):
        self.text = text
        self.alphabet = alphabet
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def pos(self) -> int:
        return self.tokens[self.i][1]

    def take(self, expected: str | None = None) -> str:
        tok, pos = self.tokens[self.i]
        if expected is not None and tok != expected:
            raise LtlSyntaxError(f"expected {expected!r}, found {tok!r}", pos, self.text)
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.iff()
        if self.peek() != "<eof>":
            raise LtlSyntaxError(f"unexpected token {self.peek()!r}", self.pos(), self.text)
        return f

    def iff(self) -> Formula:
        left = self.impl()
        if self.peek() == "<->":
            self.take()
            return Iff(left, self.iff())
        return left

    def impl(self) -> Formula:
        left = self.or_()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.impl())
        return left

    def or_(self) -> Formula:
        left = self.and_()
        while self.peek() == "|":
            self.take()
            left = Or(left, self.and_())
        return left

    def and_(self) -> Formula:
        left = self.until()
        while self.peek() == "&":
            self.take()
            left = And(left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        op = self.peek()
        if op == "U":
            self.take()
            right = self.until()
            return Eventually(right) if left == TRUE else Until(left, right)
        if op == "R":
            self.take()
            right = self.until()
            return Always(right) if left == FALSE else Release(left, right)
        return left

    def unary(self) -> Formula:
        op = self.peek()
        if op == "!":
            self.take()
            return Not(self.unary())
        if op == "X":
            self.take()
            return Next(self.unary())
        if op == "F":
            self.take()
            return Eventually(self.unary())
        if op == "G":
            self.take()
            return Always(self.unary())
        return self.primary()

    def atom(self) -> Atom:
        tok, pos = self.tokens[self.i]
        if not _IDENT_RE.fullmatch(tok) or tok in _KEYWORDS:
            raise LtlSyntaxError(f"expected proposition, found {tok!r}", pos, self.text)
        self.take()
        if tok not in self.alphabet:
            raise UnknownPropositionError(f"unknown proposition {tok!r}", pos, self.text)
        return Atom(self.alphabet[tok])

    def primary(self) -> Formula:
        tok, pos = self.tokens[self.i]
        if tok == "(":
            self.take()
            f = self.iff()
            self.take(")")
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok == "{":
            self.take()
            if self.peek() == "}":
                self.take()
                return TRUE
            f: Formula = self.atom()
            while self.peek() == ",":
                self.take()
                f = And(f, self.atom())
            self.take("}")
            return f
        if tok == "<eof>":
            raise LtlSyntaxError("unexpected end of formula", pos, self.text)
        if tok in _KEYWORDS or not _IDENT_RE.fullmatch(tok):
            raise LtlSyntaxError(f"unexpected token {tok!r}", pos, self.text)
        return self.atom()


def identifiers_in(text: str) -> list[str]:
    """Proposition-like identifiers in ``text`` in order of first appearance."""
    out: dict[str, None] = {}
    for tok, _ in _tokenize(text):
        if _IDENT_RE.fullmatch(tok) and tok not in _KEYWORDS:
            out.setdefault(tok)
    return list(out)


def parse_ltl(text: str, alphabet: Alphabet | Iterable[str] | None = None) -> Formula:
    """Parse ``text`` into a formula over ``alphabet``.

    When ``alphabet`` is omitted it is inferred from the identifiers in the
    text, in order of first appearance.

    >>> str(parse_ltl("G (split_lane -> X !split_lane)"))
    'G (split_lane -> X !split_lane)'
    """
    if alphabet is None:
        alphabet = Alphabet(identifiers_in(text))
    return _Parser(text, Alphabet.coerce(alphabet)).parse()


# binding strength; higher binds tighter
_PREC = {Iff: 0, Implies: 1, Or: 2, And: 3, Until: 4, Release: 4}
_OPS = {Iff: "<->", Implies: "->", Or: "|", And: "&", Until: "U", Release: "R"}
_RIGHT_ASSOC = (Iff, Implies, Until, Release)
_UNARY_OPS = {Not: "!", Next: "X ", Eventually: "F ", Always: "G "}


def to_text(f: Formula) -> str:
    """Render ``f`` in the ASCII grammar with minimal parentheses.

    ``true U g`` and ``false R g`` print as ``F g`` and ``G g``, which is how
    the parser reads them back.
    """
    return _fmt(f, 0)


def _fmt(f: Formula, min_prec: int) -> str:
    if isinstance(f, Atom):
        return f.prop.name
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Until) and f.left == TRUE:
        return "F " + _fmt(f.right, 5)
    if isinstance(f, Release) and f.left == FALSE:
        return "G " + _fmt(f.right, 5)
    if isinstance(f, _UNARY):
        return _UNARY_OPS[type(f)] + _fmt(f.child, 5)
    prec = _PREC[type(f)]
    if isinstance(f, _RIGHT_ASSOC):
        left, right = _fmt(f.left, prec + 1), _fmt(f.right, prec)
    else:
        left, right = _fmt(f.left, prec), _fmt(f.right, prec + 1)
    s = f"{left} {_OPS[type(f)]} {right}"
    return f"({s})" if prec < min_prec else s


# --------------------------------------------------------------------------
# rewriting


def desugar(f: Formula) -> Formula:
    """Rewrite ``f`` using only atoms, ``true``, ``!``, ``|``, ``X`` and ``U``."""
    if isinstance(f, (Atom, TrueF)):
        return f
    if isinstance(f, FalseF):
        return Not(TRUE)
    if isinstance(f, Not):
        return Not(desugar(f.child))
    if isinstance(f, Next):
        return Next(desugar(f.child))
    if isinstance(f, Or):
        return Or(desugar(f.left), desugar(f.right))
    if isinstance(f, Until):
        return Until(desugar(f.left), desugar(f.right))
    if isinstance(f, And):
        return _and(desugar(f.left), desugar(f.right))
    if isinstance(f, Implies):
        return Or(Not(desugar(f.left)), desugar(f.right))
    if isinstance(f, Iff):
        a, b = desugar(f.left), desugar(f.right)
        return _and(Or(Not(a), b), Or(Not(b), a))
    if isinstance(f, Eventually):
        return Until(TRUE, desugar(f.child))
    if isinstance(f, Always):
        return Not(Until(TRUE, Not(desugar(f.child))))
    if isinstance(f, Release):
        return Not(Until(Not(desugar(f.left)), Not(desugar(f.right))))
    raise TypeError(f"not a formula: {f!r}")


def _and(a: Formula, b: Formula) -> Formula:
    return Not(Or(Not(a), Not(b)))


def negation_normal_form(f: Formula) -> Formula:
    """Push negations onto atoms; the result uses ``& | X U R`` and literals."""
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, Atom):
        return Not(f) if neg else f
    if isinstance(f, TrueF):
        return FALSE if neg else TRUE
    if isinstance(f, FalseF):
        return TRUE if neg else FALSE
    if isinstance(f, Not):
        return _nnf(f.child, not neg)
    if isinstance(f, Next):
        return Next(_nnf(f.child, neg))
    if isinstance(f, And):
        cls = Or if neg else And
        return cls(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Or):
        cls = And if neg else Or
        return cls(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Implies):
        return _nnf(Or(Not(f.left), f.right), neg)
    if isinstance(f, Iff):
        return _nnf(And(Implies(f.left, f.right), Implies(f.right, f.left)), neg)
    if isinstance(f, Until):
        cls = Release if neg else Until
        return cls(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Release):
        cls = Until if neg else Release
        return cls(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Eventually):
        return _nnf(Until(TRUE, f.child), neg)
    if isinstance(f, Always):
        return _nnf(Release(FALSE, f.child), neg)
    raise TypeError(f"not a formula: {f!r}")


def is_core(f: Formula) -> bool:
    return all(isinstance(g, (Atom, TrueF, Not, Or, Next, Until)) for g in subformulas(f))


def is_nnf(f: Formula) -> bool:
    for g in subformulas(f):
        if isinstance(g, Not) and not isinstance(g.child, Atom):
            return False
        if not isinstance(g, (Atom, TrueF, FalseF, Not, And, Or, Next, Until, Release)):
            return False
    return True


# --------------------------------------------------------------------------
# semantics


def satisfies_lasso(word: LassoWord, f: Formula) -> bool:
    """Decide ``stem . loop^omega |= f`` exactly.

    Every subformula is evaluated at the ``len(word)`` distinct positions,
    where the position after the last loop letter is the loop start.
    Until and Release are the least and greatest fixpoints of their one-step
    unfoldings over that finite successor structure.
    """
    n = len(word)
    succ = list(range(1, n)) + [len(word.stem)]
    letters = [word.letter(i) for i in range(n)]
    val: dict[Formula, list[bool]] = {}
    for g in subformulas(f):
        if isinstance(g, Atom):
            bit = g.prop.id
            v = [bool(a >> bit & 1) for a in letters]
        elif isinstance(g, TrueF):
            v = [True] * n
        elif isinstance(g, FalseF):
            v = [False] * n
        elif isinstance(g, Not):
            v = [not x for x in val[g.child]]
        elif isinstance(g, Next):
            c = val[g.child]
            v = [c[succ[i]] for i in range(n)]
        elif isinstance(g, And):
            v = [a and b for a, b in zip(val[g.left], val[g.right])]
        elif isinstance(g, Or):
            v = [a or b for a, b in zip(val[g.left], val[g.right])]
        elif isinstance(g, Implies):
            v = [(not a) or b for a, b in zip(val[g.left], val[g.right])]
        elif isinstance(g, Iff):
            v = [a == b for a, b in zip(val[g.left], val[g.right])]
        elif isinstance(g, Until):
            v = _fixpoint(val[g.left], val[g.right], succ, least=True)
        elif isinstance(g, Release):
            v = _fixpoint(val[g.left], val[g.right], succ, least=False)
        elif isinstance(g, Eventually):
            v = _fixpoint([True] * n, val[g.child], succ, least=True)
        elif isinstance(g, Always):
            v = _fixpoint([False] * n, val[g.child], succ, least=False)
        else:
            raise TypeError(f"not a formula: {g!r}")
        val[g] = v
    return val[f][0]


def _fixpoint(a: Sequence[bool], b: Sequence[bool], succ: Sequence[int], least: bool) -> list[bool]:
    # U: v = b | (a & X v), least.  R: v = b & (a | X v), greatest.
    n = len(succ)
    v = [not least] * n
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            nv = (b[i] or (a[i] and v[succ[i]])) if least else (b[i] and (a[i] or v[succ[i]]))
            if nv != v[i]:
                v[i] = nv
                changed = True
    return v
