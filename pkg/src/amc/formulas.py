"""Formula ASTs, concrete syntax, and the fixpoint translation.

Two languages share one node vocabulary:

* strategic-temporal formulas: propositions, ``!``, ``&``, ``|``, and the
  coalition operators ``<<A>> X``, ``<<A>> G``, ``<<A>> f U g`` (with
  ``<<A>> F g`` stored as ``<<A>> true U g``);
* fixpoint formulas: propositions, variables, ``!``, ``&``, ``|``,
  ``<<A>> X`` and the binders ``mu Z . f`` / ``nu Z . f``.

Concrete syntax is ASCII; the grammar is documented in docs/formulas.ebnf.
Precedence: ``!`` binds tightest, then ``&``, then ``|``, then ``U``;
coalition and fixpoint prefixes extend as far right as possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class FormulaError(ValueError):
    """Ill-formed formula (unbound variable, non-monotone, alternating...)."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Prop(Formula):
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Top(Formula):
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Var(Formula):
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Not(Formula):
    child: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class CoalitionX(Formula):
    coalition: tuple[str, ...]
    child: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class CoalitionG(Formula):
    coalition: tuple[str, ...]
    child: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class CoalitionU(Formula):
    coalition: tuple[str, ...]
    left: Formula
    right: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Mu(Formula):
    var: str
    body: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Nu(Formula):
    var: str
    body: Formula
    pos: tuple[int, int] | None = field(default=None, compare=False)


ATL_NODES = (Prop, Top, Not, And, Or, CoalitionX, CoalitionG, CoalitionU)
AEMC_NODES = (Prop, Top, Var, Not, And, Or, CoalitionX, Mu, Nu)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {"mu", "nu", "true", "false", "U", "X", "G", "F"}

_PUNCT = {"<<": "LL", ">>": "RR", "(": "LP", ")": "RP", "!": "NOT",
          "&": "AND", "|": "OR", ",": "COMMA", ".": "DOT"}


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT, keyword name, punct name, EOF
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    out = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        two = text[i:i + 2]
        if two in _PUNCT:
            out.append(_Token(_PUNCT[two], two, line, col))
            i += 2
            col += 2
            continue
        if c in _PUNCT:
            out.append(_Token(_PUNCT[c], c, line, col))
            i += 1
            col += 1
            continue
        if c.isalnum() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in KEYWORDS else "IDENT"
            out.append(_Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    out.append(_Token("EOF", "", line, col))
    return out


# ---------------------------------------------------------------------------
# Parser (shared recursive descent; `lang` selects the operator set)
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, lang: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.lang = lang  # "atl" | "aemc"
        self.bound: list[str] = []

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def error(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.col)

    def parse(self) -> Formula:
        f = self.formula()
        t = self.peek()
        if t.kind != "EOF":
            raise ParseError(f"unexpected {t.text!r}", t.line, t.col)
        return f

    def formula(self) -> Formula:
        t = self.peek()
        if t.kind in ("mu", "nu"):
            if self.lang != "aemc":
                raise self.error(f"{t.text!r} is not a strategic-temporal operator")
            self.next()
            var = self.expect("IDENT").text
            self.expect("DOT")
            self.bound.append(var)
            body = self.formula()
            self.bound.pop()
            cls = Mu if t.kind == "mu" else Nu
            return cls(var, body, pos=(t.line, t.col))
        if t.kind == "LL":
            return self.strategic()
        return self.or_expr()

    def strategic(self) -> Formula:
        t = self.expect("LL")
        coalition = self.coalition()
        self.expect("RR")
        op = self.peek()
        if op.kind == "X":
            self.next()
            return CoalitionX(coalition, self.formula(), pos=(t.line, t.col))
        if op.kind in ("G", "F"):
            if self.lang != "atl":
                raise ParseError(
                    f"{op.text!r} is not available here; use a fixpoint", op.line, op.col
                )
            self.next()
            body = self.formula()
            if op.kind == "G":
                return CoalitionG(coalition, body, pos=(t.line, t.col))
            return CoalitionU(coalition, Top(), body, pos=(t.line, t.col))
        if self.lang != "atl":
            raise self.error("expected 'X' after the coalition")
        left = self.or_expr()
        u = self.peek()
        if u.kind != "U":
            raise ParseError("expected 'X', 'G', 'F' or an until body", u.line, u.col)
        self.next()
        right = self.formula()
        return CoalitionU(coalition, left, right, pos=(t.line, t.col))

    def coalition(self) -> tuple[str, ...]:
        names: list[str] = []
        if self.peek().kind == "RR":
            return ()
        while True:
            names.append(self.expect("IDENT").text)
            if self.peek().kind == "COMMA":
                self.next()
                continue
            return tuple(names)

    def or_expr(self) -> Formula:
        f = self.and_expr()
        while self.peek().kind == "OR":
            t = self.next()
            f = Or(f, self.and_expr(), pos=(t.line, t.col))
        return f

    def and_expr(self) -> Formula:
        f = self.unary()
        while self.peek().kind == "AND":
            t = self.next()
            f = And(f, self.unary(), pos=(t.line, t.col))
        return f

    def unary(self) -> Formula:
        t = self.peek()
        if t.kind == "NOT":
            self.next()
            return Not(self.unary(), pos=(t.line, t.col))
        if t.kind in ("mu", "nu", "LL"):
            return self.formula()
        return self.atom()

    def atom(self) -> Formula:
        t = self.peek()
        if t.kind == "LP":
            self.next()
            f = self.formula()
            self.expect("RP")
            return f
        if t.kind == "true":
            self.next()
            return Top(pos=(t.line, t.col))
        if t.kind == "false":
            self.next()
            return Not(Top(pos=(t.line, t.col)), pos=(t.line, t.col))
        if t.kind == "IDENT":
            self.next()
            if self.lang == "aemc" and t.text in self.bound:
                return Var(t.text, pos=(t.line, t.col))
            return Prop(t.text, pos=(t.line, t.col))
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col)


def parse_atl(text: str) -> Formula:
    """Parse a strategic-temporal formula."""
    return _Parser(text, "atl").parse()


def parse_aemc(text: str) -> Formula:
    """Parse a fixpoint formula; identifiers bound by mu/nu become variables."""
    return _Parser(text, "aemc").parse()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC = {
    Prop: 100, Top: 100, Var: 100,
    Not: 90, And: 60, Or: 50,
    CoalitionU: 30,
    CoalitionX: 20, CoalitionG: 20, Mu: 20, Nu: 20,
}


def _wrap(f: Formula, minimum: int) -> str:
    s = format_formula(f)
    if _PREC[type(f)] < minimum:
        return f"({s})"
    return s


def format_formula(f: Formula) -> str:
    """Render to concrete syntax; parsing the result recovers an equal AST."""
    if isinstance(f, Prop) or isinstance(f, Var):
        return f.name
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Not):
        if isinstance(f.child, Top):
            return "false"
        return "!" + _wrap(f.child, 90)
    if isinstance(f, And):
        return f"{_wrap(f.left, 60)} & {_wrap(f.right, 61)}"
    if isinstance(f, Or):
        return f"{_wrap(f.left, 50)} | {_wrap(f.right, 51)}"
    if isinstance(f, CoalitionX):
        return f"<<{','.join(f.coalition)}>> X {format_formula(f.child)}"
    if isinstance(f, CoalitionG):
        return f"<<{','.join(f.coalition)}>> G {format_formula(f.child)}"
    if isinstance(f, CoalitionU):
        if isinstance(f.left, Top):
            return f"<<{','.join(f.coalition)}>> F {format_formula(f.right)}"
        return f"<<{','.join(f.coalition)}>> {_wrap(f.left, 50)} U {format_formula(f.right)}"
    if isinstance(f, (Mu, Nu)):
        op = "mu" if isinstance(f, Mu) else "nu"
        body = format_formula(f.body)
        if isinstance(f.body, (And, Or, CoalitionU)):
            body = f"({body})"
        return f"{op} {f.var} . {body}"
    raise TypeError(f"not a formula node: {f!r}")


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------

def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Prop, Top, Var)):
        return ()
    if isinstance(f, Not):
        return (f.child,)
    if isinstance(f, (And, Or)):
        return (f.left, f.right)
    if isinstance(f, (CoalitionX, CoalitionG)):
        return (f.child,)
    if isinstance(f, CoalitionU):
        return (f.left, f.right)
    if isinstance(f, (Mu, Nu)):
        return (f.body,)
    raise TypeError(f"not a formula node: {f!r}")


def walk(f: Formula) -> Iterator[Formula]:
    yield f
    for c in children(f):
        yield from walk(c)


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Var):
        return frozenset((f.name,))
    if isinstance(f, (Mu, Nu)):
        return free_vars(f.body) - {f.var}
    out: frozenset[str] = frozenset()
    for c in children(f):
        out |= free_vars(c)
    return out


def propositions_of(f: Formula) -> frozenset[str]:
    return frozenset(n.name for n in walk(f) if isinstance(n, Prop))


def coalitions_of(f: Formula) -> list[tuple[str, ...]]:
    """All coalition annotations in pre-order (a multiset, kept as a list)."""
    return [
        n.coalition for n in walk(f)
        if isinstance(n, (CoalitionX, CoalitionG, CoalitionU))
    ]


def expand_aliases(f: Formula, aliases: Mapping[str, Sequence[str]]) -> Formula:
    """Replace coalition alias names by their member lists."""
    def fix(coalition: tuple[str, ...]) -> tuple[str, ...]:
        out: list[str] = []
        for name in coalition:
            for member in aliases.get(name, (name,)):
                if member not in out:
                    out.append(member)
        return tuple(out)

    if isinstance(f, (Prop, Top, Var)):
        return f
    if isinstance(f, Not):
        return Not(expand_aliases(f.child, aliases))
    if isinstance(f, And):
        return And(expand_aliases(f.left, aliases), expand_aliases(f.right, aliases))
    if isinstance(f, Or):
        return Or(expand_aliases(f.left, aliases), expand_aliases(f.right, aliases))
    if isinstance(f, CoalitionX):
        return CoalitionX(fix(f.coalition), expand_aliases(f.child, aliases))
    if isinstance(f, CoalitionG):
        return CoalitionG(fix(f.coalition), expand_aliases(f.child, aliases))
    if isinstance(f, CoalitionU):
        return CoalitionU(
            fix(f.coalition), expand_aliases(f.left, aliases), expand_aliases(f.right, aliases)
        )
    if isinstance(f, Mu):
        return Mu(f.var, expand_aliases(f.body, aliases))
    if isinstance(f, Nu):
        return Nu(f.var, expand_aliases(f.body, aliases))
    raise TypeError(f"not a formula node: {f!r}")


def is_atl(f: Formula) -> bool:
    return all(isinstance(n, ATL_NODES) for n in walk(f))


def is_aemc(f: Formula) -> bool:
    return all(isinstance(n, AEMC_NODES) for n in walk(f))


# ---------------------------------------------------------------------------
# Translation to fixpoint form
# ---------------------------------------------------------------------------

def translate_aemc(f: Formula) -> Formula:
    """Fixpoint counterpart of a strategic-temporal formula.

    Homomorphic on propositions and booleans;
    ``<<A>> G f``    becomes  ``nu Z . (t(f) & <<A>> X Z)``,
    ``<<A>> F f``    becomes  ``mu Z . (t(f) | <<A>> X Z)``,
    ``<<A>> f U g``  becomes  ``mu Z . (t(g) | t(f) & <<A>> X Z)``,
    with a fresh variable for every fixpoint introduced.
    """
    if not is_atl(f):
        raise FormulaError("translation input must be a strategic-temporal formula")
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return "Z" if counter[0] == 1 else f"Z{counter[0] - 1}"

    def t(g: Formula) -> Formula:
        if isinstance(g, (Prop, Top)):
            return g
        if isinstance(g, Not):
            return Not(t(g.child))
        if isinstance(g, And):
            return And(t(g.left), t(g.right))
        if isinstance(g, Or):
            return Or(t(g.left), t(g.right))
        if isinstance(g, CoalitionX):
            return CoalitionX(g.coalition, t(g.child))
        if isinstance(g, CoalitionG):
            z = fresh()
            return Nu(z, And(t(g.child), CoalitionX(g.coalition, Var(z))))
        if isinstance(g, CoalitionU):
            z = fresh()
            if isinstance(g.left, Top):
                # the "sometime" pattern: true U f
                return Mu(z, Or(t(g.right), CoalitionX(g.coalition, Var(z))))
            return Mu(z, Or(t(g.right), And(t(g.left), CoalitionX(g.coalition, Var(z)))))
        raise TypeError(f"not a strategic-temporal node: {g!r}")

    return t(f)


# ---------------------------------------------------------------------------
# Well-formedness of fixpoint formulas
# ---------------------------------------------------------------------------

def is_monotone(f: Formula) -> bool:
    """Every bound variable occurs under an even number of negations."""
    def scan(g: Formula, parity: dict[str, int]) -> bool:
        if isinstance(g, Var):
            return parity.get(g.name, 0) % 2 == 0
        if isinstance(g, Not):
            bumped = {v: p + 1 for v, p in parity.items()}
            return scan(g.child, bumped)
        if isinstance(g, (Mu, Nu)):
            inner = dict(parity)
            inner[g.var] = 0
            return scan(g.body, inner)
        return all(scan(c, parity) for c in children(g))

    return scan(f, {})


def check_alternation_free(f: Formula) -> bool:
    """No least fixpoint may use a variable bound by an enclosing greatest
    fixpoint, and vice versa."""
    def scan(g: Formula, binder: dict[str, str]) -> bool:
        if isinstance(g, (Mu, Nu)):
            kind = "mu" if isinstance(g, Mu) else "nu"
            other = "nu" if kind == "mu" else "mu"
            if any(binder.get(v) == other for v in free_vars(g)):
                return False
            inner = dict(binder)
            inner[g.var] = kind
            return scan(g.body, inner)
        return all(scan(c, binder) for c in children(g))

    return scan(f, {})


def require_checkable(f: Formula) -> None:
    """Raise unless ``f`` is a closed, monotone, alternation-free fixpoint
    formula — the fragment the fixpoint checker evaluates."""
    if not is_aemc(f):
        raise FormulaError("not a fixpoint-language formula")
    fv = free_vars(f)
    if fv:
        raise FormulaError(f"formula has free variables {sorted(fv)}")
    if not is_monotone(f):
        raise FormulaError("formula is not syntactically monotone")
    if not check_alternation_free(f):
        raise FormulaError("formula is not alternation-free")
