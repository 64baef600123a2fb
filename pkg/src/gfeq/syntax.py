"""Abstract syntax, concrete grammar, printer, signature extraction, and
guardedness checking for equality-free GF with nested equivalences.

Surface grammar (whitespace-insensitive, '#' line comments, one sentence
per .gf file):

    sentence := formula
    formula  := quant | iff
    quant    := ("forall"|"exists") ident+ "." formula
    iff      := imp ("<->" imp)*
    imp      := disj ("->" imp)?
    disj     := conj ("|" conj)*
    conj     := neg ("&" neg)*
    neg      := "!" neg | atomf
    atomf    := "true" | "false" | "(" formula ")"
              | ident "(" ident ("," ident)* ")" | ident

Identifiers bound by a quantifier in scope are variables; any other
identifier in argument position is a constant.  Names E1, E2, ... are
reserved for the distinguished equivalence symbols (always binary).
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import pyparsing as pp

from .errors import (
    ArityConflict,
    ArityMismatch,
    EqualityUnsupported,
    NonContiguousDistinguished,
)

_DISTINGUISHED = re.compile(r"E[1-9][0-9]*\Z")
_KEYWORDS = ("forall", "exists", "true", "false")


def distinguished_level(name: str) -> int | None:
    """Level k if name is a reserved distinguished symbol E_k, else None."""
    m = _DISTINGUISHED.match(name)
    return int(name[1:]) if m else None


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self):
        return self.name


Term = Var | Const


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

class Formula:
    """Base class; all nodes are immutable and structurally comparable."""

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Atom(Formula):
    pred: str
    args: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def var_names(self) -> frozenset[str]:
        return frozenset(t.name for t in self.args if isinstance(t, Var))


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]

    def __post_init__(self):
        # nested conjunctions are flattened so render/parse round-trips
        flat: list[Formula] = []
        for a in self.args:
            flat.extend(a.args if isinstance(a, And) else (a,))
        if len(flat) < 2:
            raise ValueError("And needs at least two conjuncts; use conj()")
        object.__setattr__(self, "args", tuple(flat))


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def __post_init__(self):
        flat: list[Formula] = []
        for a in self.args:
            flat.extend(a.args if isinstance(a, Or) else (a,))
        if len(flat) < 2:
            raise ValueError("Or needs at least two disjuncts; use disj()")
        object.__setattr__(self, "args", tuple(flat))


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class ForAll(Formula):
    vars: tuple[str, ...]
    body: Formula

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))

    @property
    def guard(self) -> Atom | None:
        return _quantifier_guard(self)


@dataclass(frozen=True)
class Exists(Formula):
    vars: tuple[str, ...]
    body: Formula

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))

    @property
    def guard(self) -> Atom | None:
        return _quantifier_guard(self)


def conj(*parts: Formula) -> Formula:
    """N-ary conjunction builder collapsing the 0- and 1-argument cases."""
    parts = tuple(p for p in parts)
    if not parts:
        return TrueF()
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def disj(*parts: Formula) -> Formula:
    parts = tuple(p for p in parts)
    if not parts:
        return FalseF()
    if len(parts) == 1:
        return parts[0]
    return Or(parts)


@lru_cache(maxsize=None)
def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return f.var_names()
    if isinstance(f, (TrueF, FalseF)):
        return frozenset()
    if isinstance(f, Not):
        return free_vars(f.sub)
    if isinstance(f, (And, Or)):
        out: frozenset[str] = frozenset()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, (Implies, Iff)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (ForAll, Exists)):
        return free_vars(f.body) - frozenset(f.vars)
    raise TypeError(f"not a formula: {f!r}")


def _quantifier_guard(q: ForAll | Exists) -> Atom | None:
    """The Def-1.1(iv) guard atom of a quantifier node, if any.

    For a universal the body must be an implication with an atomic
    antecedent; for an existential the guard is the leftmost conjunct (or
    the whole body) that is an atom covering the quantified variables plus
    the free variables of the rest.
    """
    if isinstance(q, ForAll):
        if isinstance(q.body, Implies) and isinstance(q.body.left, Atom):
            g = q.body.left
            need = frozenset(q.vars) | free_vars(q.body.right)
            if need <= g.var_names():
                return g
        return None
    body = q.body
    if isinstance(body, Atom):
        if frozenset(q.vars) <= body.var_names():
            return body
        return None
    if isinstance(body, And):
        for i, c in enumerate(body.args):
            if not isinstance(c, Atom):
                continue
            rest = [a for j, a in enumerate(body.args) if j != i]
            need = frozenset(q.vars)
            for r in rest:
                need |= free_vars(r)
            if need <= c.var_names():
                return c
    return None


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Symbol:
    name: str
    arity: int
    kind: str  # "eq" | "rel" | "const"

    @property
    def level(self) -> int:
        lv = distinguished_level(self.name)
        if lv is None or self.kind != "eq":
            raise ValueError(f"{self.name} is not distinguished")
        return lv


@dataclass(frozen=True)
class Signature:
    symbols: tuple[Symbol, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "symbols", tuple(sorted(set(self.symbols), key=lambda s: s.name))
        )
        seen: dict[str, Symbol] = {}
        for s in self.symbols:
            if s.name in seen:
                raise ArityConflict(
                    f"{s.name} declared as both "
                    f"{seen[s.name].kind}/{seen[s.name].arity} and {s.kind}/{s.arity}"
                )
            seen[s.name] = s

    # signatures key several per-call caches; memoize the hash once
    def __hash__(self):
        h = getattr(self, "_hash", None)
        if h is None:
            h = hash(self.symbols)
            object.__setattr__(self, "_hash", h)
        return h

    def get(self, name: str) -> Symbol | None:
        for s in self.symbols:
            if s.name == name:
                return s
        return None

    @property
    def K(self) -> int:
        levels = [s.level for s in self.symbols if s.kind == "eq"]
        return max(levels, default=0)

    @property
    def eqs(self) -> tuple[Symbol, ...]:
        return tuple(sorted((s for s in self.symbols if s.kind == "eq"),
                            key=lambda s: s.level))

    @property
    def cons(self) -> tuple[Symbol, ...]:
        return tuple(s for s in self.symbols if s.kind == "const")

    @property
    def rels(self) -> tuple[Symbol, ...]:
        return tuple(s for s in self.symbols if s.kind == "rel")

    def with_symbols(self, extra) -> "Signature":
        merged = dict((s.name, s) for s in self.symbols)
        for s in extra:
            old = merged.get(s.name)
            if old is not None and old != s:
                raise ArityConflict(f"{s.name}: {old} vs {s}")
            merged[s.name] = s
        return Signature(tuple(merged.values()))


@dataclass(frozen=True)
class Sentence:
    formula: Formula
    sig: Signature

    def __post_init__(self):
        if free_vars(self.formula):
            raise ValueError(f"sentence has free variables: "
                             f"{sorted(free_vars(self.formula))}")

    def __str__(self):
        return render(self)


def sentence(formula: Formula) -> Sentence:
    """Wrap a closed formula, extracting its signature."""
    return Sentence(formula, signature_of(formula))


def signature_of(s: Sentence | Formula) -> Signature:
    """Collect every symbol with inferred arity and kind.

    Missing lower distinguished levels are added for contiguity (with a
    NonContiguousDistinguished warning).  A name used at two arities, or as
    both relation and constant, raises ArityConflict.
    """
    f = s.formula if isinstance(s, Sentence) else s
    seen: dict[str, Symbol] = {}

    def note(sym: Symbol):
        old = seen.get(sym.name)
        if old is not None and old != sym:
            raise ArityConflict(
                f"{sym.name} used as {old.kind}/{old.arity} "
                f"and as {sym.kind}/{sym.arity}"
            )
        seen[sym.name] = sym

    def walk(g: Formula):
        if isinstance(g, Atom):
            lv = distinguished_level(g.pred)
            if lv is not None:
                if len(g.args) != 2:
                    raise ArityMismatch(
                        f"distinguished symbol {g.pred} needs 2 arguments, "
                        f"got {len(g.args)}"
                    )
                note(Symbol(g.pred, 2, "eq"))
            else:
                note(Symbol(g.pred, len(g.args), "rel"))
            for t in g.args:
                if isinstance(t, Const):
                    if distinguished_level(t.name) is not None:
                        raise ArityMismatch(
                            f"distinguished symbol {t.name} used as a constant"
                        )
                    note(Symbol(t.name, 0, "const"))
        elif isinstance(g, Not):
            walk(g.sub)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                walk(a)
        elif isinstance(g, (Implies, Iff)):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, (ForAll, Exists)):
            walk(g.body)
        elif isinstance(g, (TrueF, FalseF)):
            pass
        else:
            raise TypeError(f"not a formula: {g!r}")

    walk(f)

    levels = {s.level for s in seen.values() if s.kind == "eq"}
    if levels:
        missing = set(range(1, max(levels) + 1)) - levels
        if missing:
            warnings.warn(
                f"added E{sorted(missing)} for contiguity",
                NonContiguousDistinguished,
            )
            for lv in missing:
                note(Symbol(f"E{lv}", 2, "eq"))
    return Signature(tuple(seen.values()))


# ---------------------------------------------------------------------------
# Guardedness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GuardViolation:
    path: tuple[str, ...]
    rule: str
    reason: str
    formula: Formula


@dataclass(frozen=True)
class GuardReport:
    ok: bool
    violations: tuple[GuardViolation, ...]


def check_guardedness(s: Sentence | Formula) -> GuardReport:
    """Validate membership in the guarded fragment.

    Single-variable quantifiers whose body has no other free variable are
    allowed unguarded (rule iii).  Any other quantifier must be guarded by
    an atom mentioning the quantified variables and every free variable of
    the rest of its body (rule iv); distinguished symbols may guard.
    """
    f = s.formula if isinstance(s, Sentence) else s
    found: list[GuardViolation] = []

    def walk(g: Formula, path: tuple[str, ...]):
        if isinstance(g, (Atom, TrueF, FalseF)):
            return
        if isinstance(g, Not):
            walk(g.sub, path + ("not",))
        elif isinstance(g, (And, Or)):
            tag = "and" if isinstance(g, And) else "or"
            for i, a in enumerate(g.args):
                walk(a, path + (f"{tag}[{i}]",))
        elif isinstance(g, (Implies, Iff)):
            tag = "imp" if isinstance(g, Implies) else "iff"
            walk(g.left, path + (f"{tag}.left",))
            walk(g.right, path + (f"{tag}.right",))
        elif isinstance(g, (ForAll, Exists)):
            tag = "forall" if isinstance(g, ForAll) else "exists"
            if len(g.vars) == 1 and free_vars(g.body) <= frozenset(g.vars):
                pass  # rule iii
            elif g.guard is None:
                kind = "universal" if isinstance(g, ForAll) else "existential"
                found.append(GuardViolation(
                    path + (tag,), "iv",
                    f"{kind} quantifier over {', '.join(g.vars)} has no guard "
                    f"atom covering its variables",
                    g,
                ))
            walk(g.body, path + (tag,))
        else:
            raise TypeError(f"not a formula: {g!r}")

    walk(f, ())
    return GuardReport(not found, tuple(found))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _grammar():
    LP, RP, DOT = map(pp.Suppress, "().")
    kw = {w: pp.Keyword(w) for w in _KEYWORDS}
    reserved = pp.MatchFirst(kw.values())
    ident = ~reserved + pp.Word(pp.alphas + "_", pp.alphanums + "_")

    formula = pp.Forward()

    # bare integers are legal in argument position only (numeral constants)
    arg = ident | pp.Word(pp.nums)
    args = LP + pp.DelimitedList(arg) + RP
    atom = (ident + pp.Group(pp.Opt(args)))("atom")
    atom.set_parse_action(lambda t: ("atom", t[0], tuple(t[1])))

    atomf = (
        kw["true"].set_parse_action(lambda: [("true",)])
        | kw["false"].set_parse_action(lambda: [("false",)])
        | (LP + formula + RP)
        | atom
    )

    neg = pp.Forward()
    neg <<= (pp.Suppress("!") + neg).set_parse_action(lambda t: [("not", t[0])]) | atomf

    def fold_nary(op):
        def act(t):
            items = list(t)
            return items[0] if len(items) == 1 else (op, tuple(items))
        return act

    conj_ = (neg + pp.ZeroOrMore(pp.Suppress("&") + neg)).set_parse_action(
        fold_nary("and"))
    disj_ = (conj_ + pp.ZeroOrMore(pp.Suppress("|") + conj_)).set_parse_action(
        fold_nary("or"))

    imp = pp.Forward()
    imp <<= (disj_ + pp.Opt(pp.Suppress("->") + imp)).set_parse_action(
        lambda t: t[0] if len(t) == 1 else ("imp", t[0], t[1]))

    def fold_iff(t):
        items = list(t)
        out = items[0]
        for nxt in items[1:]:
            out = ("iff", out, nxt)
        return [out]

    iff = (imp + pp.ZeroOrMore(pp.Suppress("<->") + imp)).set_parse_action(fold_iff)

    quant = (
        (kw["forall"] | kw["exists"])
        + pp.Group(pp.OneOrMore(ident))
        + DOT
        + formula
    ).set_parse_action(lambda t: [(t[0], tuple(t[1]), t[2])])

    formula <<= quant | iff
    top = formula + pp.StringEnd()
    top.ignore("#" + pp.rest_of_line)
    return top


_PARSER = _grammar()


def _build(raw, scope: tuple[str, ...]) -> Formula:
    tag = raw[0]
    if tag == "atom":
        _, name, arg_names = raw
        terms = tuple(Var(a) if a in scope else Const(a) for a in arg_names)
        return Atom(name, terms)
    if tag == "true":
        return TrueF()
    if tag == "false":
        return FalseF()
    if tag == "not":
        return Not(_build(raw[1], scope))
    if tag in ("and", "or"):
        parts = tuple(_build(a, scope) for a in raw[1])
        return And(parts) if tag == "and" else Or(parts)
    if tag == "imp":
        return Implies(_build(raw[1], scope), _build(raw[2], scope))
    if tag == "iff":
        return Iff(_build(raw[1], scope), _build(raw[2], scope))
    if tag in ("forall", "exists"):
        _, vs, body = raw
        inner = _build(body, scope + tuple(vs))
        return ForAll(vs, inner) if tag == "forall" else Exists(vs, inner)
    raise TypeError(f"unexpected parse node {raw!r}")


def _reject_equality(text: str):
    for ln, line in enumerate(text.splitlines(), start=1):
        code = line.split("#", 1)[0]
        col = code.find("=")
        if col >= 0:
            raise EqualityUnsupported(
                f"equality is not part of the language (line {ln}, col {col + 1})"
            )


def parse_sentence(text: str) -> Sentence:
    """Parse one sentence; raises SyntaxError with position on bad input."""
    _reject_equality(text)
    try:
        raw = _PARSER.parse_string(text, parse_all=True)[0]
    except pp.ParseBaseException as e:
        err = SyntaxError(f"{e.msg} (line {e.lineno}, col {e.col})")
        err.lineno = e.lineno
        err.offset = e.col
        raise err from None
    formula = _build(raw, ())
    return Sentence(formula, signature_of(formula))


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC_ATOM = 7


def _render(f: Formula, ctx: int) -> str:
    if isinstance(f, Atom):
        s = f.pred if not f.args else f"{f.pred}({','.join(str(t) for t in f.args)})"
        prec = _PREC_ATOM
    elif isinstance(f, TrueF):
        s, prec = "true", _PREC_ATOM
    elif isinstance(f, FalseF):
        s, prec = "false", _PREC_ATOM
    elif isinstance(f, Not):
        s, prec = "!" + _render(f.sub, 5), 5
    elif isinstance(f, And):
        s, prec = " & ".join(_render(a, 5) for a in f.args), 4
    elif isinstance(f, Or):
        s, prec = " | ".join(_render(a, 4) for a in f.args), 3
    elif isinstance(f, Implies):
        s, prec = f"{_render(f.left, 3)} -> {_render(f.right, 2)}", 2
    elif isinstance(f, Iff):
        s, prec = f"{_render(f.left, 1)} <-> {_render(f.right, 2)}", 1
    elif isinstance(f, (ForAll, Exists)):
        word = "forall" if isinstance(f, ForAll) else "exists"
        s, prec = f"{word} {' '.join(f.vars)} . {_render(f.body, 0)}", 0
    else:
        raise TypeError(f"not a formula: {f!r}")
    return f"({s})" if prec < ctx else s


def render(s: Sentence | Formula) -> str:
    f = s.formula if isinstance(s, Sentence) else s
    return _render(f, 0)
