"""Ontology front end: an ALCHI dialect with nested equivalence roles
and pairwise existential dependencies, compiled to guarded sentences.

Axioms come one per line.  Names follow a case convention: role names
start lowercase, concept names start uppercase.  The distinguished roles
E1, E2, ... are equivalences with each level refining the next; they may
appear wherever a role may, except on the left of a role inclusion whose
right side is a free role (that would constrain nothing).

    Admin [= User | Organisation      concept inclusion (&, |, !, TOP, BOT,
                                      exists r . C, forall r . C)
    grant [= E2                       role inclusion; "r^-" is the inverse
    manages [= Admin x Doc            domain-range restriction
    access [= exists(grant^-, manages^-)
                                      pairwise dependency: every access pair
                                      shares a witness via the two roles

Consistency of a knowledge base coincides with satisfiability of its
translation, which stays within three variables.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import pyparsing as pp

from .errors import IllegalDistinguishedUse, NonContiguousDistinguished
from .syntax import (
    Atom,
    Exists,
    FalseF,
    ForAll,
    Formula,
    Iff,
    Implies,
    Not,
    Sentence,
    Symbol,
    TrueF,
    Var,
    conj,
    disj,
    distinguished_level,
    signature_of,
)


# ---------------------------------------------------------------------------
# Axiom and concept forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Role:
    name: str
    inverse: bool = False

    @property
    def level(self) -> int | None:
        return distinguished_level(self.name)


@dataclass(frozen=True)
class CName:
    name: str


@dataclass(frozen=True)
class CTop:
    pass


@dataclass(frozen=True)
class CBot:
    pass


@dataclass(frozen=True)
class CNot:
    sub: object


@dataclass(frozen=True)
class CAnd:
    args: tuple


@dataclass(frozen=True)
class COr:
    args: tuple


@dataclass(frozen=True)
class CExists:
    role: Role
    sub: object


@dataclass(frozen=True)
class CForAll:
    role: Role
    sub: object


@dataclass(frozen=True)
class ConceptInclusion:
    left: object
    right: object


@dataclass(frozen=True)
class RoleInclusion:
    left: Role
    right: Role


@dataclass(frozen=True)
class DomainRange:
    role: Role
    domain: str
    range: str


@dataclass(frozen=True)
class Dependency:
    role: Role
    p: Role
    q: Role


Axiom = ConceptInclusion | RoleInclusion | DomainRange | Dependency


@dataclass(frozen=True)
class KnowledgeBase:
    axioms: tuple[Axiom, ...]

    @property
    def K(self) -> int:
        return max((r.level or 0 for r in self._roles()), default=0)

    def _roles(self):
        def of_concept(c):
            if isinstance(c, (CExists, CForAll)):
                yield c.role
                yield from of_concept(c.sub)
            elif isinstance(c, CNot):
                yield from of_concept(c.sub)
            elif isinstance(c, (CAnd, COr)):
                for a in c.args:
                    yield from of_concept(a)

        for ax in self.axioms:
            if isinstance(ax, ConceptInclusion):
                yield from of_concept(ax.left)
                yield from of_concept(ax.right)
            elif isinstance(ax, RoleInclusion):
                yield ax.left
                yield ax.right
            elif isinstance(ax, DomainRange):
                yield ax.role
            else:
                yield ax.role
                yield ax.p
                yield ax.q


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_KEYWORDS = ("exists", "forall", "TOP", "BOT", "x")


def _is_role_name(name: str) -> bool:
    return name[0].islower() or distinguished_level(name) is not None


def _mk_role(name: str, inverse: bool) -> Role:
    if distinguished_level(name) is not None and inverse:
        # equivalences are symmetric, the inverse marker is redundant
        return Role(name, False)
    return Role(name, inverse)


def _build_grammar():
    ident = pp.Word(pp.alphas, pp.alphanums + "_")
    ident.add_condition(lambda t: t[0] not in _KEYWORDS,
                        message="keyword cannot be used as a name")
    LP, RP, DOT = map(pp.Suppress, "().")
    INV = pp.Literal("^-")

    rname = ident.copy().add_condition(
        lambda t: _is_role_name(t[0]),
        message="role names start lowercase (or are distinguished)")
    role = (rname + pp.Opt(INV)).set_parse_action(
        lambda t: _mk_role(t[0], len(t) > 1))

    concept = pp.Forward()
    cname = ident.copy().add_condition(
        lambda t: not _is_role_name(t[0]),
        message="concept names start uppercase")
    atom = (
        pp.Keyword("TOP").set_parse_action(lambda: CTop())
        | pp.Keyword("BOT").set_parse_action(lambda: CBot())
        | (pp.Keyword("exists") + role + DOT + concept).set_parse_action(
            lambda t: CExists(t[1], t[2]))
        | (pp.Keyword("forall") + role + DOT + concept).set_parse_action(
            lambda t: CForAll(t[1], t[2]))
        | cname.copy().set_parse_action(lambda t: CName(t[0]))
        | (LP + concept + RP)
    )
    negation = pp.Forward()
    negation <<= ((pp.Suppress("!") + negation).set_parse_action(
        lambda t: CNot(t[0])) | atom)
    conjunction = pp.DelimitedList(negation, "&").set_parse_action(
        lambda t: t[0] if len(t) == 1 else CAnd(tuple(t)))
    concept <<= pp.DelimitedList(conjunction, "|").set_parse_action(
        lambda t: t[0] if len(t) == 1 else COr(tuple(t)))

    subsumes = pp.Suppress("[=")
    pairwise = (pp.Keyword("exists") + LP + role + pp.Suppress(",")
                + role + RP)
    domrange = cname.copy() + pp.Suppress(pp.Keyword("x")) + cname.copy()
    role_axiom = (role + subsumes + (
        pairwise.set_parse_action(lambda t: [("dep", t[1], t[2])])
        | domrange.set_parse_action(lambda t: [("domrange", t[0], t[1])])
        | (role.copy() + pp.StringEnd()).set_parse_action(
            lambda t: [("incl", t[0])])
    )).set_parse_action(lambda t: _finish_role_axiom(t[0], t[1]))
    concept_axiom = (concept + subsumes + concept).set_parse_action(
        lambda t: ConceptInclusion(t[0], t[1]))

    return (role_axiom | concept_axiom) + pp.StringEnd()


def _finish_role_axiom(lhs: Role, rhs: tuple):
    if rhs[0] == "dep":
        return Dependency(lhs, rhs[1], rhs[2])
    if rhs[0] == "domrange":
        return DomainRange(lhs, rhs[1], rhs[2])
    r = rhs[1]
    if lhs.level is not None and r.level is None:
        raise IllegalDistinguishedUse(
            f"{lhs.name} [= {r.name}: a distinguished role cannot be "
            f"included in a free role")
    return RoleInclusion(lhs, r)


_GRAMMAR = _build_grammar()


def parse_kb(text: str) -> KnowledgeBase:
    """One axiom per line; blank lines and '#' comments are skipped."""
    axioms: list[Axiom] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            got = _GRAMMAR.parse_string(stripped, parse_all=True)
        except pp.ParseException as e:
            raise SyntaxError(f"line {no}: {e.msg} (col {e.col})") from None
        axioms.append(got[0])
    return KnowledgeBase(tuple(axioms))


# ---------------------------------------------------------------------------
# Translation
# ---------------------------------------------------------------------------

def _role_atom(r: Role, a: str, b: str) -> Atom:
    args = (Var(b), Var(a)) if r.inverse else (Var(a), Var(b))
    return Atom(r.name, args)


class _Names:
    def __init__(self, taken: set[str]):
        self.taken = taken
        self.defs: list[Formula] = []
        self.by_concept: dict = {}

    def fresh(self, stem: str) -> str:
        i = 0
        while True:
            i += 1
            name = f"{stem}{i}"
            if name not in self.taken and distinguished_level(name) is None:
                self.taken.add(name)
                return name


def _collect_names(kb: KnowledgeBase) -> set[str]:
    out: set[str] = set()

    def of_concept(c):
        if isinstance(c, CName):
            out.add(c.name)
        elif isinstance(c, CNot):
            of_concept(c.sub)
        elif isinstance(c, (CAnd, COr)):
            for a in c.args:
                of_concept(a)
        elif isinstance(c, (CExists, CForAll)):
            out.add(c.role.name)
            of_concept(c.sub)

    for ax in kb.axioms:
        if isinstance(ax, ConceptInclusion):
            of_concept(ax.left)
            of_concept(ax.right)
        elif isinstance(ax, RoleInclusion):
            out.update((ax.left.name, ax.right.name))
        elif isinstance(ax, DomainRange):
            out.update((ax.role.name, ax.domain, ax.range))
        else:
            out.update((ax.role.name, ax.p.name, ax.q.name))
    return out


def _concept_ref(c, v: str, names: _Names) -> Formula:
    """Formula standing for membership of v in c: atomic concepts inline,
    every complex concept gets one fresh unary defined once."""
    if isinstance(c, CName):
        return Atom(c.name, (Var(v),))
    if isinstance(c, CTop):
        return TrueF()
    if isinstance(c, CBot):
        return FalseF()
    key = c
    if key not in names.by_concept:
        n = names.fresh("N")
        names.by_concept[key] = n
        names.defs.append(ForAll(("x",), Iff(
            Atom(n, (Var("x"),)), _concept_body(c, "x", names))))
    return Atom(names.by_concept[key], (Var(v),))


def _concept_body(c, v: str, names: _Names) -> Formula:
    if isinstance(c, CNot):
        return Not(_concept_ref(c.sub, v, names))
    if isinstance(c, CAnd):
        return conj(*(_concept_ref(a, v, names) for a in c.args))
    if isinstance(c, COr):
        return disj(*(_concept_ref(a, v, names) for a in c.args))
    w = "y" if v == "x" else "z"
    if isinstance(c, CExists):
        return Exists((w,), conj(_role_atom(c.role, v, w),
                                 _concept_ref(c.sub, w, names)))
    if isinstance(c, CForAll):
        return ForAll((w,), Implies(_role_atom(c.role, v, w),
                                    _concept_ref(c.sub, w, names)))
    raise TypeError(f"not a concept: {c!r}")


def translate_kb(kb: KnowledgeBase) -> Sentence:
    """Guarded translation; the knowledge base is consistent exactly when
    the sentence is satisfiable.  Uses at most the variables x, y, z."""
    names = _Names(_collect_names(kb))
    parts: list[Formula] = []
    x, y, z = Var("x"), Var("y"), Var("z")
    for ax in kb.axioms:
        if isinstance(ax, ConceptInclusion):
            parts.append(ForAll(("x",), Implies(
                _concept_ref(ax.left, "x", names),
                _concept_ref(ax.right, "x", names))))
        elif isinstance(ax, RoleInclusion):
            parts.append(ForAll(("x", "y"), Implies(
                _role_atom(ax.left, "x", "y"),
                _role_atom(ax.right, "x", "y"))))
        elif isinstance(ax, DomainRange):
            parts.append(ForAll(("x", "y"), Implies(
                _role_atom(ax.role, "x", "y"),
                conj(Atom(ax.domain, (x,)), Atom(ax.range, (y,))))))
        else:
            g = names.fresh("Guard")
            parts.append(ForAll(("x", "y"), Implies(
                _role_atom(ax.role, "x", "y"),
                Exists(("z",), conj(Atom(g, (x, y, z)),
                                    _role_atom(ax.p, "x", "z"),
                                    _role_atom(ax.q, "y", "z"))))))
    formula = conj(*(parts + names.defs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonContiguousDistinguished)
        sig = signature_of(formula)
    levels = tuple(Symbol(f"E{k}", 2, "eq")
                   for k in range(1, max(kb.K, 1) + 1))
    return Sentence(formula, sig.with_symbols(levels))
