"""Elimination of the finest distinguished symbol.

Within each class of the next-coarser level, membership in the finest
relation is pinned to agreement on a block of fresh unary predicates (or,
in the succinct variant, to the equality test of the two-numeral theory).
The finest symbol itself is demoted to an ordinary free binary relation
and the remaining levels shift down by one.  Repeating the step K-1 times
leaves a single distinguished level.

The unary block has n = ceil(log2 N) predicates, where N = m * 2^|alpha|
bounds the number of finest classes a coarser class ever needs: m
realisations of each subset of 1-types suffice to reproduce witnesses, so
N colour combinations separate the classes.  By default alpha counts only
1-types distinguishable by atom shapes of the input (the relative
alphabet); the full alphabet and explicit overrides of N are available
for experiments.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import BudgetExceeded, RequiresK2
from .normalize import NormalForm, UniversalConjunct, to_normal_form
from .syntax import (
    Atom,
    Formula,
    Iff,
    Signature,
    Symbol,
    Var,
    conj,
    distinguished_level,
    sentence,
)
from .types import enumerate_1types, relative_1types


@dataclass(frozen=True)
class ReductionCertificate:
    """Record of one elimination step."""

    variant: str                     # "unary" | "numeral"
    fresh: tuple[str, ...]           # symbols added by this step
    n: int                           # colour count / numeral parameter
    N: int                           # finest-classes-per-class bound
    alpha_size: int
    renaming: tuple[tuple[str, str], ...]  # (old name, new name)

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "n": self.n,
            "N": self.N,
            "alpha": self.alpha_size,
            "fresh": list(self.fresh),
            "renaming": {a: b for a, b in self.renaming},
        }


def _rename_formula(f: Formula, mapping: dict[str, str]) -> Formula:
    if isinstance(f, Atom):
        return Atom(mapping[f.pred], f.args) if f.pred in mapping else f
    kwargs = {}
    for fld in dataclasses.fields(f):
        v = getattr(f, fld.name)
        if isinstance(v, Formula):
            v = _rename_formula(v, mapping)
        elif isinstance(v, tuple) and v and isinstance(v[0], Formula):
            v = tuple(_rename_formula(a, mapping) for a in v)
        kwargs[fld.name] = v
    return type(f)(**kwargs)


def _fresh_names(taken: set[str], base: str, count: int) -> list[str]:
    out: list[str] = []
    i = 0
    while len(out) < count:
        i += 1
        name = f"{base}{i}"
        if name not in taken and distinguished_level(name) is None:
            out.append(name)
            taken.add(name)
    return out


def _fresh_name(taken: set[str], base: str) -> str:
    if base not in taken and distinguished_level(base) is None:
        taken.add(base)
        return base
    return _fresh_names(taken, base, 1)[0]


def _shift_map(sig: Signature, taken: set[str]) -> tuple[dict[str, str], str]:
    """Demote E1 to a fresh free binary name, shift E_{k+1} down to E_k."""
    demoted = _fresh_name(taken, "F")
    mapping = {"E1": demoted}
    for s in sig.eqs:
        if s.level >= 2:
            mapping[s.name] = f"E{s.level - 1}"
    return mapping, demoted


def _alpha_and_bounds(nf: NormalForm, relative: bool, N_override: int | None,
                      alpha_cap: int) -> tuple[int, int]:
    if nf.sig.K < 2:
        raise RequiresK2("elimination needs at least two distinguished levels")
    alpha = (relative_1types(nf.sig, nf) if relative
             else enumerate_1types(nf.sig, cap=alpha_cap))
    N = N_override if N_override is not None else nf.m * (1 << len(alpha))
    if N < 1:
        raise ValueError("N must be positive")
    return len(alpha), N


def _rebuild(nf: NormalForm, mapping: dict[str, str],
             extra_universals: tuple[UniversalConjunct, ...],
             fresh_syms: list[Symbol]) -> NormalForm:
    syms = []
    for s in nf.sig.symbols:
        kind = "rel" if s.name == "E1" else s.kind
        syms.append(Symbol(mapping.get(s.name, s.name), s.arity, kind))
    syms.extend(fresh_syms)
    universals = tuple(
        UniversalConjunct(_rename_formula(u.guard, mapping), u.vars,
                          _rename_formula(u.body, mapping))
        for u in nf.universals) + extra_universals
    existentials = tuple(
        type(e)(_rename_formula(e.guard, mapping), e.vars,
                _rename_formula(e.body, mapping), e.y)
        for e in nf.existentials)
    return NormalForm(Signature(tuple(syms)), universals, existentials,
                      nf.fresh)


def eliminate_finest(nf: NormalForm, *, relative: bool = True,
                     N_override: int | None = None,
                     alpha_cap: int = 1 << 16,
                     colour_cap: int = 4096) -> tuple[NormalForm, ReductionCertificate]:
    """One unary-coding elimination step: K distinguished levels in, K-1
    out, plus a certificate of the fresh symbols and the bound used."""
    alpha_size, N = _alpha_and_bounds(nf, relative, N_override, alpha_cap)
    n = max(1, (N - 1).bit_length())
    if n > colour_cap:
        raise BudgetExceeded(
            f"elimination needs {n} colour predicates, cap {colour_cap}")

    taken = {s.name for s in nf.sig.symbols}
    colours = _fresh_names(taken, "U", n)
    mapping, demoted = _shift_map(nf.sig, taken)

    x1, x2 = Var("x1"), Var("x2")
    agree = conj(*(Iff(Atom(u, (x1,)), Atom(u, (x2,))) for u in colours))
    # names below are post-renaming: E1 here is the shifted-down old E2
    axioms = (
        UniversalConjunct(Atom(demoted, (x1, x2)), ("x1", "x2"),
                          Atom("E1", (x1, x2))),
        UniversalConjunct(Atom("E1", (x1, x2)), ("x1", "x2"),
                          Iff(Atom(demoted, (x1, x2)), agree)),
    )
    fresh_syms = [Symbol(u, 1, "rel") for u in colours]
    cert = ReductionCertificate(
        "unary", tuple(colours) + (demoted,), n, N, alpha_size,
        tuple(sorted(mapping.items())))
    out = _rebuild(nf, mapping, axioms, fresh_syms)
    return out, cert


def eliminate_finest_succinct(nf: NormalForm, *, relative: bool = True,
                              N_override: int | None = None,
                              alpha_cap: int = 1 << 16) -> tuple[NormalForm, ReductionCertificate]:
    """Elimination via the two-numeral theory: the fresh unary block is
    replaced by the equality-test predicate of an apparatus with 2^(2^n)
    counter values, shrinking the added text to O(log^2 N) at the cost of
    wider apparatus predicates and the constants 0 and 1."""
    from .generators import _NUMERAL_NAMES, _numeral_axioms

    alpha_size, N = _alpha_and_bounds(nf, relative, N_override, alpha_cap)
    # smallest address width whose 2^(2^n) counter values cover N
    n = 1
    while (1 << n) < (N - 1).bit_length():
        n += 1
    if n > 8:
        raise BudgetExceeded(
            f"numeral elimination needs address width {n}, cap 8")

    taken = {s.name for s in nf.sig.symbols}
    names = {base: _fresh_name(taken, base) for base in _NUMERAL_NAMES}
    mapping, demoted = _shift_map(nf.sig, taken)

    # the apparatus lives inside classes of the shifted-down old E2
    theory = to_normal_form(sentence(conj(
        *_numeral_axioms(n, "E1", lambda base: names[base]))))
    x1, x2 = Var("x1"), Var("x2")
    link = UniversalConjunct(
        Atom("E1", (x1, x2)), ("x1", "x2"),
        Iff(Atom(demoted, (x1, x2)), Atom(names["Q"], (x1, x2))))

    fresh_syms = [s for s in theory.sig.symbols
                  if s.name != "E1" and distinguished_level(s.name) is None]
    cert = ReductionCertificate(
        "numeral",
        tuple(sorted(s.name for s in fresh_syms)) + (demoted,),
        n, N, alpha_size, tuple(sorted(mapping.items())))
    out = _rebuild(nf, mapping, (link,) + theory.universals, fresh_syms)
    return out, cert
