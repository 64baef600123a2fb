"""Normal-form compilation for guarded sentences over nested equivalences.

The target shape is a conjunction of universal conjuncts
forall v1..vw (F -> chi) with chi quantifier-free, plus existential
conjuncts forall v1..vw (G -> exists y psi) where psi is quantifier-free,
mentions at most the guard variables plus y, and contains a positive atom
covering all of them (a fresh covering atom is conjoined when the body has
none).

The compilation keeps already-shaped conjuncts as they are, splits
conjunctions under a shared guard, and renames every other quantified
subformula with one fresh relation symbol over its free variables.
Negations are pushed down to quantifier boundaries only; quantifier-free
subtrees pass through untouched, so universal bodies may keep -> and <->.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import (
    NonContiguousDistinguished,
    NotGuarded,
    RequiresDistinguished,
)
from .syntax import (
    And,
    Atom,
    Exists,
    FalseF,
    ForAll,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Sentence,
    Signature,
    Symbol,
    TrueF,
    Var,
    check_guardedness,
    conj,
    disj,
    free_vars,
    render,
    signature_of,
)

WITNESS_VAR = "y"


@dataclass(frozen=True)
class UniversalConjunct:
    """forall vars (guard -> body); guard covers vars, fv(body) <= vars."""
    guard: Atom
    vars: tuple[str, ...]
    body: Formula

    @property
    def width(self) -> int:
        return len(self.vars)

    def formula(self) -> Formula:
        inner = Implies(self.guard, self.body)
        return ForAll(self.vars, inner) if self.vars else inner


@dataclass(frozen=True)
class ExistentialConjunct:
    """forall vars (guard -> exists y body); fv(body) - {y} <= vars and
    body carries a positive atom over vars + {y}."""
    guard: Atom
    vars: tuple[str, ...]
    body: Formula
    y: str = WITNESS_VAR

    @property
    def width(self) -> int:
        return len(self.vars)

    def formula(self) -> Formula:
        inner = Implies(self.guard, Exists((self.y,), self.body))
        return ForAll(self.vars, inner) if self.vars else inner


@dataclass(frozen=True)
class NormalForm:
    sig: Signature
    universals: tuple[UniversalConjunct, ...]
    existentials: tuple[ExistentialConjunct, ...]
    fresh: tuple[tuple[str, str], ...]  # (symbol, what it stands for)

    @property
    def m(self) -> int:
        """Type width: the most variables any single conjunct needs."""
        widths = [u.width for u in self.universals]
        widths += [e.width + 1 for e in self.existentials]
        return max(widths, default=1)

    def conjuncts(self):
        yield from self.universals
        yield from self.existentials

    def formula(self) -> Formula:
        return conj(*(c.formula() for c in self.conjuncts()))

    def to_sentence(self) -> Sentence:
        return Sentence(self.formula(), self.sig)

    def atom_shapes(self):
        """Every atom in the conjuncts, as (pred, arg-name tuple)."""
        seen = set()
        for c in self.conjuncts():
            for f in (c.guard, c.body):
                for a in _atoms(f):
                    key = (a.pred, tuple(t.name for t in a.args))
                    if key not in seen:
                        seen.add(key)
                        yield key

    def fresh_json(self) -> dict:
        return dict(self.fresh)

    def check(self) -> list[str]:
        """Shape-invariant violations (empty = well-formed)."""
        out = []
        for i, u in enumerate(self.universals):
            if not set(u.vars) <= u.guard.var_names():
                out.append(f"universal {i}: guard does not cover variables")
            if not free_vars(u.body) <= set(u.vars):
                out.append(f"universal {i}: body has stray free variables")
            if _has_quantifier(u.body):
                out.append(f"universal {i}: body not quantifier-free")
        for i, e in enumerate(self.existentials):
            if not e.guard.var_names() <= set(e.vars):
                out.append(f"existential {i}: guard uses stray variables")
            if not free_vars(e.body) <= set(e.vars) | {e.y}:
                out.append(f"existential {i}: body has stray free variables")
            if _has_quantifier(e.body):
                out.append(f"existential {i}: body not quantifier-free")
            need = frozenset(e.vars) | {e.y}
            if _covering_atom(e.body, need) is None:
                out.append(f"existential {i}: no covering atom")
        return out


def _atoms(f: Formula):
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from _atoms(f.sub)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from _atoms(a)
    elif isinstance(f, (Implies, Iff)):
        yield from _atoms(f.left)
        yield from _atoms(f.right)
    elif isinstance(f, (ForAll, Exists)):
        yield from _atoms(f.body)


def _has_quantifier(f: Formula) -> bool:
    if isinstance(f, (ForAll, Exists)):
        return True
    if isinstance(f, Not):
        return _has_quantifier(f.sub)
    if isinstance(f, (And, Or)):
        return any(_has_quantifier(a) for a in f.args)
    if isinstance(f, (Implies, Iff)):
        return _has_quantifier(f.left) or _has_quantifier(f.right)
    return False


def _subst(f: Formula, m: dict[str, str]) -> Formula:
    """Simultaneously rename free variable occurrences; bound names shadow."""
    if not m:
        return f
    if isinstance(f, Atom):
        args = tuple(
            Var(m[t.name]) if isinstance(t, Var) and t.name in m else t
            for t in f.args
        )
        return Atom(f.pred, args)
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Not):
        return Not(_subst(f.sub, m))
    if isinstance(f, And):
        return And(tuple(_subst(a, m) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(_subst(a, m) for a in f.args))
    if isinstance(f, Implies):
        return Implies(_subst(f.left, m), _subst(f.right, m))
    if isinstance(f, Iff):
        return Iff(_subst(f.left, m), _subst(f.right, m))
    if isinstance(f, (ForAll, Exists)):
        inner = {k: v for k, v in m.items() if k not in f.vars}
        return type(f)(f.vars, _subst(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


class _NamePool:
    """Fresh variable names u1, u2, ... shared by rectification and the
    synthetic wrappers, so no two binders ever collide."""

    def __init__(self):
        self.n = 0

    def var(self) -> str:
        self.n += 1
        return f"u{self.n}"


def _rectify(f: Formula, pool: _NamePool, env: dict[str, str]) -> Formula:
    """Rename every bound variable to a pool-fresh name."""
    if isinstance(f, Atom):
        args = tuple(
            Var(env[t.name]) if isinstance(t, Var) else t for t in f.args
        )
        return Atom(f.pred, args)
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Not):
        return Not(_rectify(f.sub, pool, env))
    if isinstance(f, And):
        return And(tuple(_rectify(a, pool, env) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(_rectify(a, pool, env) for a in f.args))
    if isinstance(f, Implies):
        return Implies(_rectify(f.left, pool, env), _rectify(f.right, pool, env))
    if isinstance(f, Iff):
        return Iff(_rectify(f.left, pool, env), _rectify(f.right, pool, env))
    if isinstance(f, (ForAll, Exists)):
        env2 = dict(env)
        fresh = tuple(pool.var() for _ in f.vars)
        env2.update(zip(f.vars, fresh))
        return type(f)(fresh, _rectify(f.body, pool, env2))
    raise TypeError(f"not a formula: {f!r}")


def _nnf(f: Formula, pos: bool = True) -> Formula:
    """Push negations down to quantifier boundaries; quantifier-free
    subtrees are opaque leaves."""
    if not _has_quantifier(f):
        if pos:
            return f
        return f.sub if isinstance(f, Not) else Not(f)
    if isinstance(f, Not):
        return _nnf(f.sub, not pos)
    if isinstance(f, And):
        parts = tuple(_nnf(a, pos) for a in f.args)
        return conj(*parts) if pos else disj(*parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(a, pos) for a in f.args)
        return disj(*parts) if pos else conj(*parts)
    if isinstance(f, Implies):
        if pos:
            return disj(_nnf(f.left, False), _nnf(f.right, True))
        return conj(_nnf(f.left, True), _nnf(f.right, False))
    if isinstance(f, Iff):
        if pos:
            return conj(
                disj(_nnf(f.left, False), _nnf(f.right, True)),
                disj(_nnf(f.right, False), _nnf(f.left, True)),
            )
        return disj(
            conj(_nnf(f.left, True), _nnf(f.right, False)),
            conj(_nnf(f.right, True), _nnf(f.left, False)),
        )
    if isinstance(f, ForAll):
        if pos:
            if isinstance(f.body, Implies) and isinstance(f.body.left, Atom):
                # keep the guard in antecedent position
                return ForAll(
                    f.vars, Implies(f.body.left, _nnf(f.body.right, True)))
            return ForAll(f.vars, _nnf(f.body, True))
        if isinstance(f.body, Implies) and isinstance(f.body.left, Atom):
            # keep the guard leftmost in the dual
            return Exists(
                f.vars, conj(f.body.left, _nnf(f.body.right, False)))
        return Exists(f.vars, _nnf(f.body, False))
    if isinstance(f, Exists):
        if pos:
            return Exists(f.vars, _nnf(f.body, True))
        g = f.guard
        if g is not None:
            rest = [a for a in f.body.args if a is not g] \
                if isinstance(f.body, And) else []
            return ForAll(
                f.vars, Implies(g, _nnf(conj(*rest), False))
                if rest else Implies(g, FalseF()))
        return ForAll(f.vars, _nnf(f.body, False))
    raise TypeError(f"not a formula: {f!r}")


def _covering_atom(body: Formula, need: frozenset) -> Atom | None:
    """A positive conjunct atom of body mentioning every name in need."""
    if isinstance(body, Atom):
        return body if need <= body.var_names() else None
    if isinstance(body, And):
        for a in body.args:
            if isinstance(a, Atom) and need <= a.var_names():
                return a
    return None


def _split_guard(vars_: tuple[str, ...], body: Formula):
    """(covering atom, rest conjuncts) of an existential body, or None."""
    if isinstance(body, Atom):
        if frozenset(vars_) <= body.var_names():
            return body, []
        return None
    if isinstance(body, And):
        for i, c in enumerate(body.args):
            if not isinstance(c, Atom):
                continue
            rest = [a for j, a in enumerate(body.args) if j != i]
            need = frozenset(vars_)
            for r in rest:
                need |= free_vars(r)
            if need <= c.var_names():
                return c, rest
    return None


class _Compiler:
    def __init__(self, sig: Signature, pool: _NamePool):
        self.pool = pool
        self.taken = {s.name for s in sig.symbols}
        self.universals: list[UniversalConjunct] = []
        self.existentials: list[ExistentialConjunct] = []
        self.fresh: list[tuple[str, str]] = []
        self.named: dict[tuple, str] = {}
        self.counters = {"H": 0, "D": 0}

    def fresh_name(self, stem: str, what: str) -> str:
        while True:
            self.counters[stem] += 1
            name = f"{stem}{self.counters[stem]}"
            if name not in self.taken:
                break
        self.taken.add(name)
        self.fresh.append((name, what))
        return name

    # -- conjunct emission, canonical per-conjunct variable names -----------

    @staticmethod
    def canonical(guard: Atom, vars_: tuple[str, ...]) -> dict[str, str]:
        """Quantified variables -> v1..vw in guard-argument order."""
        order = []
        for t in guard.args:
            if isinstance(t, Var) and t.name in vars_ and t.name not in order:
                order.append(t.name)
        for v in vars_:
            if v not in order:
                order.append(v)
        return {v: f"v{i + 1}" for i, v in enumerate(order)}

    def emit_universal(self, guard: Atom, vars_: tuple[str, ...],
                       body: Formula):
        ren = self.canonical(guard, vars_)
        self.universals.append(UniversalConjunct(
            _subst(guard, ren),
            tuple(sorted((ren[v] for v in vars_),
                         key=lambda n: int(n[1:]))),
            _subst(body, ren),
        ))

    def emit_existential(self, guard: Atom, vars_: tuple[str, ...],
                         body: Formula, witness: str):
        """body quantifier-free over vars_ + {witness}; a covering atom is
        conjoined if missing."""
        ren = self.canonical(guard, vars_)
        ren[witness] = WITNESS_VAR
        body = _subst(body, ren)
        guard = _subst(guard, ren)
        canon = tuple(sorted((v for v in ren.values() if v != WITNESS_VAR),
                             key=lambda n: int(n[1:])))
        need = frozenset(canon) | {WITNESS_VAR}
        if _covering_atom(body, need) is None:
            d = self.fresh_name("D", "covering atom for a witness conjunct")
            cover = Atom(d, tuple(Var(v) for v in canon) + (Var(WITNESS_VAR),))
            body = conj(cover, *_conjuncts(body))
        self.existentials.append(ExistentialConjunct(guard, canon, body))

    # -- structural renaming -------------------------------------------------

    def name_subformula(self, f: Formula) -> Atom:
        """Fresh atom H(fv(f)) defined to imply f; one name per subformula."""
        fvs = tuple(sorted(free_vars(f)))
        key = (render(f), fvs)
        if key in self.named:
            return Atom(self.named[key], tuple(Var(v) for v in fvs))
        name = self.fresh_name("H", f"stands for {render(f)}")
        self.named[key] = name
        h = Atom(name, tuple(Var(v) for v in fvs))
        if isinstance(f, ForAll):
            self.define_universal_sub(h, f)
        elif isinstance(f, Exists):
            self.chain(h, f.vars, f.body)
        else:
            raise AssertionError("only quantified subformulas are named")
        return h

    def define_universal_sub(self, h: Atom, f: ForAll):
        """h -> forall zs (...), merged into one conjunct guarded by the
        subformula's own guard (which covers fv(h))."""
        g = f.guard
        if g is not None:
            merged = tuple(sorted(free_vars(f))) + f.vars
            self.handle_universal(g, merged, disj(Not(h), f.body.right))
            return
        if len(f.vars) == 1 and free_vars(f.body) <= set(f.vars):
            # h is nullary here, so a reflexive guard still covers everything
            x = f.vars[0]
            g = Atom("E1", (Var(x), Var(x)))
            self.handle_universal(g, f.vars, disj(Not(h), f.body))
            return
        raise NotGuarded(f"unguarded universal subformula: {render(f)}")

    def strip(self, f: Formula) -> Formula:
        """Replace quantified subformulas (positive after negation pushing)
        by naming atoms; result is quantifier-free."""
        if not _has_quantifier(f):
            return f
        if isinstance(f, And):
            return conj(*(self.strip(a) for a in f.args))
        if isinstance(f, Or):
            return disj(*(self.strip(a) for a in f.args))
        if isinstance(f, (ForAll, Exists)):
            return self.name_subformula(f)
        raise NotGuarded(
            f"negated quantifier survived negation pushing: {render(f)}")

    # -- existential chains ---------------------------------------------------

    def chain(self, hatom: Atom, zvars: tuple[str, ...], zbody: Formula):
        """Obligation forall vars(hatom) (hatom -> exists zvars zbody),
        peeled one witness variable at a time."""
        xvars = tuple(dict.fromkeys(
            t.name for t in hatom.args if isinstance(t, Var)))
        if len(zvars) == 1:
            z = zvars[0]
            split = _split_guard((z,), zbody)
            if split is not None:
                g2, rest = split
                psi = conj(g2, *(self.strip(r) for r in rest))
            elif free_vars(zbody) <= {z}:
                psi = self.strip(_nnf(zbody))
            else:
                raise NotGuarded(
                    f"unguarded existential: {render(Exists(zvars, zbody))}")
            self.emit_existential(hatom, xvars, psi, witness=z)
            return
        z1 = zvars[0]
        step = self.fresh_name(
            "H", f"chain step for {render(Exists(zvars, zbody))}")
        head = tuple(Var(v) for v in xvars)
        self.emit_existential(
            hatom, xvars, Atom(step, head + (Var(z1),)), witness=z1)
        self.chain(Atom(step, head + (Var(z1),)), zvars[1:], zbody)

    # -- block dispatch ---------------------------------------------------------

    def handle_universal(self, guard: Atom, vars_: tuple[str, ...],
                         rest: Formula):
        for piece in _conjuncts(rest):
            if not _has_quantifier(piece):
                self.emit_universal(guard, vars_, piece)
            elif isinstance(piece, Exists):
                self.chain(guard, piece.vars, piece.body)
            else:
                self.emit_universal(guard, vars_, self.strip(piece))

    def handle_block(self, b: Formula):
        if not _has_quantifier(b):
            # closed fact, asserted on every element via a reflexive guard
            u = self.pool.var()
            self.handle_universal(Atom("E1", (Var(u), Var(u))), (u,), b)
            return
        if isinstance(b, ForAll):
            g = b.guard
            if g is not None:
                self.handle_universal(g, b.vars, b.body.right)
                return
            if len(b.vars) == 1 and free_vars(b.body) <= set(b.vars):
                x = b.vars[0]
                self.handle_universal(
                    Atom("E1", (Var(x), Var(x))), b.vars, b.body)
                return
            raise NotGuarded(f"unguarded universal: {render(b)}")
        if isinstance(b, Exists):
            # closed existential: fire it from every element
            u = self.pool.var()
            self.chain(Atom("E1", (Var(u), Var(u))), b.vars, b.body)
            return
        # disjunctive or otherwise mixed closed block
        u = self.pool.var()
        self.handle_universal(
            Atom("E1", (Var(u), Var(u))), (u,), self.strip(b))


def _conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return list(f.args)
    if isinstance(f, TrueF):
        return []
    return [f]


def _quiet_signature(formula: Formula, base: Signature,
                     extra: tuple = ()) -> Signature:
    """Signature of formula merged with the declared symbols; contiguity
    refills are expected here, so the warning is suppressed."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonContiguousDistinguished)
        sig = signature_of(formula)
    return sig.with_symbols(base.symbols + tuple(extra))


def to_normal_form(s: Sentence) -> NormalForm:
    if s.sig.K == 0:
        raise RequiresDistinguished(
            "normalization guards sentence-level facts with the reflexive "
            "atom E1(x,x); declare at least one distinguished symbol")
    report = check_guardedness(s)
    if not report.ok:
        v = report.violations[0]
        raise NotGuarded(f"{v.reason} at {v.path}")
    pool = _NamePool()
    comp = _Compiler(s.sig, pool)
    rectified = _rectify(s.formula, pool, {})
    for block in _conjuncts(_nnf(rectified)):
        comp.handle_block(block)
    nf_sig_formula = conj(
        *(c.formula() for c in comp.universals),
        *(c.formula() for c in comp.existentials))
    sig = _quiet_signature(nf_sig_formula, s.sig)
    return NormalForm(sig, tuple(comp.universals), tuple(comp.existentials),
                      tuple(comp.fresh))


def auto_guard(s: Sentence) -> Sentence:
    """Conjoin a fresh covering atom into each unguarded existential.

    Universals are left alone: a synthetic antecedent would weaken them.
    """
    taken = {sym.name for sym in s.sig.symbols}
    counter = [0]

    def fresh() -> str:
        while True:
            counter[0] += 1
            name = f"D{counter[0]}"
            if name not in taken:
                taken.add(name)
                return name

    def rec(f: Formula) -> Formula:
        if isinstance(f, (Atom, TrueF, FalseF)):
            return f
        if isinstance(f, Not):
            return Not(rec(f.sub))
        if isinstance(f, And):
            return And(tuple(rec(a) for a in f.args))
        if isinstance(f, Or):
            return Or(tuple(rec(a) for a in f.args))
        if isinstance(f, Implies):
            return Implies(rec(f.left), rec(f.right))
        if isinstance(f, Iff):
            return Iff(rec(f.left), rec(f.right))
        if isinstance(f, ForAll):
            return ForAll(f.vars, rec(f.body))
        if isinstance(f, Exists):
            body = rec(f.body)
            q = Exists(f.vars, body)
            if q.guard is not None:
                return q
            if len(f.vars) == 1 and free_vars(body) <= set(f.vars):
                return q
            names = list(f.vars) + sorted(free_vars(body) - set(f.vars))
            cover = Atom(fresh(), tuple(Var(v) for v in names))
            return Exists(f.vars, conj(cover, *_conjuncts(body)))
        raise TypeError(f"not a formula: {f!r}")

    out = rec(s.formula)
    if out == s.formula:
        return s
    return Sentence(out, _quiet_signature(out, s.sig))


def relativize(s: Sentence) -> Sentence:
    """Embed into the fragment with one more distinguished level:
    quantifiers lacking a guard get relativized by the new coarsest
    symbol, witnesses linked into the class of their first parameter."""
    new = f"E{s.sig.K + 1}"
    taken = {sym.name for sym in s.sig.symbols}
    counter = [0]

    def fresh_dummy() -> str:
        while True:
            counter[0] += 1
            name = f"G{counter[0]}"
            if name not in taken:
                taken.add(name)
                return name

    def e(a: str, b: str) -> Atom:
        return Atom(new, (Var(a), Var(b)))

    def rec(f: Formula) -> Formula:
        if isinstance(f, (Atom, TrueF, FalseF)):
            return f
        if isinstance(f, Not):
            return Not(rec(f.sub))
        if isinstance(f, And):
            return And(tuple(rec(a) for a in f.args))
        if isinstance(f, Or):
            return Or(tuple(rec(a) for a in f.args))
        if isinstance(f, Implies):
            return Implies(rec(f.left), rec(f.right))
        if isinstance(f, Iff):
            return Iff(rec(f.left), rec(f.right))
        if isinstance(f, ForAll):
            if f.guard is not None:
                return ForAll(f.vars, Implies(f.body.left, rec(f.body.right)))
            if len(f.vars) == 1:
                x = f.vars[0]
                return ForAll(f.vars, Implies(e(x, x), rec(f.body)))
            if len(f.vars) == 2 and free_vars(f.body) <= set(f.vars):
                return ForAll(
                    f.vars, Implies(e(f.vars[0], f.vars[1]), rec(f.body)))
            raise NotGuarded(
                f"cannot relativize a width-{len(f.vars)} universal with a "
                f"binary symbol: {render(f)}")
        if isinstance(f, Exists):
            body = rec(f.body)
            if Exists(f.vars, body).guard is not None:
                return Exists(f.vars, body)
            if len(f.vars) == 1 and free_vars(body) <= set(f.vars):
                return Exists(f.vars, body)
            fvs = sorted(free_vars(Exists(f.vars, body)))
            anchor = fvs[0] if fvs else None
            links = [e(anchor, z) if anchor is not None else e(z, z)
                     for z in f.vars]
            names = fvs + list(f.vars)
            cover = Atom(fresh_dummy(), tuple(Var(v) for v in names))
            return Exists(f.vars, conj(cover, *links, *_conjuncts(body)))
        raise TypeError(f"not a formula: {f!r}")

    out = rec(s.formula)
    extra = (Symbol(new, 2, "eq"),)
    return Sentence(out, _quiet_signature(out, s.sig, extra))
