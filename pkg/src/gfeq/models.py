"""Finite structures with nested-equivalence semantics.

Validation, model checking, brute-force model search (the independent
oracle used throughout the test suite), and witness-driven model
extraction.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

from .errors import BudgetExceeded, UninterpretedSymbol, WitnessIncoherent
from .semantics import eval3
from .syntax import (
    And,
    Atom,
    Const,
    Exists,
    ForAll,
    Formula,
    Sentence,
    Signature,
    Var,
    distinguished_level,
)
from .types import element_type, partition_chains


# ---------------------------------------------------------------------------
# Structures
# ---------------------------------------------------------------------------

@dataclass
class Structure:
    domain: tuple[str, ...]
    constants: dict[str, str]
    relations: dict[str, frozenset]

    def __post_init__(self):
        self.domain = tuple(self.domain)
        self.relations = {
            r: frozenset(tuple(t) for t in ts) for r, ts in self.relations.items()
        }

    def to_json(self) -> str:
        return json.dumps(
            {
                "domain": list(self.domain),
                "constants": dict(sorted(self.constants.items())),
                "relations": {
                    r: sorted(list(t) for t in ts)
                    for r, ts in sorted(self.relations.items())
                },
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Structure":
        d = json.loads(text)
        return cls(
            tuple(d["domain"]),
            dict(d.get("constants", {})),
            {r: frozenset(tuple(t) for t in ts)
             for r, ts in d.get("relations", {}).items()},
        )


def validate_structure(st: Structure, sig: Signature) -> list[str]:
    """Semantic violations (empty list = ok): arity conformance, equivalence
    axioms per distinguished level, nesting inclusions, constant injectivity.
    """
    out = []
    dom = set(st.domain)
    for c in sig.cons:
        e = st.constants.get(c.name)
        if e is None:
            out.append(f"constant {c.name} not mapped")
        elif e not in dom:
            out.append(f"constant {c.name} mapped outside the domain")
    named = [e for e in st.constants.values()]
    if len(named) != len(set(named)):
        out.append("constant map is not injective")

    for s in sig.symbols:
        if s.kind == "const":
            continue
        for t in st.relations.get(s.name, ()):  # type: ignore[arg-type]
            if len(t) != s.arity:
                out.append(f"{s.name} tuple {t} has arity {len(t)}, expected {s.arity}")
            elif any(e not in dom for e in t):
                out.append(f"{s.name} tuple {t} mentions unknown elements")

    levels = [s.level for s in sig.eqs]
    for k in levels:
        r = st.relations.get(f"E{k}", frozenset())
        for a in st.domain:
            if (a, a) not in r:
                out.append(f"E{k} not reflexive at {a}")
        for (a, b) in r:
            if (b, a) not in r:
                out.append(f"E{k} not symmetric at ({a},{b})")
        for (a, b) in r:
            for (c, d) in r:
                if b == c and (a, d) not in r:
                    out.append(f"E{k} not transitive at ({a},{b},{d})")
    for k in levels:
        if k + 1 in levels:
            fine = st.relations.get(f"E{k}", frozenset())
            coarse = st.relations.get(f"E{k + 1}", frozenset())
            for p in fine:
                if p not in coarse:
                    out.append(f"E{k}({p[0]},{p[1]}) not included in E{k + 1}")
    return out


def evaluate(st: Structure, s: Sentence | Formula, env: dict | None = None) -> bool:
    """Standard first-order truth value of s in st."""
    f = s.formula if isinstance(s, Sentence) else s
    if isinstance(s, Sentence):
        for sym in s.sig.symbols:
            if sym.kind != "const" and sym.name not in st.relations:
                raise UninterpretedSymbol(sym.name)
            if sym.kind == "const" and sym.name not in st.constants:
                raise UninterpretedSymbol(sym.name)

    def atom_fn(pred, elems):
        rel = st.relations.get(pred)
        if rel is None:
            raise UninterpretedSymbol(pred)
        return elems in rel

    def const_fn(name):
        try:
            return st.constants[name]
        except KeyError:
            raise UninterpretedSymbol(name) from None

    v = eval3(f, atom_fn, st.domain, env or {}, const_fn)
    assert v is not None
    return v


def class_sort(st: Structure, a: str, sig: Signature) -> frozenset:
    """The set of 1-types realized by unnamed members of a's E1-class."""
    named = set(st.constants.values())
    e1 = st.relations.get("E1", frozenset())
    return frozenset(
        element_type(st, b, sig)
        for b in st.domain
        if b not in named and (a, b) in e1
    )


# ---------------------------------------------------------------------------
# Brute-force model search
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, cap):
        self.cap = cap
        self.used = 0
        self.lock = threading.Lock()

    def spend(self, n=1):
        if self.cap is None:
            return
        with self.lock:
            self.used += n
            if self.used > self.cap:
                raise BudgetExceeded(
                    f"brute-force node budget {self.cap} exhausted"
                )


def _syntactic_cells(f, env, elems, consts, cell_index) -> set:
    """Indices of every free-relation cell the instance can possibly read;
    inner-quantified argument positions widen to the whole domain."""
    out: set[int] = set()
    stack = [(f, dict(env))]
    while stack:
        g, e = stack.pop()
        if isinstance(g, Atom):
            if distinguished_level(g.pred) is not None:
                continue
            slots = []
            for a in g.args:
                if isinstance(a, Const):
                    slots.append((consts[a.name],))
                elif a.name in e:
                    slots.append((e[a.name],))
                else:
                    slots.append(elems)
            for t in product(*slots):
                out.add(cell_index[(g.pred, t)])
        elif isinstance(g, (ForAll, Exists)):
            e2 = dict(e)
            for v in g.vars:
                e2.pop(v, None)
            stack.append((g.body, e2))
        else:
            for fld in g.__dataclass_fields__:
                v = getattr(g, fld)
                if isinstance(v, Formula):
                    stack.append((v, e))
                elif isinstance(v, tuple) and v and isinstance(v[0], Formula):
                    stack.extend((a, e) for a in v)
    return out


def _search_chain(formula, sig, size, chain, budget) -> Structure | None:
    """Model search over the free-relation atoms for one fixed E-partition
    chain.  Ground conjunct instances are cached three-valued and re-checked
    only when a cell they can read changes; an undetermined instance left
    with a single unassigned cell pins that cell, and pins propagate to a
    fixpoint.  The remainder branches false-first in (arity, symbol, tuple)
    cell order (unary facts first, so defined relations resolve by
    propagation), which yields the lexicographically least model of the
    chain under that order."""
    elems = tuple(range(size))
    consts = {c.name: i for i, c in enumerate(sig.cons)}
    levels = {s.level: chain[s.level - 1] for s in sig.eqs}

    cells: list[tuple[str, tuple]] = []
    for sym in sorted(sig.rels, key=lambda s: (s.arity, s.name)):
        for t in product(elems, repeat=sym.arity):
            cells.append((sym.name, t))
    cell_index = {c: i for i, c in enumerate(cells)}
    value: list[bool | None] = [None] * len(cells)

    def atom_fn(pred, es):
        lv = distinguished_level(pred)
        if lv is not None:
            part = levels.get(lv)
            if part is None:
                raise UninterpretedSymbol(pred)
            return part[es[0]] == part[es[1]]
        return value[cell_index[(pred, es)]]

    def const_fn(name):
        return consts[name]

    # ground the top-level universal blocks once per chain; the grounding
    # itself is budgeted work
    pieces = formula.args if isinstance(formula, And) else (formula,)
    est = len(cells)
    for p in pieces:
        est += size ** len(p.vars) if isinstance(p, ForAll) else 1
    budget.spend(est)
    instances: list[tuple[Formula, dict]] = []
    for p in pieces:
        if isinstance(p, ForAll):
            for env_t in product(elems, repeat=len(p.vars)):
                instances.append((p.body, dict(zip(p.vars, env_t))))
        else:
            instances.append((p, {}))

    vals: list[bool | None] = []
    reads: dict[int, list[int]] = {}
    reads_of: list[tuple[int, ...]] = []
    unknown_of: list[int] = []
    n_false = 0
    n_none = 0
    for iid, (piece, env) in enumerate(instances):
        v = eval3(piece, atom_fn, elems, env, const_fn)
        vals.append(v)
        if v is False:
            return None
        if v is True:
            # true under the empty assignment: stays true in every extension
            reads_of.append(())
            unknown_of.append(0)
            continue
        n_none += 1
        mine = tuple(sorted(
            _syntactic_cells(piece, env, elems, consts, cell_index)))
        reads_of.append(mine)
        unknown_of.append(len(mine))
        for c in mine:
            reads.setdefault(c, []).append(iid)

    # an undetermined instance with a single unassigned cell pins that cell
    queue = [iid for iid, (v, u) in enumerate(zip(vals, unknown_of))
             if v is None and u == 1]

    def recheck(iid):
        nonlocal n_false, n_none
        old = vals[iid]
        piece, env = instances[iid]
        new = eval3(piece, atom_fn, elems, env, const_fn)
        if new is old:
            return
        vals[iid] = new
        n_false += (new is False) - (old is False)
        n_none += (new is None) - (old is None)

    def set_cell(c, v):
        value[c] = v
        for iid in reads.get(c, ()):
            unknown_of[iid] -= 1
            recheck(iid)
            if vals[iid] is None and unknown_of[iid] == 1:
                queue.append(iid)

    def unset_cell(c):
        value[c] = None
        for iid in reads.get(c, ()):
            unknown_of[iid] += 1
            recheck(iid)

    def assemble() -> Structure:
        ids = tuple(f"e{i}" for i in elems)
        rels: dict[str, set] = {s.name: set() for s in sig.rels}
        for (r, t), v in zip(cells, value):
            if v:
                rels[r].add(tuple(f"e{i}" for i in t))
        for lv, part in levels.items():
            rels[f"E{lv}"] = {
                (f"e{a}", f"e{b}")
                for a in elems for b in elems if part[a] == part[b]
            }
        return Structure(
            ids,
            {c: f"e{i}" for c, i in consts.items()},
            {r: frozenset(ts) for r, ts in rels.items()},
        )

    def search() -> bool:
        budget.spend()
        if n_false:
            return False
        trail: list[int] = []
        saved_queue = list(queue)

        def undo():
            while trail:
                unset_cell(trail.pop())
            queue[:] = saved_queue

        while n_none:
            if not queue:
                break
            iid = queue.pop()
            if vals[iid] is not None or unknown_of[iid] != 1:
                continue
            c = next(x for x in reads_of[iid] if value[x] is None)
            budget.spend()
            set_cell(c, False)
            if n_false:
                unset_cell(c)
                set_cell(c, True)
                if n_false:
                    unset_cell(c)
                    undo()
                    return False
            trail.append(c)
        if n_false:
            undo()
            return False
        if not n_none:
            for j in range(len(cells)):
                if value[j] is None:
                    value[j] = False
            return True
        branch = next(c for c in range(len(cells)) if value[c] is None)
        for v in (False, True):
            set_cell(branch, v)
            if not n_false and search():
                return True
            unset_cell(branch)
        undo()
        return False

    if n_false == 0 and n_none == 0:
        for j in range(len(cells)):
            value[j] = False
        return assemble()
    return assemble() if search() else None


def brute_force_search(
    s: Sentence,
    max_size: int,
    jobs: int = 1,
    node_cap: int | None = None,
) -> Structure | None:
    """Exhaustive model search over domain sizes 1..max_size.

    Structures are enumerated E-partition-chain first (canonical
    restricted-growth order), constants pinned to the first elements, free
    atoms by backtracking with three-valued pruning.  The result is
    deterministic and independent of jobs: the first chain (in canonical
    order) admitting a model wins, with the lexicographically least
    assignment for that chain.
    """
    sig = s.sig
    budget = _Budget(node_cap)
    lo = max(1, len(sig.cons))
    for size in range(lo, max_size + 1):
        chains = list(partition_chains(size, sig.K))
        if jobs <= 1:
            for chain in chains:
                got = _search_chain(s.formula, sig, size, chain, budget)
                if got is not None:
                    return got
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futs = [
                    pool.submit(_search_chain, s.formula, sig, size, chain, budget)
                    for chain in chains
                ]
                for fut in futs:  # submission order = canonical order
                    got = fut.result()
                    if got is not None:
                        for other in futs:
                            other.cancel()
                        return got
    return None


# ---------------------------------------------------------------------------
# Witness-driven model extraction (chain construction)
# ---------------------------------------------------------------------------

@dataclass
class PartialStructure:
    structure: Structure
    pending: int
    deficits: dict
    note: str = "budget exhausted before quiescence"


def build_from_witness(omega, nf, budget: int = 200):
    """Greedy chain construction from a satisfiability witness.

    Seeds one realization of a minimal labelled type, then repeatedly takes
    the oldest unsatisfied (assignment, existential-conjunct) pair, adds one
    fresh witness element typed by a canonical extension drawn from omega,
    and completes the E1-class links of the newcomer with completion
    2-types.  Returns a Structure at quiescence, or a PartialStructure when
    the step budget runs out (the greedy chain need not terminate).

    omega is a decide.WitnessSet; a missing extension or completion means
    the set was not closed after all and raises WitnessIncoherent.
    """
    from .types import LabelledType, type_from_lookup

    sig = omega.sig
    alpha = omega.alpha
    cons = [c.name for c in sig.cons]

    seed = omega.initial_type()
    if seed is None:
        raise WitnessIncoherent("witness set has no width-1 member")

    elements: list[str] = list(cons)  # constants are named elements
    labels: dict[str, int] = {}
    atoms: dict[tuple, bool] = {}

    def atom_true(pred, es):
        return atoms.get((pred, tuple(es)), False)

    def set_atoms_from_type(t, elem_of_token: dict):
        """Copy every literal of t into the structure under the token map."""
        for pred, args, val in t.literals():
            key = (pred, tuple(elem_of_token[a] for a in args))
            old = atoms.get(key)
            if old is not None and old != val:
                raise WitnessIncoherent(
                    f"conflicting assignment for {key}: {old} vs {val}")
            atoms[key] = val

    def fresh(token, t: LabelledType) -> str:
        e = f"e{sum(1 for x in elements if x not in cons)}"
        elements.append(e)
        labels[e] = t.label_of(token)
        return e

    def realized(elems: tuple[str, ...]) -> LabelledType:
        """Labelled type of distinct unnamed elems, labels from bookkeeping."""
        sp_tokens = tuple(f"x{i + 1}" for i in range(len(elems)))
        elem_of = dict(zip(sp_tokens, elems))
        for c in cons:
            elem_of[c] = c
        tau = type_from_lookup(
            sig, len(elems),
            lambda p, a: atom_true(p, tuple(elem_of[x] for x in a)))
        lab = tuple(labels[elem_of[t]] for t in sp_tokens + tuple(cons))
        return LabelledType(tau, lab)

    # seed: constants plus one unnamed element realizing the minimal 1-type
    emap = {c: c for c in cons}
    e0 = fresh("x1", seed)
    emap["x1"] = e0
    for c in cons:
        labels[c] = seed.label_of(c)
    set_atoms_from_type(seed, emap)

    def find_witness(ex, env0):
        for e in elements:
            env = dict(env0)
            env["y"] = e
            if eval3(ex.body, lambda p, es: atom_true(p, es),
                     elements, env, lambda c: c) is True:
                return e
        return None

    def unsatisfied():
        """All currently unwitnessed (f, conjunct-index) pairs, in a stable
        deterministic order."""
        out = []
        for ti, ex in enumerate(nf.existentials):
            for f_elems in product(elements, repeat=len(ex.vars)):
                env = dict(zip(ex.vars, f_elems))
                if eval3(ex.guard, lambda p, es: atom_true(p, es),
                         elements, env, lambda c: c) is not True:
                    continue
                if find_witness(ex, env) is None:
                    out.append((f_elems, ti))
        return out

    steps = 0
    queue: list = []
    queued = set()

    while True:
        pending = unsatisfied()
        if not pending:
            break
        if steps >= budget:
            deficits: dict[int, int] = {}
            for _, ti in pending:
                deficits[ti] = deficits.get(ti, 0) + 1
            return PartialStructure(_assemble(elements, cons, atoms, sig),
                                    len(pending), deficits)
        pend_set = set(pending)
        for ob in pending:  # FIFO fairness: enqueue in discovery order
            if ob not in queued:
                queued.add(ob)
                queue.append(ob)
        queue = [ob for ob in queue if ob in pend_set]
        f_elems, ti = queue[0]
        ex = nf.existentials[ti]

        # distinct unnamed elements in the image of f, in first-use order
        bbar: list[str] = []
        for e in f_elems:
            if e not in cons and e not in bbar:
                bbar.append(e)
        tau = realized(tuple(bbar))

        token_of = {e: f"x{i + 1}" for i, e in enumerate(bbar)}
        for c in cons:
            token_of[c] = c
        g = {v: token_of[e] for v, e in zip(ex.vars, f_elems)}

        tprime = omega.witness_extension(tau, ti, g)
        if tprime is None:
            raise WitnessIncoherent(
                f"no witnessing extension in omega for conjunct {ti} "
                f"at {f_elems}")
        newtok = f"x{len(bbar) + 1}"
        enew = fresh(newtok, tprime)
        emap2 = {tok: e for e, tok in token_of.items()}
        emap2[newtok] = enew
        set_atoms_from_type(tprime, emap2)

        # complete E1 links of the newcomer towards its class
        linked = [e for e, tok in token_of.items()
                  if tprime.atom_true("E1", (newtok, tok))]
        if linked:
            for b in list(elements):
                if b == enew or b in emap2.values():
                    continue
                if not atom_true("E1", (b, linked[0])):
                    continue
                a1 = alpha.index_of(realized_tp(sig, atoms, cons, b))
                a2 = tprime.tp_of(newtok, alpha)
                beta = omega.completion_2type(a1, a2, labels[enew])
                if beta is None:
                    raise WitnessIncoherent(
                        f"no completion 2-type for ({b},{enew})")
                bmap = {"x1": b, "x2": enew}
                for c in cons:
                    bmap[c] = c
                set_atoms_from_type(beta, bmap)
        steps += 1

    return _assemble(elements, cons, atoms, sig)


def realized_tp(sig: Signature, atoms: dict, cons: list, b: str) -> int:
    """Bits of the 1-type of b in a partial atom map (absent = false)."""
    from .types import type_from_lookup

    elem_of = {"x1": b}
    for c in cons:
        elem_of[c] = c
    return type_from_lookup(
        sig, 1,
        lambda p, a: atoms.get((p, tuple(elem_of[x] for x in a)), False),
    ).bits


def _assemble(elements, cons, atoms, sig: Signature) -> Structure:
    rels: dict[str, set] = {}
    for s in sig.symbols:
        if s.kind != "const":
            rels.setdefault(s.name, set())
    for (pred, es), v in atoms.items():
        if v:
            rels.setdefault(pred, set()).add(es)
    return Structure(
        tuple(elements),
        {c: c for c in cons},
        {r: frozenset(ts) for r, ts in rels.items()},
    )
