"""k-types and labelled types: the state space of the decision procedure.

A k-type is a total truth assignment over all atoms whose arguments come
from {x1..xk} plus the constants; types violating the equivalence or
nesting axioms on their own domain are excluded at enumeration
(E-admissibility).  A labelled type pairs a k-type with, per domain
element, a set of 1-types declared to inhabit that element's E1-class.

Types are bit vectors against a fixed per-(signature, k) atom table, so
sets of them hash and compare deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from .errors import BudgetExceeded, NamedElementInTuple
from .semantics import eval3
from .syntax import Signature, distinguished_level


# ---------------------------------------------------------------------------
# Partition utilities (shared with the brute-force searcher)
# ---------------------------------------------------------------------------

def partitions(n: int):
    """Set partitions of range(n) as restricted-growth strings, lex order."""
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i, mx):
        if i == n:
            yield tuple(a)
            return
        for v in range(mx + 2):
            a[i] = v
            yield from rec(i + 1, max(mx, v))

    yield from rec(1, 0)


def partition_chains(n: int, K: int):
    """Nested chains of partitions of range(n): element -> class id per
    level, each level coarsening the previous."""
    if K == 0:
        yield ()
        return
    for p1 in partitions(n):
        nblocks = max(p1, default=-1) + 1
        for rest in partition_chains(nblocks, K - 1):
            chain = [p1]
            for coarse in rest:
                chain.append(tuple(coarse[b] for b in p1))
            yield tuple(chain)


# ---------------------------------------------------------------------------
# Atom tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeSpace:
    """Fixed atom ordering for k-types over a signature."""
    sig: Signature
    k: int
    tokens: tuple[str, ...]
    atoms: tuple[tuple[str, tuple[str, ...]], ...]

    @property
    def var_tokens(self):
        return self.tokens[: self.k]

    @property
    def cons_tokens(self):
        return self.tokens[self.k:]

    def index(self):
        return _atom_index(self)

    def atom_bit(self, bits: int, pred: str, args: tuple[str, ...]) -> bool:
        return bool(bits >> _atom_index(self)[(pred, args)] & 1)

    # instances are interned by space(), so identity hashing is consistent
    # with field equality and avoids rehashing the atom table on every
    # type-set lookup
    def __hash__(self):
        return object.__hash__(self)


@lru_cache(maxsize=None)
def _atom_index(space: TypeSpace):
    return {a: i for i, a in enumerate(space.atoms)}


@lru_cache(maxsize=None)
def space(sig: Signature, k: int) -> TypeSpace:
    tokens = tuple(f"x{i + 1}" for i in range(k)) + tuple(c.name for c in sig.cons)
    atoms = []
    for sym in sorted(sig.symbols, key=lambda s: s.name):
        if sym.kind == "const":
            continue
        for args in product(tokens, repeat=sym.arity):
            atoms.append((sym.name, args))
    return TypeSpace(sig, k, tokens, tuple(atoms))


@lru_cache(maxsize=None)
def _gather_indices(src: TypeSpace, dst: TypeSpace, token_map: tuple):
    """For each dst atom, the src atom index it pulls its bit from, where
    token_map maps dst tokens to src tokens."""
    m = dict(token_map)
    idx = _atom_index(src)
    return tuple(
        idx[(pred, tuple(m[a] for a in args))] for pred, args in dst.atoms
    )


def _gather(bits: int, indices) -> int:
    out = 0
    for j, i in enumerate(indices):
        if bits >> i & 1:
            out |= 1 << j
    return out


# ---------------------------------------------------------------------------
# Plain k-types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class KType:
    space: TypeSpace
    bits: int

    @property
    def k(self):
        return self.space.k

    def atom_true(self, pred: str, args: tuple[str, ...]) -> bool:
        return self.space.atom_bit(self.bits, pred, args)

    def literals(self):
        for i, (pred, args) in enumerate(self.space.atoms):
            yield pred, args, bool(self.bits >> i & 1)

    def restrict(self, selection: tuple[str, ...]) -> "KType":
        """The j-type induced by mapping x1..xj to the selected variable
        tokens (injective), constants fixed."""
        dst = space(self.space.sig, len(selection))
        token_map = tuple(zip(dst.var_tokens, selection)) + tuple(
            (c, c) for c in dst.cons_tokens
        )
        return KType(dst, _gather(self.bits, _gather_indices(self.space, dst, token_map)))

    def tp_bits(self, token: str) -> int:
        """Bits of the 1-type induced on one domain token."""
        dst = space(self.space.sig, 1)
        token_map = (("x1", token),) + tuple((c, c) for c in dst.cons_tokens)
        return _gather(self.bits, _gather_indices(self.space, dst, token_map))

    def e_related(self, level: int, a: str, b: str) -> bool:
        return self.atom_true(f"E{level}", (a, b))

    def admissible(self) -> bool:
        """Equivalence + nesting axioms on the type's own domain."""
        toks = self.space.tokens
        levels = [s.level for s in self.space.sig.eqs]
        rel = {
            lv: {(a, b) for a in toks for b in toks
                 if self.atom_true(f"E{lv}", (a, b))}
            for lv in levels
        }
        for lv in levels:
            r = rel[lv]
            for a in toks:
                if (a, a) not in r:
                    return False
            for (a, b) in r:
                if (b, a) not in r:
                    return False
                for c in toks:
                    if (b, c) in r and (a, c) not in r:
                        return False
        for lv in levels:
            if lv + 1 in rel and not rel[lv] <= rel[lv + 1]:
                return False
        return True


def type_from_lookup(sig: Signature, k: int, lookup) -> KType:
    """Build a k-type from an atom oracle lookup(pred, token_args) -> bool."""
    sp = space(sig, k)
    bits = 0
    for i, (pred, args) in enumerate(sp.atoms):
        if lookup(pred, args):
            bits |= 1 << i
    return KType(sp, bits)


# ---------------------------------------------------------------------------
# Alpha sets (1-type alphabets, optionally quotiented)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaSet:
    sig: Signature
    types: tuple[KType, ...]
    relevant: tuple[int, ...]  # atom indices of the 1-space that distinguish

    def __len__(self):
        return len(self.types)

    def index_of(self, one_type: KType | int) -> int:
        bits = one_type.bits if isinstance(one_type, KType) else one_type
        key = _gather(bits, self.relevant)
        return _alpha_lookup(self)[key]

    @property
    def full_mask(self) -> int:
        return (1 << len(self.types)) - 1


@lru_cache(maxsize=None)
def _alpha_lookup(alpha: AlphaSet):
    return {
        _gather(t.bits, alpha.relevant): i for i, t in enumerate(alpha.types)
    }


def _close_e_bits(sp: TypeSpace, fixed: dict[int, bool]):
    """Minimal admissible completion of partially fixed E-bits: diagonals
    true, symmetry, upward nesting, transitivity; everything else false.
    Returns bits or None if the fixed assignment is contradictory."""
    idx = _atom_index(sp)
    levels = [s.level for s in sp.sig.eqs]
    toks = sp.tokens
    true_pairs = {lv: set() for lv in levels}
    for lv in levels:
        for a in toks:
            true_pairs[lv].add((a, a))
    for (pred, args), i in idx.items():
        lv = distinguished_level(pred)
        if lv is not None and fixed.get(i):
            true_pairs[lv].add(args)
    changed = True
    while changed:
        changed = False
        for lv in levels:
            r = true_pairs[lv]
            add = {(b, a) for (a, b) in r} - r
            add |= {(a, c) for (a, b) in r for (b2, c) in r if b == b2} - r
            if add:
                r |= add
                changed = True
        for j in range(len(levels) - 1):
            lo, hi = levels[j], levels[j + 1]
            add = true_pairs[lo] - true_pairs[hi]
            if add:
                true_pairs[hi] |= add
                changed = True
    bits = 0
    for (pred, args), i in idx.items():
        lv = distinguished_level(pred)
        if lv is None:
            if fixed.get(i):
                bits |= 1 << i
        else:
            val = args in true_pairs[lv]
            if i in fixed and fixed[i] != val:
                return None
            if val:
                bits |= 1 << i
    return bits


def enumerate_1types(sig: Signature, cap: int | None = None) -> AlphaSet:
    """All E-admissible 1-types over {x1} plus the constants."""
    sp = space(sig, 1)
    relevant = tuple(range(len(sp.atoms)))
    types = []
    free = [i for i, (p, _) in enumerate(sp.atoms)
            if distinguished_level(p) is None]
    e_positions = [i for i in range(len(sp.atoms)) if i not in set(free)]
    if cap is not None and 2 ** len(free) > cap:
        raise BudgetExceeded(
            f"1-type space of at least 2^{len(free)} exceeds cap {cap}"
        )
    for e_assign in product([False, True], repeat=len(e_positions)):
        fixed = dict(zip(e_positions, e_assign))
        closed = _close_e_bits(sp, fixed)
        if closed is None:
            continue
        # keep only assignments that are their own closure (each admissible
        # E-configuration is produced exactly once)
        if any(bool(closed >> i & 1) != fixed[i] for i in e_positions):
            continue
        for f_assign in product([False, True], repeat=len(free)):
            bits = closed
            for i, v in zip(free, f_assign):
                if v:
                    bits |= 1 << i
            t = KType(sp, bits)
            if t.admissible():
                types.append(t)
                if cap is not None and len(types) > cap:
                    raise BudgetExceeded(f"more than {cap} admissible 1-types")
    types.sort(key=lambda t: t.bits)
    return AlphaSet(sig, tuple(types), relevant)


def relative_1types(sig: Signature, nf, bit_cap: int = 18) -> AlphaSet:
    """Representatives of 1-types up to indistinguishability by the atoms of
    nf under all variable-to-{x1}+constants assignments."""
    sp = space(sig, 1)
    idx = _atom_index(sp)
    relevant: set[int] = set()
    for pred, args in nf.atom_shapes():
        vs = sorted({a for a in args if a not in {c.name for c in sig.cons}})
        for img in product(sp.tokens, repeat=len(vs)):
            m = dict(zip(vs, img))
            key = (pred, tuple(m.get(a, a) for a in args))
            if key in idx:
                relevant.add(idx[key])
    relevant_t = tuple(sorted(relevant))
    if len(relevant_t) > bit_cap:
        raise BudgetExceeded(
            f"relative 1-type space spans {len(relevant_t)} atom positions, "
            f"cap {bit_cap}")
    seen = set()
    types = []
    for proj in product([False, True], repeat=len(relevant_t)):
        fixed = dict(zip(relevant_t, proj))
        closed = _close_e_bits(sp, fixed)
        if closed is None:
            continue
        t = KType(sp, closed)
        if not t.admissible():
            continue
        key = _gather(closed, relevant_t)
        if key in seen:
            continue
        seen.add(key)
        types.append(t)
    types.sort(key=lambda t: t.bits)
    return AlphaSet(sig, tuple(types), relevant_t)


# ---------------------------------------------------------------------------
# Labelled types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class LabelledType:
    tau: KType
    labels: tuple[int, ...]  # per token, bitmask over the alpha index

    @property
    def space(self):
        return self.tau.space

    @property
    def k(self):
        return self.tau.k

    def label_of(self, token: str) -> int:
        return self.labels[self.space.tokens.index(token)]

    def atom_true(self, pred, args):
        return self.tau.atom_true(pred, args)

    def literals(self):
        return self.tau.literals()

    def tp_of(self, token: str, alpha: AlphaSet) -> int:
        return alpha.index_of(self.tau.tp_bits(token))

    def restrict(self, selection: tuple[str, ...]) -> "LabelledType":
        tau2 = self.tau.restrict(selection)
        toks = selection + self.space.cons_tokens
        labels2 = tuple(self.labels[self.space.tokens.index(t)] for t in toks)
        return LabelledType(tau2, labels2)

    def check(self, alpha: AlphaSet) -> list[str]:
        """Invariant violations (empty = well-formed)."""
        out = []
        sp = self.space
        if len(self.labels) != len(sp.tokens):
            return ["label arity mismatch"]
        if not KType(sp, self.tau.bits).admissible():
            out.append("tau not E-admissible")
        for i, tok in enumerate(sp.tokens):
            if self.labels[i] == 0 and i < self.k:
                out.append(f"empty label at {tok}")
            if i < self.k:
                tp = self.tp_of(tok, alpha)
                if not self.labels[i] >> tp & 1:
                    out.append(f"tp of {tok} missing from its label")
        for i, a in enumerate(sp.tokens):
            for j, b in enumerate(sp.tokens):
                if self.tau.atom_true("E1", (a, b)) and self.labels[i] != self.labels[j]:
                    out.append(f"E1-related {a},{b} carry different labels")
        return out


def reducts(t: LabelledType) -> set[LabelledType]:
    """All labelled j-types under injective variable selection (identity on
    constants); includes t itself and the 0-type."""
    out = set()
    vrs = t.space.var_tokens
    for j in range(t.k + 1):
        for sel in product(vrs, repeat=j):
            if len(set(sel)) != j:
                continue
            out.add(t.restrict(tuple(sel)))
    return out


def canonically_extends(big: LabelledType, small: LabelledType) -> bool:
    if small.k > big.k:
        return False
    return big.restrict(big.space.var_tokens[: small.k]) == small


def enumerate_plain_types(sig: Signature, k: int, cap: int | None = None,
                          admit=None):
    """Stream every E-admissible k-type: E-patterns from nested partition
    chains over the tokens, free atoms by backtracking with an optional
    three-valued admit(atom_fn) pruning callback."""
    sp = space(sig, k)
    idx = _atom_index(sp)
    toks = sp.tokens
    levels = [s.level for s in sig.eqs]
    free = [i for i, (p, _) in enumerate(sp.atoms)
            if distinguished_level(p) is None]
    count = 0
    for chain in partition_chains(len(toks), len(levels)):
        value: list[bool | None] = [None] * len(sp.atoms)
        for j, lv in enumerate(levels):
            part = chain[j]
            for (pred, args), i in idx.items():
                if distinguished_level(pred) == lv:
                    value[i] = part[toks.index(args[0])] == part[toks.index(args[1])]

        def atom_fn(pred, args):
            return value[idx[(pred, args)]]

        def rec(pos: int):
            nonlocal count
            if admit is not None and admit(atom_fn) is False:
                return
            if pos == len(free):
                bits = 0
                for i2, v in enumerate(value):
                    if v:
                        bits |= 1 << i2
                count += 1
                if cap is not None and count > cap:
                    raise BudgetExceeded(
                        f"more than {cap} admissible {k}-types")
                yield KType(sp, bits)
                return
            i2 = free[pos]
            for choice in (False, True):
                value[i2] = choice
                yield from rec(pos + 1)
            value[i2] = None

        yield from rec(0)


def enumerate_labelled_types(
    sig: Signature,
    alpha: AlphaSet,
    k: int,
    cap: int | None = None,
    admit=None,
    label_universe=None,
):
    """Stream every labelled k-type: E-patterns first (nested partition
    chains over the domain tokens), then free atoms (backtracking, optional
    admit(atom_fn) pruning callback), then labellings constant on E1-blocks
    and containing each variable's own 1-type.

    label_universe restricts labels to a given iterable of alpha bitmasks
    (default: all non-empty subsets of alpha).
    """
    sp = space(sig, k)
    idx = _atom_index(sp)
    toks = sp.tokens
    levels = [s.level for s in sig.eqs]
    free = [i for i, (p, _) in enumerate(sp.atoms)
            if distinguished_level(p) is None]

    if cap is not None:
        est_labels = len(list(label_universe)) if label_universe is not None \
            else 2 ** len(alpha) - 1
        est = _bell(len(toks)) ** max(1, len(levels)) * 2 ** len(free) \
            * max(1, est_labels) ** len(toks)
        if est > cap:
            raise BudgetExceeded(
                f"labelled {k}-type space estimate {est} exceeds cap {cap}"
            )

    if label_universe is None:
        universe = list(range(1, 2 ** len(alpha)))
    else:
        universe = sorted(set(label_universe))
        if any(u == 0 for u in universe):
            raise ValueError("labels must be non-empty")

    count = 0
    for chain in partition_chains(len(toks), len(levels)):
        ebits = 0
        for j, lv in enumerate(levels):
            part = chain[j]
            for (pred, args), i in idx.items():
                if pred == f"E{lv}" and part[toks.index(args[0])] == part[toks.index(args[1])]:
                    ebits |= 1 << i
        value: list[bool | None] = [None] * len(sp.atoms)
        for i in range(len(sp.atoms)):
            if i not in free:
                value[i] = bool(ebits >> i & 1)

        def atom_fn(pred, args):
            return value[idx[(pred, args)]]

        def labelled(tau_bits: int):
            nonlocal count
            tau = KType(sp, tau_bits)
            if not levels:
                blocks = {0: list(range(len(toks)))}
            else:
                p1 = chain[0]
                blocks = {}
                for i2, b in enumerate(p1):
                    blocks.setdefault(b, []).append(i2)
            order = sorted(blocks)
            required = {}
            for b in order:
                req = 0
                for i2 in blocks[b]:
                    if i2 < k:
                        req |= 1 << alpha.index_of(tau.tp_bits(toks[i2]))
                required[b] = req
            cand = {
                b: [L for L in universe if L & required[b] == required[b]]
                for b in order
            }
            for combo in product(*(cand[b] for b in order)):
                lab = [0] * len(toks)
                for b, L in zip(order, combo):
                    for i2 in blocks[b]:
                        lab[i2] = L
                count += 1
                yield LabelledType(tau, tuple(lab))

        def rec(pos: int):
            if admit is not None and admit(atom_fn) is False:
                return
            if pos == len(free):
                bits = 0
                for i2, v in enumerate(value):
                    if v:
                        bits |= 1 << i2
                yield from labelled(bits)
                return
            i2 = free[pos]
            for choice in (False, True):
                value[i2] = choice
                yield from rec(pos + 1)
            value[i2] = None

        yield from rec(0)


@lru_cache(maxsize=None)
def _bell(n: int) -> int:
    if n == 0:
        return 1
    return sum(_comb(n - 1, i) * _bell(i) for i in range(n))


@lru_cache(maxsize=None)
def _comb(n, r):
    from math import comb
    return comb(n, r)


# ---------------------------------------------------------------------------
# Realized types
# ---------------------------------------------------------------------------

def realized_labelled_type(st, tup: tuple, sig: Signature,
                           alpha: AlphaSet) -> LabelledType:
    """The labelled type realized by a tuple of distinct unnamed elements:
    tau is the atomic type, labels are the class-sorts (1-types of unnamed
    E1-class members)."""
    named = set(st.constants.values())
    if len(set(tup)) != len(tup):
        raise ValueError("tuple elements must be distinct")
    for e in tup:
        if e in named:
            raise NamedElementInTuple(str(e))
    sp = space(sig, len(tup))
    elem_of = dict(zip(sp.var_tokens, tup))
    for c in sp.cons_tokens:
        elem_of[c] = st.constants[c]

    def lookup(pred, args):
        return tuple(elem_of[a] for a in args) in st.relations.get(pred, frozenset())

    tau = type_from_lookup(sig, len(tup), lambda p, a: lookup(p, a))
    e1 = st.relations.get("E1", frozenset())
    labels = []
    for tok in sp.tokens:
        a = elem_of[tok]
        mask = 0
        for b in st.domain:
            if b in named or (a, b) not in e1:
                continue
            tb = element_type(st, b, sig)
            mask |= 1 << alpha.index_of(tb.bits)
        labels.append(mask)
    return LabelledType(tau, tuple(labels))


def element_type(st, b, sig: Signature) -> KType:
    """The 1-type of element b in st."""
    sp = space(sig, 1)
    elem_of = {"x1": b}
    for c in sp.cons_tokens:
        elem_of[c] = st.constants[c]
    return type_from_lookup(
        sig, 1,
        lambda p, a: tuple(elem_of[x] for x in a) in st.relations.get(p, frozenset()),
    )
