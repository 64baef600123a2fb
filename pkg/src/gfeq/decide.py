"""Satisfiability by labelled-type elimination.

The solver materializes the admissible labelled types up to the width the
normal form demands, then repeatedly deletes members that fail one of the
closure predicates until nothing more can be deleted.  Deletion is
monotone, so the fixpoint does not depend on the order in which violators
are found; randomized and parallel runs land on the same set.

Checks run in sweeps: each sweep examines a queued batch against the set
as it stood when the sweep started, and all removals are applied by the
coordinator between sweeps.

Two economies keep desk-scale inputs tractable without changing answers:

- a label-free pre-pass computes the fixpoint over bare k-types first;
  labelled enumeration then instantiates only surviving bit patterns, with
  labels drawn from surviving 1-types (anything outside that grid is
  provably eliminated anyway, so the restriction is exact);
- when the top width is too large to materialize, witnessing checks search
  extension candidates lazily against the pre-pass skeleton.  A lazy
  candidate is accepted exactly when its stored reducts are alive, which
  is also what decides its fate in the fully materialized run, so the
  reachable fixpoint is identical.

When even that is out of budget, the solver hunts for a small model of the
normal form directly, duplicates its elements (satisfaction of
equality-free sentences survives duplication), realizes the labelled types
of the blown-up model, and verifies the closure predicates on that set
member by member; success certifies SAT.  Failing all of the above raises
BudgetExceeded rather than guessing.
"""

from __future__ import annotations

import random
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product

from .errors import BudgetExceeded, RequiresDistinguished
from .models import Structure, brute_force_search, evaluate
from .normalize import NormalForm, auto_guard, to_normal_form
from .semantics import eval3
from .syntax import Formula, Sentence, distinguished_level
from .types import (
    AlphaSet,
    KType,
    LabelledType,
    element_type,
    enumerate_1types,
    enumerate_plain_types,
    realized_labelled_type,
    reducts,
    relative_1types,
    space,
)


# ---------------------------------------------------------------------------
# Configuration and result containers
# ---------------------------------------------------------------------------

@dataclass
class RunCaps:
    """Budgets for the elimination engine.

    Blowing a cap never produces a guessed verdict: the engine either falls
    back to the candidate-model path or raises BudgetExceeded.
    """

    plain_free_bits: int = 26       # refuse bare-type enumeration beyond 2^this
    plain_nodes: int = 6_000_000    # backtracking nodes across all widths
    stored_types: int = 400_000     # materialized labelled types per 0-type block
    label_bits: int = 12            # live 1-types beyond this make masks blow up
    candidate_size: int = 3         # fallback model hunt: max domain size
    candidate_nodes: int = 400_000  # fallback model hunt: search node budget


@dataclass(frozen=True)
class ViolationReport:
    """First failed closure predicate with the offending sub-instance."""

    code: str  # "P1" | "P2" | "P3/P4" | "P5"
    detail: str


@dataclass
class Verdict:
    result: str  # "SAT" | "UNSAT"
    witness: "WitnessSet | None"
    stats: dict


def _ident(name: str) -> str:
    return name


def _key(t: LabelledType):
    return (t.k, t.tau.bits, t.labels)


class _Counter:
    def __init__(self, cap: int | None, what: str):
        self.cap = cap
        self.n = 0
        self.what = what

    def spend(self, n: int = 1):
        self.n += n
        if self.cap is not None and self.n > self.cap:
            raise BudgetExceeded(f"{self.what} exceeded {self.cap}")


@lru_cache(maxsize=512)
def _psi_instances(nf: NormalForm, k: int):
    """All assignments of each universal conjunct's variables into the
    width-k token domain (repetitions allowed, constants included)."""
    sp = space(nf.sig, k)
    out = []
    for i, uc in enumerate(nf.universals):
        for combo in product(sp.tokens, repeat=len(uc.vars)):
            out.append((i, uc.guard, uc.body, dict(zip(uc.vars, combo))))
    return tuple(out)


def _psi_admissible(insts, atom_fn, domain) -> bool:
    """False only when some universal instance is definitely violated;
    tolerant of partially assigned atom functions."""
    for _, g, b, env in insts:
        gv = eval3(g, atom_fn, domain, env, _ident)
        if gv is False:
            continue
        if eval3(b, atom_fn, domain, env, _ident) is False and gv is True:
            return False
    return True


def _e1_blocks(tau: KType) -> list[list[int]]:
    """Positions of tau's tokens grouped into E1-classes, in first-seen
    order."""
    toks = tau.space.tokens
    blocks: list[list[int]] = []
    owner: dict[int, int] = {}
    for i in range(len(toks)):
        for j in range(i):
            if tau.atom_true("E1", (toks[j], toks[i])):
                owner[i] = owner[j]
                break
        else:
            owner[i] = len(blocks)
            blocks.append([])
        blocks[owner[i]].append(i)
    return blocks


# ---------------------------------------------------------------------------
# Witness sets
# ---------------------------------------------------------------------------

class WitnessSet:
    """A set of labelled types, indexed for the closure predicates.

    Doubles as the engine's working state (members are removed during
    elimination) and as the SAT certificate at the fixpoint.  Membership
    and all query orders are deterministic.

    When the top width is handled lazily, stored members stop one width
    short; extension queries against the top width synthesize candidates
    from the bare-type skeleton on demand.
    """

    def __init__(self, sig, alpha: AlphaSet, nf: NormalForm, members,
                 *, live_masks=(), plain_top=(), m_eff: int | None = None):
        self.sig = sig
        self.alpha = alpha
        self.nf = nf
        self.m_eff = m_eff if m_eff is not None else max(2, nf.m)
        self._stored: dict[int, set[LabelledType]] = defaultdict(set)
        for t in members:
            self._stored[t.k].add(t)
        self.lazy_top = bool(plain_top)
        self._live_masks = tuple(sorted(live_masks))
        self._top_by_prefix: dict[int, tuple[int, ...]] = {}
        if self.lazy_top:
            sp = space(sig, self.m_eff)
            pref: dict[int, list[int]] = defaultdict(list)
            for bits in sorted(plain_top):
                p = KType(sp, bits).restrict(sp.var_tokens[:-1]).bits
                pref[p].append(bits)
            self._top_by_prefix = {p: tuple(v) for p, v in pref.items()}

        self._parents: dict[LabelledType, list] = defaultdict(list)
        self._ext: dict[LabelledType, set] = defaultdict(set)
        self._pair: dict[tuple, set] = defaultdict(set)
        self._label_users: dict[int, set] = defaultdict(set)
        for t in self:
            self._index_add(t)

    # -- bookkeeping --------------------------------------------------------

    def _index_add(self, t: LabelledType):
        for r in reducts(t):
            if r != t:
                self._parents[r].append(t)
        if t.k >= 1:
            self._ext[t.restrict(t.space.var_tokens[: t.k - 1])].add(t)
        if t.k == 2:
            key = self._pair_key(t)
            if key is not None:
                self._pair[key].add(t)
        for lab in set(t.labels):
            self._label_users[lab].add(t)

    def _pair_key(self, beta: LabelledType):
        if not beta.atom_true("E1", ("x1", "x2")):
            return None
        if beta.labels[0] != beta.labels[1]:
            return None
        return (beta.tp_of("x1", self.alpha), beta.tp_of("x2", self.alpha),
                beta.labels[0])

    def _remove(self, t: LabelledType) -> list[tuple]:
        """Delete a member; returns the completion-pair keys that lost
        their last supporting 2-type."""
        self._stored[t.k].discard(t)
        if t.k >= 1:
            par = t.restrict(t.space.var_tokens[: t.k - 1])
            bucket = self._ext.get(par)
            if bucket:
                bucket.discard(t)
        emptied = []
        if t.k == 2:
            key = self._pair_key(t)
            if key is not None:
                bucket = self._pair.get(key)
                if bucket:
                    bucket.discard(t)
                    if not bucket:
                        emptied.append(key)
        for lab in set(t.labels):
            bucket = self._label_users.get(lab)
            if bucket:
                bucket.discard(t)
        return emptied

    # -- queries ------------------------------------------------------------

    def __contains__(self, t: LabelledType) -> bool:
        return t in self._stored.get(t.k, ())

    def __iter__(self):
        for k in sorted(self._stored):
            yield from sorted(self._stored[k], key=_key)

    def __len__(self):
        return sum(len(v) for v in self._stored.values())

    def members(self, k: int) -> list[LabelledType]:
        return sorted(self._stored.get(k, ()), key=_key)

    def widths(self) -> list[int]:
        return sorted(k for k, v in self._stored.items() if v)

    def initial_type(self) -> LabelledType | None:
        """First width-1 member in canonical order."""
        got = self.members(1)
        return got[0] if got else None

    def members_with_tp(self, alpha_index: int) -> list[LabelledType]:
        return [t for t in self.members(1)
                if t.tp_of("x1", self.alpha) == alpha_index]

    def members_with_pattern(self, pattern: tuple[tuple[int, ...], ...],
                             k: int) -> list[LabelledType]:
        """Members of width k whose E1-classes partition positions as
        given (tuple of position tuples)."""
        want = tuple(tuple(b) for b in pattern)
        return [t for t in self.members(k)
                if tuple(tuple(b) for b in _e1_blocks(t.tau)) == want]

    def pair_exists(self, a1: int, a2: int, label: int) -> bool:
        return bool(self._pair.get((a1, a2, label)))

    def completion_2type(self, a1: int, a2: int, label: int) -> LabelledType | None:
        bucket = self._pair.get((a1, a2, label))
        if not bucket:
            return None
        return min(bucket, key=_key)

    def find_extension(self, tau: LabelledType, conjunct_index: int,
                       env: dict) -> LabelledType | None:
        """First (in canonical order) stored or lazily synthesized
        (k+1)-type canonically extending tau that satisfies the indexed
        existential conjunct's matrix under env plus the witness token."""
        ex = self.nf.existentials[conjunct_index]
        w = tau.k + 1
        sp = space(self.sig, w)
        env2 = dict(env)
        env2[ex.y] = sp.var_tokens[-1]
        if not self.lazy_top or w < self.m_eff:
            for e in sorted(self._ext.get(tau, ()), key=_key):
                if eval3(ex.body, e.atom_true, sp.tokens, env2, _ident) is True:
                    return e
            return None
        if w != self.m_eff:
            return None
        newtok = sp.var_tokens[-1]
        tp_sp = space(self.sig, 1)
        for bits in self._top_by_prefix.get(tau.tau.bits, ()):
            full = KType(sp, bits)
            forced = None
            for pos, tok in enumerate(sp.tokens):
                if tok == newtok:
                    continue
                if full.atom_true("E1", (newtok, tok)):
                    forced = tau.labels[pos if pos < w - 1 else pos - 1]
                    break
            tp_idx = self.alpha.index_of(full.tp_bits(newtok))
            cands = (forced,) if forced is not None else self._live_masks
            for lab in cands:
                if not lab >> tp_idx & 1:
                    continue
                labels = tau.labels[: w - 1] + (lab,) + tau.labels[w - 1:]
                cand = LabelledType(full, labels)
                if eval3(ex.body, cand.atom_true, sp.tokens, env2, _ident) is not True:
                    continue
                # same-width permuted reducts are alive iff cand is: they
                # share all lower reducts and a bare pattern the pre-pass
                # already vetted, so only the stored widths need checking
                if all(r in self for r in reducts(cand) if r.k < w):
                    return cand
        return None

    def witness_extension(self, tau: LabelledType, conjunct_index: int,
                          g: dict) -> LabelledType | None:
        return self.find_extension(tau, conjunct_index, dict(g))

    def unsound_members(self) -> list[tuple[LabelledType, ViolationReport]]:
        """Members that fail some closure predicate (empty at a fixpoint)."""
        out = []
        for t in self:
            rep = violation(t, self, self.nf)
            if rep is not None:
                out.append((t, rep))
        return out

    def to_json(self) -> dict:
        def lits(t):
            return [[p, list(a), v] for p, a, v in t.literals()]

        return {
            "alpha": [lits(a) for a in self.alpha.types],
            "omega": [
                {
                    "k": t.k,
                    "literals": lits(t),
                    "labels": {
                        tok: [i for i in range(len(self.alpha))
                              if t.labels[pos] >> i & 1]
                        for pos, tok in enumerate(t.space.tokens)
                    },
                }
                for t in self
            ],
            "lazy_top_width": self.m_eff if self.lazy_top else None,
        }


# ---------------------------------------------------------------------------
# The closure predicates
# ---------------------------------------------------------------------------

def violation(t: LabelledType, omega: WitnessSet,
              nf: NormalForm) -> ViolationReport | None:
    """First failed closure predicate for t against omega, or None.

    Checked in order: P1 every reduct present; P2 every universal conjunct
    holds under every assignment into t's domain; P3/P4 every guarded
    surjective assignment of an existential conjunct has a canonical
    witnessing extension; P5 every pair of 1-types sharing a label is
    linked by a completion 2-type carrying that label.
    """
    sp = t.space
    toks = sp.tokens

    for j in range(t.k + 1):
        for sel in product(sp.var_tokens, repeat=j):
            if len(set(sel)) != j:
                continue
            r = t.restrict(tuple(sel))
            if r != t and r not in omega:
                return ViolationReport(
                    "P1", f"reduct on selection {sel!r} is missing from omega")

    for i, g, b, env in _psi_instances(nf, t.k):
        if eval3(g, t.atom_true, toks, env, _ident) is not True:
            continue
        if eval3(b, t.atom_true, toks, env, _ident) is False:
            return ViolationReport(
                "P2", f"universal conjunct {i} false under {sorted(env.items())}")

    need = set(sp.var_tokens)
    for ti, ex in enumerate(nf.existentials):
        for combo in product(toks, repeat=len(ex.vars)):
            if not need <= set(combo):
                continue
            env = dict(zip(ex.vars, combo))
            if eval3(ex.guard, t.atom_true, toks, env, _ident) is not True:
                continue
            if omega.find_extension(t, ti, env) is None:
                return ViolationReport(
                    "P3/P4",
                    f"existential conjunct {ti} unwitnessed under "
                    f"{sorted(env.items())}")

    for lab in sorted(set(t.labels)):
        if lab == 0:
            continue
        idxs = [i for i in range(len(omega.alpha)) if lab >> i & 1]
        for a1 in idxs:
            for a2 in idxs:
                if not omega.pair_exists(a1, a2, lab):
                    return ViolationReport(
                        "P5",
                        f"no linking 2-type for 1-type pair ({a1},{a2}) "
                        f"with label {bin(lab)}")
    return None


# ---------------------------------------------------------------------------
# Bare-type pre-pass
# ---------------------------------------------------------------------------

def _plain_fixpoint(nf: NormalForm, m_eff: int,
                    caps: RunCaps) -> dict[int, set[int]]:
    """Fixpoint of reduct-closure and witnessing over label-free types of
    width 0..m_eff.  Universal conjuncts are enforced during enumeration.
    Every bit pattern of every labelled type surviving the full procedure
    survives here, so the result is a sound and exact skeleton."""
    sig = nf.sig
    nodes = _Counter(caps.plain_nodes, "bare-type enumeration nodes")
    ncons = len(sig.cons)
    for k in range(m_eff + 1):
        # arithmetic count: building the space itself can already be too big
        nfree = sum((k + ncons) ** s.arity for s in sig.rels
                    if distinguished_level(s.name) is None)
        if nfree > caps.plain_free_bits:
            raise BudgetExceeded(
                f"width-{k} bare-type space has {nfree} free atoms "
                f"(cap {caps.plain_free_bits})")
    live: dict[int, set[int]] = {}
    for k in range(m_eff + 1):
        sp = space(sig, k)
        insts = _psi_instances(nf, k)
        toks = sp.tokens

        def admit(atom_fn, _insts=insts, _toks=toks):
            nodes.spend()
            return _psi_admissible(_insts, atom_fn, _toks)

        live[k] = {t.bits for t in enumerate_plain_types(sig, k, admit=admit)}

    while True:
        by_prefix: dict[int, dict[int, list[int]]] = {}
        for w in range(1, m_eff + 1):
            spw = space(sig, w)
            d: dict[int, list[int]] = defaultdict(list)
            for b in sorted(live[w]):
                d[KType(spw, b).restrict(spw.var_tokens[:-1]).bits].append(b)
            by_prefix[w] = d
        doomed = []
        for k in range(m_eff + 1):
            for bits in sorted(live[k]):
                if not _plain_alive(bits, k, live, by_prefix, nf):
                    doomed.append((k, bits))
        if not doomed:
            return live
        for k, bits in doomed:
            live[k].discard(bits)


def _plain_alive(bits: int, k: int, live, by_prefix, nf: NormalForm) -> bool:
    sig = nf.sig
    sp = space(sig, k)
    t = KType(sp, bits)
    for j in range(k + 1):
        for sel in product(sp.var_tokens, repeat=j):
            if len(set(sel)) != j:
                continue
            if t.restrict(tuple(sel)).bits not in live[j]:
                return False
    toks = sp.tokens
    need = set(sp.var_tokens)
    for ti, ex in enumerate(nf.existentials):
        w = k + 1
        for combo in product(toks, repeat=len(ex.vars)):
            if not need <= set(combo):
                continue
            env = dict(zip(ex.vars, combo))
            if eval3(ex.guard, t.atom_true, toks, env, _ident) is not True:
                continue
            if w not in live:
                return False
            if not _plain_witness(t, ti, env, by_prefix[w].get(bits, ()), nf):
                return False
    return True


def _plain_witness(t: KType, ti: int, env: dict, candidates, nf) -> bool:
    w = t.k + 1
    sp = space(t.space.sig, w)
    ex = nf.existentials[ti]
    env2 = dict(env)
    env2[ex.y] = sp.var_tokens[-1]
    for ebits in candidates:
        e = KType(sp, ebits)
        if eval3(ex.body, e.atom_true, sp.tokens, env2, _ident) is True:
            return True
    return False


# ---------------------------------------------------------------------------
# Labelled universes
# ---------------------------------------------------------------------------

def _masks(live_idx: list[int]) -> list[int]:
    """All non-empty bitmasks over the given 1-type indices, ascending."""
    out = []
    for sub in range(1, 1 << len(live_idx)):
        m = 0
        for i, pos in enumerate(live_idx):
            if sub >> i & 1:
                m |= 1 << pos
        out.append(m)
    return out


def _block_candidates(tau: KType, k: int, pi: LabelledType, live_masks,
                      alpha: AlphaSet):
    """Per-E1-class label candidates for tau under the 0-type pi, or None
    when no labelling is consistent.  Classes containing a constant are
    pinned to pi's label; every class label must contain the 1-types of
    its variable members."""
    sp = tau.space
    out = []
    for blk in _e1_blocks(tau):
        req = 0
        forced = None
        for pos in blk:
            tok = sp.tokens[pos]
            if pos < k:
                req |= 1 << alpha.index_of(tau.tp_bits(tok))
            else:
                lab = pi.label_of(tok)
                if forced is not None and forced != lab:
                    return None
                forced = lab
        if forced is not None:
            if forced & req != req:
                return None
            out.append((blk, (forced,)))
        else:
            cs = tuple(lab for lab in live_masks if lab & req == req)
            if not cs:
                return None
            out.append((blk, cs))
    return out


def _materialize(pi: LabelledType, k: int, live_bits, live_masks,
                 alpha: AlphaSet, sig, counter: _Counter) -> list[LabelledType]:
    sp = space(sig, k)
    out = []
    for bits in sorted(live_bits):
        tau = KType(sp, bits)
        if tau.restrict(()).bits != pi.tau.bits:
            continue
        cand = _block_candidates(tau, k, pi, live_masks, alpha)
        if cand is None:
            continue
        for combo in product(*(cs for _, cs in cand)):
            labels = [0] * len(sp.tokens)
            for (blk, _), lab in zip(cand, combo):
                for pos in blk:
                    labels[pos] = lab
            counter.spend()
            out.append(LabelledType(tau, tuple(labels)))
    return out


def _estimate(pi: LabelledType, k: int, live_bits, live_masks,
              alpha: AlphaSet, sig) -> int:
    sp = space(sig, k)
    total = 0
    for bits in sorted(live_bits):
        tau = KType(sp, bits)
        if tau.restrict(()).bits != pi.tau.bits:
            continue
        cand = _block_candidates(tau, k, pi, live_masks, alpha)
        if cand is None:
            continue
        n = 1
        for _, cs in cand:
            n *= len(cs)
        total += n
    return total


def _zero_types(plain0, live_masks, sig, alpha: AlphaSet) -> list[LabelledType]:
    """All labelled 0-types over surviving constant-part bits; the single
    empty type when the signature has no constants."""
    sp = space(sig, 0)
    out = []
    for bits in sorted(plain0):
        tau = KType(sp, bits)
        blocks = _e1_blocks(tau)
        for combo in product(live_masks, repeat=len(blocks)):
            labels = [0] * len(sp.tokens)
            for blk, lab in zip(blocks, combo):
                for pos in blk:
                    labels[pos] = lab
            out.append(LabelledType(tau, tuple(labels)))
    return out


# ---------------------------------------------------------------------------
# The elimination engine
# ---------------------------------------------------------------------------

def _run_fixpoint(ws: WitnessSet, nf: NormalForm, stats: dict, jobs: int,
                  rng: random.Random | None):
    if rng is not None:
        # adversarial-order mode: recheck everything, delete one random
        # violator per iteration; the fixpoint is the same by monotonicity
        while True:
            bad = []
            for t in ws:
                rep = violation(t, ws, nf)
                if rep is not None:
                    bad.append((t, rep))
            if not bad:
                return
            stats["sweeps"] += 1
            t, rep = bad[rng.randrange(len(bad))]
            ws._remove(t)
            stats["eliminated"][rep.code] += 1

    queue = set(ws)
    while queue:
        batch = sorted((t for t in queue if t in ws), key=_key)
        queue = set()
        if not batch:
            return
        stats["sweeps"] += 1
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                reports = list(pool.map(
                    lambda t: violation(t, ws, nf), batch))
        else:
            reports = [violation(t, ws, nf) for t in batch]
        bad = [(t, rep) for t, rep in zip(batch, reports) if rep is not None]
        if not bad:
            return
        for t, rep in bad:
            emptied = ws._remove(t)
            stats["eliminated"][rep.code] += 1
            queue |= {p for p in ws._parents.get(t, ()) if p in ws}
            if t.k >= 1:
                par = t.restrict(t.space.var_tokens[: t.k - 1])
                if par in ws:
                    queue.add(par)
            for (_, _, lab) in emptied:
                queue |= {u for u in ws._label_users.get(lab, ()) if u in ws}
        if ws.lazy_top:
            queue |= set(ws.members(ws.m_eff - 1))


def _exact(nf: NormalForm, plain, alpha: AlphaSet, live_masks, m_eff: int,
           caps: RunCaps, stats: dict, t0: float, jobs: int,
           rng: random.Random | None) -> Verdict:
    sig = nf.sig
    pis = _zero_types(plain[0], live_masks, sig, alpha)
    stats["zero_types"] = len(pis)
    for pi in pis:
        counter = _Counter(caps.stored_types, "materialized labelled types")
        members = [pi]
        for k in range(1, m_eff):
            members += _materialize(pi, k, plain[k], live_masks, alpha, sig,
                                    counter)
        top_est = _estimate(pi, m_eff, plain[m_eff], live_masks, alpha, sig)
        lazy = counter.n + top_est > caps.stored_types
        if lazy and m_eff == 2:
            # completion pairs live at width 2; that width cannot be lazy
            raise BudgetExceeded("width-2 labelled universe over cap")
        if not lazy:
            members += _materialize(pi, m_eff, plain[m_eff], live_masks,
                                    alpha, sig, counter)
        ws = WitnessSet(
            sig, alpha, nf, members,
            live_masks=live_masks if lazy else (),
            plain_top=sorted(plain[m_eff]) if lazy else (),
            m_eff=m_eff)
        stats["initial_types"] += len(ws)
        _run_fixpoint(ws, nf, stats, jobs, rng)
        if ws.members(1):
            return _verdict("SAT", ws, stats, t0)
    return _verdict("UNSAT", None, stats, t0)


def _formula_nodes(f: Formula) -> int:
    n = 1
    for fld in f.__dataclass_fields__:
        v = getattr(f, fld)
        if isinstance(v, Formula):
            n += _formula_nodes(v)
        elif isinstance(v, tuple) and v and isinstance(v[0], Formula):
            n += sum(_formula_nodes(a) for a in v)
    return n


def _candidate(nf: NormalForm, m_eff: int, caps: RunCaps, stats: dict,
               t0: float) -> Verdict:
    """SAT-only fallback: find a small model, duplicate its elements, and
    certify the realized labelled types through the closure predicates."""
    sig = nf.sig
    stats["mode"] = "candidate"
    sent = nf.to_sentence()
    # grounding the hunt costs formula-size * size^2 work per chain; refuse
    # before building anything when that already dwarfs the node budget
    est = _formula_nodes(sent.formula) * caps.candidate_size ** 2
    if est > caps.candidate_nodes:
        raise BudgetExceeded(
            f"type space over budget and the sentence is too large for a "
            f"model hunt (work estimate {est})")
    try:
        st = brute_force_search(sent, caps.candidate_size,
                                node_cap=caps.candidate_nodes)
    except BudgetExceeded:
        st = None
    if st is None:
        raise BudgetExceeded(
            "type space over budget and no small model found; cannot decide")
    blown = _duplicate_elements(st, m_eff)
    if not evaluate(blown, sent):
        raise BudgetExceeded("element duplication failed to preserve the model")
    named = set(blown.constants.values())
    unnamed = [e for e in blown.domain if e not in named]
    sp1 = space(sig, 1)
    tps = sorted({element_type(blown, b, sig).bits for b in unnamed})
    alpha = AlphaSet(sig, tuple(KType(sp1, b) for b in tps),
                     tuple(range(len(sp1.atoms))))
    members = set()
    for k in range(m_eff + 1):
        for tup in permutations(unnamed, k):
            members.add(realized_labelled_type(blown, tup, sig, alpha))
    ws = WitnessSet(sig, alpha, nf, sorted(members, key=_key), m_eff=m_eff)
    for t in ws:
        rep = violation(t, ws, nf)
        if rep is not None:
            raise BudgetExceeded(
                f"fallback witness failed verification ({rep.code}: {rep.detail})")
    stats["candidate_model_size"] = len(st.domain)
    stats["initial_types"] = len(ws)
    return _verdict("SAT", ws, stats, t0)


def _duplicate_elements(st: Structure, copies: int) -> Structure:
    """Clone every element the given number of times (constants keep one
    named original).  Truth of equality-free sentences is preserved, and
    clones give every E1-class enough same-type members to realize
    completion pairs and fresh witnesses."""
    if copies <= 1:
        return st
    named = set(st.constants.values())

    def tag(e: str, i: int) -> str:
        return e if (e in named and i == 0) else f"{e}~{i}"

    domain = tuple(tag(e, i) for e in st.domain for i in range(copies))
    rels = {}
    for r, ts in st.relations.items():
        out = set()
        for tup in ts:
            for idx in product(range(copies), repeat=len(tup)):
                out.add(tuple(tag(e, i) for e, i in zip(tup, idx)))
        rels[r] = frozenset(out)
    return Structure(domain, dict(st.constants), rels)


def _verdict(result: str, witness, stats: dict, t0: float) -> Verdict:
    stats["wall_ms"] = round((time.perf_counter() - t0) * 1000.0, 3)
    return Verdict(result, witness, stats)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def decide_1eq(nf: NormalForm, *, relative: bool = True, jobs: int = 1,
               rng: random.Random | None = None,
               caps: RunCaps | None = None) -> Verdict:
    """Satisfiability of a normal form over exactly one distinguished
    level.  SAT verdicts carry the fixpoint witness set; the set is
    independent of elimination order and worker count."""
    caps = caps or RunCaps()
    sig = nf.sig
    if sig.K == 0:
        raise RequiresDistinguished("the decision procedure needs E1")
    if sig.K != 1:
        raise ValueError("decide_1eq expects exactly one distinguished level;"
                         " eliminate the finer levels first")
    t0 = time.perf_counter()
    stats = {
        "mode": "exact",
        "width": max(2, nf.m),
        "sweeps": 0,
        "zero_types": 0,
        "initial_types": 0,
        "eliminated": {"P1": 0, "P2": 0, "P3/P4": 0, "P5": 0},
    }
    m_eff = max(2, nf.m)
    try:
        plain = _plain_fixpoint(nf, m_eff, caps)
        if not plain[1]:
            stats["plain_refuted"] = True
            return _verdict("UNSAT", None, stats, t0)
        alpha = (relative_1types(sig, nf) if relative
                 else enumerate_1types(sig, cap=1 << caps.label_bits))
        live_idx = sorted({alpha.index_of(b) for b in plain[1]})
        if len(live_idx) > caps.label_bits:
            raise BudgetExceeded(
                f"{len(live_idx)} live 1-types; label masks over cap")
        live_masks = _masks(live_idx)
        return _exact(nf, plain, alpha, live_masks, m_eff, caps, stats, t0,
                      jobs, rng)
    except BudgetExceeded as e:
        stats["fallback_reason"] = str(e)
        return _candidate(nf, m_eff, caps, stats, t0)


def decide(s: Sentence, *, relative: bool = True, succinct: bool = False,
           jobs: int = 1, rng: random.Random | None = None,
           caps: RunCaps | None = None) -> Verdict:
    """Full pipeline: repair guards, normalize, eliminate the finest
    distinguished level down to one, then run the type-elimination
    engine."""
    from .reduce import eliminate_finest, eliminate_finest_succinct

    if s.sig.K == 0:
        raise RequiresDistinguished(
            "decide needs at least one distinguished equivalence symbol")
    nf = to_normal_form(auto_guard(s))
    certs = []
    while nf.sig.K > 1:
        step = eliminate_finest_succinct if succinct else eliminate_finest
        nf, cert = step(nf)
        certs.append(cert)
    verdict = decide_1eq(nf, relative=relative, jobs=jobs, rng=rng, caps=caps)
    if certs:
        verdict.stats["reductions"] = [c.summary() for c in certs]
    return verdict
