"""Hard formula families with nested-equivalence structure.

Three generators:

- ``gen_counter(K, n)``: K levels of nested cyclic counters.  Every model
  realizes tet(K, n) distinct (K-1)-level classes inside each level-K
  class, so minimal models grow as a tower of exponentials.  Three
  variables suffice; informally unguarded existentials get fresh dummy
  ternary guards (named D1, D2, ... in emission order).
- ``gen_numeral_theory(n)``: doubly exponential counting compressed into
  predicates of arity n+1 over the constants 0 and 1.  An element's
  numeral has 2^n bit positions, each addressed by an n-bit constant
  vector; successor, zero, and equality tests are cascaded position by
  position through auxiliary check predicates.
- ``gen_access_policy()``: the download-permission policy, an exercise for
  two nested equivalence levels (departments inside organisations).
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    And,
    Atom,
    Const,
    Exists,
    ForAll,
    Formula,
    Iff,
    Implies,
    Not,
    Sentence,
    Var,
    conj,
    sentence,
)


def tet(k: int, n: int) -> int:
    """Tetration: tet(0, n) = n and tet(k+1, n) = 2^tet(k, n)."""
    if k < 0 or n < 0:
        raise ValueError("tetration is defined for non-negative arguments")
    out = n
    for _ in range(k):
        out = 2 ** out
    return out


def _xor(a: Formula, b: Formula) -> Formula:
    return Not(Iff(a, b))


def _a(pred: str, *args) -> Atom:
    return Atom(pred, tuple(Var(t) if isinstance(t, str) else t for t in args))


X1, X2, Y = "x1", "x2", "y"


# ---------------------------------------------------------------------------
# Nested counters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CounterSpec:
    levels: int
    bits: int

    def __post_init__(self):
        if self.levels < 1 or self.bits < 1:
            raise ValueError("gen_counter needs K >= 1 and n >= 1")

    def min_model_size(self) -> int:
        """Every model has at least tet(levels, bits) elements."""
        return tet(self.levels, self.bits)


class _Dummies:
    """Fresh ternary guard allocator; names D1, D2, ... in emission order."""

    def __init__(self):
        self.count = 0

    def guard(self, a: str, b: str, c: str) -> Atom:
        self.count += 1
        return _a(f"D{self.count}", a, b, c)


def _counter_base(K: int, n: int, dummies: _Dummies) -> list[Formula]:
    ek = f"E{K}"
    bb = [f"BB{i}" for i in range(n)]
    bc = [f"BC{i}" for i in range(n)]

    def succ(a, b):
        return conj(*(Iff(_a(bb[i], b), _xor(_a(bb[i], a), _a(bc[i], a)))
                      for i in range(n)))

    def zero(a):
        return conj(*(Not(_a(bb[i], a)) for i in range(n)))

    def eq(a, b):
        return conj(*(Iff(_a(bb[i], a), _a(bb[i], b)) for i in range(n)))

    out: list[Formula] = []
    # carry bits: least position always carries, higher positions carry
    # while bit and carry below are both on
    out.append(ForAll((X1,), conj(
        _a(bc[0], X1),
        *(Iff(_a(bc[i + 1], X1), And((_a(bb[i], X1), _a(bc[i], X1))))
          for i in range(n - 1)))))
    out.append(ForAll((X1, X2), Implies(
        _a(ek, X1, X2), Iff(_a("S1", X1, X2), succ(X1, X2)))))
    out.append(ForAll((X1,), Iff(_a("Z1", X1), zero(X1))))
    out.append(ForAll((X1, X2), Implies(
        _a(ek, X1, X2), Iff(_a("Q1", X1, X2), eq(X1, X2)))))
    # every element has a cyclic successor inside its own class
    out.append(ForAll((X1,), Exists((Y,), And(
        (_a("S1", X1, Y), _a("E1", X1, Y))))))
    # the sentinel refines E1 and identifies equal 1-numerals
    out.append(ForAll((X1, X2), Implies(_a("E0", X1, X2), _a("E1", X1, X2))))
    out.append(ForAll((X1, X2), Implies(
        _a("E1", X1, X2), Iff(_a("E0", X1, X2), _a("Q1", X1, X2)))))
    return out


def _counter_level(K: int, n: int, k: int, dummies: _Dummies) -> list[Formula]:
    ek, e_in, e_sub = f"E{K}", f"E{k - 1}", f"E{k - 2}" if k > 2 else "E0"
    b, c = f"B{k}", f"C{k}"
    s, s_in = f"S{k}", f"S{k - 1}"
    q, q_in = f"Q{k}", f"Q{k - 1}"
    z, z_in, w = f"Z{k}", f"Z{k - 1}", f"W{k}"

    def chi(a, bv):
        return Iff(_a(b, bv), _xor(_a(b, a), _a(c, a)))

    out: list[Formula] = []
    # bit values constant on each inner-inner class
    out.append(ForAll((X1, X2), Implies(
        _a(e_sub, X1, X2), Iff(_a(b, X1), _a(b, X2)))))
    # carry: on at numeral zero, propagated along inner successors
    out.append(ForAll((X1,), Implies(_a(z_in, X1), _a(c, X1))))
    out.append(ForAll((X1, X2), Implies(
        _a(s_in, X1, X2),
        Implies(And((_a(e_in, X1, X2), Not(_a(z_in, X2)))),
                Iff(_a(c, X2), And((_a(c, X1), _a(b, X1))))))))
    # successor links project onto every bit position on both sides
    out.append(ForAll((X1, X2), Implies(_a(s, X1, X2), Exists((Y,), conj(
        dummies.guard(X1, X2, Y),
        _a(s_in, X1, Y), _a(e_in, X1, Y), _a(s, Y, X2))))))
    out.append(ForAll((X1, X2), Implies(_a(s, X1, X2), Exists((Y,), conj(
        dummies.guard(X1, X2, Y),
        _a(s_in, X2, Y), _a(e_in, X2, Y), _a(s, X1, Y))))))
    # aligned positions obey bitwise xor with the carry
    out.append(ForAll((X1, X2), Implies(
        _a(s, X1, X2), Implies(_a(q_in, X1, X2), chi(X1, X2)))))
    # non-links must exhibit a disagreeing position (via the helper W)
    out.append(ForAll((X1, X2), Implies(
        _a(ek, X1, X2),
        Implies(Not(_a(s, X1, X2)), Exists((Y,), conj(
            dummies.guard(X1, X2, Y), _a(e_in, X1, Y), _a(w, Y, X2)))))))
    out.append(ForAll((X1, X2), Implies(_a(w, X1, X2), Exists((Y,), conj(
        dummies.guard(X1, X2, Y),
        _a(e_in, X2, Y), _a(q_in, X1, Y), Not(chi(X1, Y)))))))
    # cyclic successors exist
    out.append(ForAll((X1,), Exists((Y,), And(
        (_a(s, X1, Y), _a(f"E{k}", X1, Y))))))
    # zero marks classes whose bits are all off
    out.append(ForAll((X1, X2), Implies(
        _a(e_in, X1, X2), Implies(_a(z, X1), Not(_a(b, X2))))))
    out.append(ForAll((X1,), Implies(Not(_a(z, X1)), Exists((Y,), And(
        (_a(e_in, X1, Y), _a(b, Y)))))))
    # equal numerals share a successor; equal numerals collapse classes
    out.append(ForAll((X1, X2), Implies(_a(ek, X1, X2), Exists((Y,), conj(
        dummies.guard(X1, X2, Y),
        _a(s, X1, Y), Iff(_a(q, X1, X2), _a(s, X2, Y)))))))
    out.append(ForAll((X1, X2), Implies(
        _a(f"E{k}", X1, X2), Implies(_a(q, X1, X2), _a(e_in, X1, X2)))))
    return out


def gen_counter(K: int, n: int) -> Sentence:
    """The K-level counter family over n base bits; guarded, 3 variables."""
    spec = CounterSpec(K, n)
    dummies = _Dummies()
    parts = _counter_base(K, n, dummies)
    for k in range(2, spec.levels + 1):
        parts += _counter_level(K, n, k, dummies)
    return sentence(conj(*parts))


# ---------------------------------------------------------------------------
# Succinct two-numeral theory
# ---------------------------------------------------------------------------

_NUMERAL_NAMES = ("G", "BB", "CB", "ChkS", "ChkQ", "ChkZ", "S", "Q", "Z")


def _numeral_axioms(n: int, e_guard: str, name_of) -> list[Formula]:
    """The two-numeral apparatus with bit positions addressed by n-bit
    constant vectors.  ``name_of`` maps the canonical predicate names to
    the names to emit; ``e_guard`` seeds the pairwise check cascades.

    The check predicates verify a per-position property cumulatively: the
    all-zero address holds by seeding, the address one past p holds when
    the address p holds and the property holds at p, and the top address
    plus the property there yields the target predicate.  Converse axioms
    force the cascade downward, so inside ``e_guard`` the targets hold
    exactly when the property holds at every position.
    """
    zero, one = Const("0"), Const("1")
    g, bb, cb = name_of("G"), name_of("BB"), name_of("CB")
    chks, chkq, chkz = name_of("ChkS"), name_of("ChkQ"), name_of("ChkZ")
    s, q, z = name_of("S"), name_of("Q"), name_of("Z")

    def zs(count):
        return (zero,) * count

    def ones(count):
        return (one,) * count

    def zvars(count):
        return tuple(f"z{j + 1}" for j in range(count))

    # addresses p and p+1 share a variable prefix: p ends in 0 then i ones,
    # p+1 ends in 1 then i zeros
    def addr_pairs():
        for i in range(n):
            pre = zvars(n - 1 - i)
            yield pre, pre + (zero,) + ones(i), pre + (one,) + zs(i)

    def mu(a, b, addr):
        return Iff(_a(bb, b, *addr),
                   _xor(_a(cb, a, *addr), _a(bb, a, *addr)))

    def nu(a, b, addr):
        return Iff(_a(bb, a, *addr), _a(bb, b, *addr))

    out: list[Formula] = []
    # every n-bit constant vector is reachable in the address guard
    out.append(ForAll((X1,), _a(g, X1, *zs(n))))
    for i in range(1, n + 1):
        vs = zvars(n)
        flipped = vs[: i - 1] + (one,) + vs[i:]
        out.append(ForAll((X1,) + vs, Implies(
            _a(g, X1, *vs), _a(g, X1, *flipped))))
    # carry bits: position zero always carries, then the usual recurrence
    out.append(ForAll((X1,), _a(cb, X1, *zs(n))))
    for pre, p, p1 in addr_pairs():
        out.append(ForAll((X1,) + pre, Implies(
            _a(g, X1, *p),
            Iff(_a(cb, X1, *p1), And((_a(cb, X1, *p), _a(bb, X1, *p)))))))

    # successor: cascade the xor-with-carry test over all positions
    out.append(ForAll((X1, X2), Implies(
        _a(e_guard, X1, X2), _a(chks, X1, X2, *zs(n)))))
    for pre, p, p1 in addr_pairs():
        out.append(ForAll((X1, X2) + pre, Implies(
            _a(chks, X1, X2, *p),
            Implies(mu(X1, X2, p), _a(chks, X1, X2, *p1)))))
    out.append(ForAll((X1, X2), Implies(
        _a(chks, X1, X2, *ones(n)),
        Implies(mu(X1, X2, ones(n)), _a(s, X1, X2)))))
    out.append(ForAll((X1, X2), Implies(
        _a(s, X1, X2),
        And((mu(X1, X2, ones(n)), _a(chks, X1, X2, *ones(n)))))))
    for pre, p, p1 in addr_pairs():
        out.append(ForAll((X1, X2) + pre, Implies(
            _a(chks, X1, X2, *p1),
            And((mu(X1, X2, p), _a(chks, X1, X2, *p))))))

    # zero test: all bits off, cascaded the same way
    out.append(ForAll((X1,), _a(chkz, X1, *zs(n))))
    for pre, p, p1 in addr_pairs():
        out.append(ForAll((X1,) + pre, Implies(
            _a(chkz, X1, *p),
            Implies(Not(_a(bb, X1, *p)), _a(chkz, X1, *p1)))))
    out.append(ForAll((X1,), Implies(
        _a(chkz, X1, *ones(n)),
        Implies(Not(_a(bb, X1, *ones(n))), _a(z, X1)))))
    out.append(ForAll((X1,), Implies(
        _a(z, X1),
        And((Not(_a(bb, X1, *ones(n))), _a(chkz, X1, *ones(n)))))))
    for pre, p, p1 in addr_pairs():
        out.append(ForAll((X1,) + pre, Implies(
            _a(chkz, X1, *p1),
            And((Not(_a(bb, X1, *p)), _a(chkz, X1, *p))))))

    # equality test: bits agree at every position
    out.append(ForAll((X1, X2), Implies(
        _a(e_guard, X1, X2), _a(chkq, X1, X2, *zs(n)))))
    for pre, p, p1 in addr_pairs():
        out.append(ForAll((X1, X2) + pre, Implies(
            _a(chkq, X1, X2, *p),
            Implies(nu(X1, X2, p), _a(chkq, X1, X2, *p1)))))
    out.append(ForAll((X1, X2), Implies(
        _a(chkq, X1, X2, *ones(n)),
        Implies(nu(X1, X2, ones(n)), _a(q, X1, X2)))))
    out.append(ForAll((X1, X2), Implies(
        _a(q, X1, X2),
        And((nu(X1, X2, ones(n)), _a(chkq, X1, X2, *ones(n)))))))
    for pre, p, p1 in addr_pairs():
        out.append(ForAll((X1, X2) + pre, Implies(
            _a(chkq, X1, X2, *p1),
            And((nu(X1, X2, p), _a(chkq, X1, X2, *p))))))
    return out


def gen_numeral_theory(n: int) -> Sentence:
    """Succinct theory of counters with 2^(2^n) values, length O(n^2)."""
    if n < 1:
        raise ValueError("gen_numeral_theory needs n >= 1")
    return sentence(conj(*_numeral_axioms(n, "E1", lambda name: name)))


# ---------------------------------------------------------------------------
# Access policy
# ---------------------------------------------------------------------------

def gen_access_policy() -> Sentence:
    """Same-organisation download policy over two equivalence levels:
    E1 = same department, E2 = same organisation."""
    x, y, zz = "x", "y", "z"
    parts = [
        ForAll((x, y), Implies(
            _a("grant", x, y), And((_a("Admin", x), _a("User", y))))),
        ForAll((x, y), Implies(
            _a("manages", x, y), And((_a("Admin", x), _a("Doc", y))))),
        ForAll((x, y), Implies(
            _a("access", x, y), And((_a("User", x), _a("Doc", y))))),
        ForAll((x, y), Implies(_a("grant", x, y), _a("E2", x, y))),
        ForAll((x, y), Implies(_a("manages", x, y), _a("E1", x, y))),
        ForAll((x, y), Implies(_a("access", x, y), Exists((zz,), conj(
            _a("Guard", x, y, zz), _a("grant", zz, x), _a("manages", zz, y))))),
    ]
    return sentence(conj(*parts))
