"""Three-valued formula evaluation over an abstract atom oracle.

Shared by the brute-force model search (atoms = partially assigned ground
facts) and the type enumerator (atoms = partially decided type literals).
The oracle returns True, False, or None for unknown; connectives follow
Kleene semantics, so a definite result on a partial assignment is stable
under any completion.
"""

from __future__ import annotations

from itertools import product
from typing import Callable

from .syntax import (
    And, Atom, Const, Exists, FalseF, ForAll, Iff, Implies, Not, Or, TrueF, Var,
)

AtomFn = Callable[[str, tuple], "bool | None"]
ConstFn = Callable[[str], object]


def _not3(v):
    return None if v is None else not v


def eval3(f, atom_fn: AtomFn, domain, env, const_fn: ConstFn):
    """Kleene truth value of f; env maps variable names to domain elements."""
    if isinstance(f, Atom):
        elems = tuple(
            env[t.name] if isinstance(t, Var) else const_fn(t.name) for t in f.args
        )
        return atom_fn(f.pred, elems)
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Not):
        return _not3(eval3(f.sub, atom_fn, domain, env, const_fn))
    if isinstance(f, And):
        out = True
        for a in f.args:
            v = eval3(a, atom_fn, domain, env, const_fn)
            if v is False:
                return False
            if v is None:
                out = None
        return out
    if isinstance(f, Or):
        out = False
        for a in f.args:
            v = eval3(a, atom_fn, domain, env, const_fn)
            if v is True:
                return True
            if v is None:
                out = None
        return out
    if isinstance(f, Implies):
        lv = eval3(f.left, atom_fn, domain, env, const_fn)
        if lv is False:
            return True
        rv = eval3(f.right, atom_fn, domain, env, const_fn)
        if rv is True:
            return True
        if lv is None or rv is None:
            return None
        return rv
    if isinstance(f, Iff):
        lv = eval3(f.left, atom_fn, domain, env, const_fn)
        rv = eval3(f.right, atom_fn, domain, env, const_fn)
        if lv is None or rv is None:
            return None
        return lv == rv
    if isinstance(f, (ForAll, Exists)):
        is_all = isinstance(f, ForAll)
        out = is_all
        for combo in product(domain, repeat=len(f.vars)):
            env2 = dict(env)
            env2.update(zip(f.vars, combo))
            v = eval3(f.body, atom_fn, domain, env2, const_fn)
            if v is (not is_all):
                return not is_all
            if v is None:
                out = None
        return out
    raise TypeError(f"not a formula: {f!r}")
