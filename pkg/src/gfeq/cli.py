"""Command-line front end.

One subcommand per pipeline stage: solve, check, normalize, reduce,
model, bruteforce, gen, dl.  Exit codes: 0 = satisfiable / no
violations, 1 = unsatisfiable / violations / no model, 2 = bad usage or
input, 3 = budget exceeded.  Stdout is byte-deterministic for identical
invocations; timing and diagnostics go to stderr.  No environment
variables are consulted.
"""

from __future__ import annotations

import functools
import json
import random
import sys
from collections import Counter

import click

from .decide import RunCaps, decide
from .errors import BudgetExceeded, GfError
from .models import brute_force_search, build_from_witness
from .normalize import to_normal_form
from .syntax import Sentence, check_guardedness, parse_sentence, render


def _die(code: int, msg: str):
    click.echo(msg, err=True)
    sys.exit(code)


def _guarded(fn):
    """Map library errors onto the exit-code contract."""

    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BudgetExceeded as e:
            _die(3, f"budget exceeded: {e}")
        except (GfError, SyntaxError, ValueError, OSError) as e:
            _die(2, f"error: {e}")

    return inner


def _read_text(path: str) -> str:
    if path == "-":
        return click.get_text_stream("stdin").read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_sentence(path: str) -> Sentence:
    return parse_sentence(_read_text(path))


def _caps(budget: int | None) -> RunCaps | None:
    if budget is None:
        return None
    return RunCaps(plain_nodes=10 * budget, stored_types=budget,
                   candidate_nodes=budget)


def _rng(seed: int | None):
    return None if seed is None else random.Random(seed)


def _check_max_eq(s: Sentence, max_eq: int | None):
    if max_eq is not None and s.sig.K > max_eq:
        _die(2, f"error: input has {s.sig.K} distinguished levels, "
                f"--max-eq allows {max_eq}")


def _e_pattern(t) -> str:
    """Which distinguished levels hold between each token pair."""
    toks = t.space.tokens
    levels = [s.level for s in t.space.sig.eqs]
    parts = []
    for i in range(len(toks)):
        for j in range(i + 1, len(toks)):
            held = "".join(str(lv) for lv in levels
                           if t.atom_true(f"E{lv}", (toks[i], toks[j])))
            parts.append(f"{toks[i]},{toks[j]}:{held or '-'}")
    return ";".join(parts)


def _census(ws) -> dict:
    per_k = Counter(t.k for t in ws)
    per_pat = Counter(_e_pattern(t) for t in ws)
    return {
        "alpha": len(ws.alpha),
        "per_k": {str(k): per_k[k] for k in sorted(per_k)},
        "per_e_pattern": {p: per_pat[p] for p in sorted(per_pat)},
    }


def _emit_json(obj):
    click.echo(json.dumps(obj, sort_keys=True))


@click.group()
@click.version_option(package_name="gfeq")
def main():
    """Satisfiability toolkit for the equality-free guarded fragment
    with nested equivalence relations."""


@main.command()
@click.argument("input", default="-")
@click.option("--max-eq", type=int, default=None,
              help="Refuse inputs with more distinguished levels.")
@click.option("--relative-types/--no-relative-types", default=True,
              help="Restrict 1-types to atoms the formula mentions.")
@click.option("--succinct", is_flag=True,
              help="Eliminate levels via the numeral apparatus.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker count; the verdict does not depend on it.")
@click.option("--seed", type=int, default=None,
              help="Randomize the elimination order (verdict unchanged).")
@click.option("--budget", type=int, default=None,
              help="Cap stored types and search nodes.")
@click.option("--witness", "witness_path", type=click.Path(dir_okay=False),
              default=None, help="On SAT, write the final witness set here.")
@click.option("--stats", "show_stats", is_flag=True,
              help="Print run statistics to stderr.")
@click.option("--dump-types", is_flag=True,
              help="Print the witness census (per width, per E-pattern).")
@click.option("--json", "as_json", is_flag=True, help="Machine output.")
@_guarded
def solve(input, max_eq, relative_types, succinct, jobs, seed, budget,
          witness_path, show_stats, dump_types, as_json):
    """Decide satisfiability of the sentence in INPUT (path or '-')."""
    s = _load_sentence(input)
    _check_max_eq(s, max_eq)
    v = decide(s, relative=relative_types, succinct=succinct, jobs=jobs,
               rng=_rng(seed), caps=_caps(budget))
    if as_json:
        _emit_json({"result": v.result, "mode": v.stats.get("mode")})
    else:
        click.echo(v.result)
    if dump_types:
        _emit_json(_census(v.witness) if v.witness is not None
                   else {"alpha": 0, "per_k": {}, "per_e_pattern": {}})
    if witness_path and v.witness is not None:
        with open(witness_path, "w", encoding="utf-8") as fh:
            json.dump(v.witness.to_json(), fh, indent=2)
    if show_stats:
        click.echo(json.dumps(v.stats, sort_keys=True, default=str), err=True)
    sys.exit(0 if v.result == "SAT" else 1)


@main.command()
@click.argument("input", default="-")
@click.option("--json", "as_json", is_flag=True, help="Machine output.")
@_guarded
def check(input, as_json):
    """Report guarded-fragment violations in INPUT."""
    s = _load_sentence(input)
    rep = check_guardedness(s)
    if as_json:
        _emit_json({
            "ok": rep.ok,
            "violations": [
                {"path": list(v.path), "rule": v.rule, "reason": v.reason}
                for v in rep.violations
            ],
        })
    elif rep.ok:
        click.echo("ok")
    else:
        for v in rep.violations:
            click.echo(f"{'/'.join(v.path) or '(top)'}: {v.rule}: {v.reason}")
    sys.exit(0 if rep.ok else 1)


@main.command()
@click.argument("input", default="-")
@click.option("--trace", is_flag=True,
              help="Also print the fresh-symbol dictionary as JSON.")
@click.option("--json", "as_json", is_flag=True, help="Machine output.")
@_guarded
def normalize(input, trace, as_json):
    """Print the normal form of INPUT as an explicit conjunction."""
    s = _load_sentence(input)
    nf = to_normal_form(s)
    if as_json:
        _emit_json({"formula": render(nf.to_sentence()), "m": nf.m,
                    "fresh": nf.fresh_json()})
    else:
        click.echo(render(nf.to_sentence()))
        if trace:
            _emit_json(nf.fresh_json())
    sys.exit(0)


@main.command()
@click.argument("input", default="-")
@click.option("--max-eq", type=int, default=1, show_default=True,
              help="Eliminate finest levels until at most this many remain.")
@click.option("--succinct", is_flag=True,
              help="Use the numeral apparatus instead of a unary block.")
@click.option("--json", "as_json", is_flag=True, help="Machine output.")
@_guarded
def reduce(input, max_eq, succinct, as_json):
    """Eliminate distinguished levels from INPUT, printing the result."""
    from .reduce import eliminate_finest, eliminate_finest_succinct

    if max_eq < 1:
        _die(2, "error: --max-eq must be at least 1")
    s = _load_sentence(input)
    nf = to_normal_form(s)
    step = eliminate_finest_succinct if succinct else eliminate_finest
    certs = []
    while nf.sig.K > max_eq:
        nf, cert = step(nf)
        certs.append(cert.summary())
    if as_json:
        _emit_json({"formula": render(nf.to_sentence()),
                    "certificates": certs})
    else:
        click.echo(render(nf.to_sentence()))
        for c in certs:
            click.echo(json.dumps(c, sort_keys=True), err=True)
    sys.exit(0)


@main.command()
@click.argument("input", default="-")
@click.option("--relative-types/--no-relative-types", default=True)
@click.option("--succinct", is_flag=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--budget", type=int, default=200, show_default=True,
              help="Construction steps for the greedy builder.")
@_guarded
def model(input, relative_types, succinct, jobs, seed, budget):
    """Decide INPUT and, on SAT, print a model built from the witness.

    The model is for the fully reduced one-level normal form; fresh
    symbols introduced by normalization and reduction appear in it.
    """
    s = _load_sentence(input)
    v = decide(s, relative=relative_types, succinct=succinct, jobs=jobs,
               rng=_rng(seed))
    if v.result != "SAT":
        click.echo("UNSAT")
        sys.exit(1)
    built = build_from_witness(v.witness, v.witness.nf, budget=budget)
    if hasattr(built, "structure"):  # PartialStructure: ran out of steps
        click.echo(f"{built.note}; {built.pending} pending", err=True)
        click.echo(built.structure.to_json())
        sys.exit(3)
    click.echo(built.to_json())
    sys.exit(0)


@main.command()
@click.argument("input", default="-")
@click.option("--max-size", type=int, default=4, show_default=True,
              help="Largest domain size to try.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--budget", type=int, default=None,
              help="Search node cap.")
@click.option("--json", "as_json", is_flag=True, help="Machine output.")
@_guarded
def bruteforce(input, max_size, jobs, budget, as_json):
    """Exhaustive model search for INPUT over sizes 1..max-size."""
    s = _load_sentence(input)
    st = brute_force_search(s, max_size, jobs=jobs, node_cap=budget)
    if st is None:
        if as_json:
            _emit_json({"model": None, "max_size": max_size})
        else:
            click.echo(f"NO MODEL ≤ {max_size}")
        sys.exit(1)
    if as_json:
        click.echo(st.to_json())
    else:
        click.echo(f"MODEL size={len(st.domain)}")
        click.echo(st.to_json())
    sys.exit(0)


@main.group()
def gen():
    """Built-in formula families."""


@gen.command()
@click.option("--k", type=int, required=True, help="Distinguished levels.")
@click.option("--n", type=int, required=True, help="Base counter bits.")
@_guarded
def counter(k, n):
    """Tower-of-exponentials counter sentence; guarded, 3 variables."""
    from .generators import gen_counter

    click.echo(render(gen_counter(k, n)))
    sys.exit(0)


@gen.command()
@click.option("--n", type=int, required=True, help="Address bits.")
@_guarded
def numerals(n):
    """Succinct two-numeral theory with 2^(2^n) counter values."""
    from .generators import gen_numeral_theory

    click.echo(render(gen_numeral_theory(n)))
    sys.exit(0)


@gen.command(name="access-policy")
@_guarded
def access_policy():
    """Two-level same-organisation access policy example."""
    from .generators import gen_access_policy

    click.echo(render(gen_access_policy()))
    sys.exit(0)


@main.group()
def dl():
    """Description-logic front end (one axiom per line)."""


@dl.command(name="translate")
@click.argument("kb", default="-")
@click.option("--json", "as_json", is_flag=True, help="Machine output.")
@_guarded
def dl_translate(kb, as_json):
    """Translate a knowledge base into a guarded sentence."""
    from .dlfront import parse_kb, translate_kb

    s = translate_kb(parse_kb(_read_text(kb)))
    if as_json:
        _emit_json({"formula": render(s), "levels": s.sig.K})
    else:
        click.echo(render(s))
    sys.exit(0)


@dl.command(name="check")
@click.argument("kb", default="-")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--budget", type=int, default=None)
@click.option("--json", "as_json", is_flag=True, help="Machine output.")
@_guarded
def dl_check(kb, jobs, budget, as_json):
    """Decide knowledge-base consistency."""
    from .dlfront import parse_kb, translate_kb

    s = translate_kb(parse_kb(_read_text(kb)))
    v = decide(s, jobs=jobs, caps=_caps(budget))
    ok = v.result == "SAT"
    if as_json:
        _emit_json({"consistent": ok, "mode": v.stats.get("mode")})
    else:
        click.echo("CONSISTENT" if ok else "INCONSISTENT")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
