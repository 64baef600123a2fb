"""Shared error taxonomy for the gfeq toolkit.

Parse-level syntax problems raise the builtin SyntaxError (with position
info); everything domain-specific derives from GfError so callers can catch
the whole family at once.
"""


class GfError(Exception):
    """Base class for all gfeq-specific errors."""


class EqualityUnsupported(GfError):
    """Equality atoms are not part of the language."""


class ArityMismatch(GfError):
    """An atom's argument count contradicts its symbol's fixed arity."""


class ArityConflict(GfError):
    """A name is used at two different arities, or as both relation and constant."""


class RequiresDistinguished(GfError):
    """The operation needs at least one distinguished equivalence symbol."""


class RequiresK2(GfError):
    """The operation needs at least two distinguished equivalence levels."""


class NotGuarded(GfError):
    """The sentence is outside the guarded fragment and cannot be repaired."""


class BudgetExceeded(GfError):
    """The search space exceeds the configured budget; no verdict was reached."""


class WitnessIncoherent(GfError):
    """A supplied witness set violates the closure conditions it claims."""


class NamedElementInTuple(GfError):
    """A type-extraction tuple contains a named (constant) element."""


class UninterpretedSymbol(GfError):
    """A structure is missing the interpretation of a required symbol."""


class IllegalDistinguishedUse(GfError):
    """A KB axiom constrains a distinguished symbol in a forbidden position."""


class NonContiguousDistinguished(UserWarning):
    """E_k used without E_1..E_{k-1}; lower levels were added implicitly."""
