"""Satisfiability toolkit for the equality-free guarded fragment with
nested equivalence relations E1 <= E2 <= ... <= EK."""

__version__ = "0.1.0"
