"""High-order product formulas for exponentials of nested commutators."""

__version__ = "0.1.0"
