"""Cost-based rewriting of imperative programs with embedded queries."""

__version__ = "0.1.0"
