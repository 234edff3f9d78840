"""Exception types shared across the package.

Diagnostics that point at source code render as ``file:line:col: message``
so editors can jump to the offending token.
"""

from __future__ import annotations


class CobraError(Exception):
    """Base class for all errors raised by this package."""


class SourceError(CobraError):
    """An error tied to a position in a source file."""

    def __init__(self, message: str, filename: str = "<input>", line: int = 0, col: int = 0):
        self.message = message
        self.filename = filename
        self.line = line
        self.col = col
        super().__init__(f"{filename}:{line}:{col}: {message}")


class ParseError(SourceError):
    """Lexical or syntactic error in a .cob file."""


class SemanticError(SourceError):
    """Program is well-formed syntactically but violates a static rule,
    for example a use of a variable with no prior definition."""


class UnknownRelationError(CobraError):
    """A query references a relation absent from the catalog or database."""


class UnknownColumnError(CobraError):
    """A query references a column that its child subtree does not produce."""


class CatalogError(CobraError):
    """Catalog file is malformed or contains inconsistent values."""


class InvalidAmortizationError(CatalogError):
    """Amortization factors must be >= 1 or the string 'inf'."""


class CycleError(CobraError):
    """Adding an alternative would make an OR node an ancestor of itself."""


class BudgetExceededError(CobraError):
    """Expansion hit the rule application budget before saturating.

    The partially expanded DAG remains valid; ``report`` carries the
    applications performed so far.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class UnloweredOperatorError(CobraError):
    """A chosen plan contains a node the code generator has no template for."""


class InterpreterError(CobraError):
    """Runtime failure while interpreting a program (missing cache, bad
    field access, iteration over a non-collection)."""


class InternalError(CobraError):
    """An internal invariant was violated. CLI maps this to exit code 2."""
