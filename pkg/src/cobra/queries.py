"""Relational query trees embedded in programs.

A query is a tree of algebra operators over named relations.  Queries appear
in three places: ``query { ... }`` literals in source programs, sources of
fold expressions, and query alternatives produced by rewrite rules.

Operand language for predicates and computed columns:

  Column(name)      column of the child subtree
  Const(value)      literal
  Outer(expr)       value supplied by the surrounding program (correlated
                    queries); ``expr`` is an AST expression or a fold-IR
                    expression depending on who built the query

Invariants
  * Trees are immutable; rewrites build new trees.
  * ``render`` is deterministic: equal trees give byte-equal SQL.
  * ``canonical_key`` hashes structurally, normalizing the operand order of
    commutative comparisons so a=b and b=a collide.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Union


# ---------------------------------------------------------------------------
# scalar operands

@dataclass(frozen=True)
class Column:
    name: str


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Outer:
    """A value evaluated outside the query, in program scope."""

    expr: object = field(compare=False)
    # stable textual form used for hashing and parameterized rendering
    text: str = ""


@dataclass(frozen=True)
class ScalarOp:
    """Function application inside a query: comparisons, boolean connectives
    and arithmetic. ``fn`` is one of eq ne lt le gt ge and or not add sub
    mul div."""

    fn: str
    args: tuple

COMMUTATIVE = {"eq", "ne", "and", "or", "add", "mul"}
COMPARISONS = {"eq": "=", "ne": "<>", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}
ARITHMETIC = {"add": "+", "sub": "-", "mul": "*", "div": "/"}

Operand = Union[Column, Const, Outer, ScalarOp]


# ---------------------------------------------------------------------------
# algebra operators

@dataclass(frozen=True)
class Scan:
    relation: str


@dataclass(frozen=True)
class Select:
    predicate: Operand
    child: "QueryExpr"


@dataclass(frozen=True)
class Project:
    # ordered (name, operand) pairs; plain columns keep their own name
    columns: tuple
    child: "QueryExpr"


@dataclass(frozen=True)
class Join:
    predicate: Operand
    left: "QueryExpr"
    right: "QueryExpr"


@dataclass(frozen=True)
class Aggregate:
    agg_fn: str                      # sum | count | min | max
    column: Optional[str]            # None for count(*)
    group_by: Optional[str]
    child: "QueryExpr"


@dataclass(frozen=True)
class OrderBy:
    column: str
    child: "QueryExpr"


QueryExpr = Union[Scan, Select, Project, Join, Aggregate, OrderBy]


def children(q: QueryExpr) -> tuple:
    if isinstance(q, Scan):
        return ()
    if isinstance(q, Join):
        return (q.left, q.right)
    return (q.child,)


def relations_of(q: QueryExpr) -> tuple:
    """All relation names scanned by the query, left to right."""
    if isinstance(q, Scan):
        return (q.relation,)
    out = ()
    for c in children(q):
        out += relations_of(c)
    return out


# ---------------------------------------------------------------------------
# schema inference

def output_schema(q: QueryExpr, relation_columns) -> Optional[tuple]:
    """Column names produced by the query, or None when the catalog does not
    list the columns of a scanned relation.  ``relation_columns`` maps
    relation name to an ordered column tuple."""
    if isinstance(q, Scan):
        cols = relation_columns.get(q.relation)
        return tuple(cols) if cols is not None else None
    if isinstance(q, (Select, OrderBy)):
        return output_schema(q.child, relation_columns)
    if isinstance(q, Project):
        return tuple(name for name, _ in q.columns)
    if isinstance(q, Join):
        l = output_schema(q.left, relation_columns)
        r = output_schema(q.right, relation_columns)
        if l is None or r is None:
            return None
        return l + r
    if isinstance(q, Aggregate):
        name = q.agg_fn
        if q.group_by is not None:
            return (q.group_by, name)
        return (name,)
    raise TypeError(f"not a query: {q!r}")


def column_source(q: QueryExpr, col: str, relation_columns) -> Optional[tuple]:
    """Resolve ``col`` to the base (relation, column) it passes through from,
    or None when it is computed, aggregated or unresolvable."""
    if isinstance(q, Scan):
        cols = relation_columns.get(q.relation)
        if cols is None or col in cols:
            return (q.relation, col) if cols is not None else None
        return None
    if isinstance(q, (Select, OrderBy)):
        return column_source(q.child, col, relation_columns)
    if isinstance(q, Project):
        for name, op in q.columns:
            if name == col:
                if isinstance(op, Column):
                    return column_source(q.child, op.name, relation_columns)
                return None
        return None
    if isinstance(q, Join):
        l = column_source(q.left, col, relation_columns)
        if l is not None:
            return l
        return column_source(q.right, col, relation_columns)
    if isinstance(q, Aggregate):
        if col == q.group_by:
            return column_source(q.child, col, relation_columns)
        return None
    raise TypeError(f"not a query: {q!r}")


# ---------------------------------------------------------------------------
# rendering

def render_operand(op: Operand, concrete=None) -> str:
    """SQL text for an operand.  ``concrete`` maps Outer operands to literal
    values; without it they render as named placeholders."""
    if isinstance(op, Column):
        return op.name
    if isinstance(op, Const):
        return _literal(op.value)
    if isinstance(op, Outer):
        if concrete is not None:
            return _literal(concrete(op))
        return f":{op.text}" if op.text else ":?"
    if isinstance(op, ScalarOp):
        if op.fn in COMPARISONS:
            a, b = op.args
            return f"{render_operand(a, concrete)} {COMPARISONS[op.fn]} {render_operand(b, concrete)}"
        if op.fn in ARITHMETIC:
            a, b = op.args
            return f"({render_operand(a, concrete)} {ARITHMETIC[op.fn]} {render_operand(b, concrete)})"
        if op.fn in ("and", "or"):
            a, b = op.args
            return f"({render_operand(a, concrete)} {op.fn} {render_operand(b, concrete)})"
        if op.fn == "not":
            return f"not ({render_operand(op.args[0], concrete)})"
        args = ", ".join(render_operand(a, concrete) for a in op.args)
        return f"{op.fn}({args})"
    raise TypeError(f"not an operand: {op!r}")


def _literal(v) -> str:
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)) and len(v) == 0:
        return "()"
    return repr(v)


class _Block:
    """One SELECT block being assembled while flattening a tree."""

    def __init__(self):
        self.columns = None          # None means *
        self.source = None           # FROM text
        self.wheres = []
        self.order = None
        self.group = None

    def sql(self) -> str:
        cols = "*" if self.columns is None else ", ".join(self.columns)
        text = f"select {cols} from {self.source}"
        if self.wheres:
            text += " where " + " and ".join(self.wheres)
        if self.group:
            text += f" group by {self.group}"
        if self.order:
            text += f" order by {self.order}"
        return text


def render(q: QueryExpr, concrete=None) -> str:
    """Deterministic SQL for a query tree.  Simple stacks of operators
    collapse into a single SELECT; anything else nests as a subquery."""
    blk = _Block()
    _fill(q, blk, concrete)
    return blk.sql()


def _source_text(q: QueryExpr, concrete) -> str:
    if isinstance(q, Scan):
        return q.relation
    if isinstance(q, Join):
        l = _source_text(q.left, concrete) if isinstance(q.left, (Scan, Join)) else f"({render(q.left, concrete)})"
        r = _source_text(q.right, concrete) if isinstance(q.right, (Scan, Join)) else f"({render(q.right, concrete)})"
        return f"{l} join {r} on {render_operand(q.predicate, concrete)}"
    return f"({render(q, concrete)})"


def _fill(q: QueryExpr, blk: _Block, concrete) -> None:
    if isinstance(q, (Scan, Join)):
        blk.source = _source_text(q, concrete)
        return
    if isinstance(q, OrderBy):
        if blk.order is None and blk.columns is None:
            blk.order = q.column
            _fill(q.child, blk, concrete)
            return
        blk.source = f"({render(q, concrete)})"
        return
    if isinstance(q, Select):
        if blk.columns is None and blk.group is None:
            blk.wheres.insert(0, render_operand(q.predicate, concrete))
            _fill(q.child, blk, concrete)
            return
        blk.source = f"({render(q, concrete)})"
        return
    if isinstance(q, Project):
        if blk.columns is None:
            blk.columns = [
                name if isinstance(op, Column) and op.name == name
                else f"{render_operand(op, concrete)} as {name}"
                for name, op in q.columns
            ]
            _fill(q.child, blk, concrete)
            return
        blk.source = f"({render(q, concrete)})"
        return
    if isinstance(q, Aggregate):
        if blk.columns is None:
            inner = q.column if q.column is not None else "*"
            agg = f"{q.agg_fn}({inner})"
            if q.group_by is not None:
                blk.columns = [q.group_by, agg]
                blk.group = q.group_by
            else:
                blk.columns = [agg]
            _fill(q.child, blk, concrete)
            return
        blk.source = f"({render(q, concrete)})"
        return
    raise TypeError(f"not a query: {q!r}")


# ---------------------------------------------------------------------------
# canonical keys and fingerprints

def operand_key(op: Operand):
    if isinstance(op, Column):
        return ("col", op.name)
    if isinstance(op, Const):
        return ("const", type(op.value).__name__, repr(op.value))
    if isinstance(op, Outer):
        return ("outer", op.text)
    if isinstance(op, ScalarOp):
        args = tuple(operand_key(a) for a in op.args)
        if op.fn in COMMUTATIVE:
            args = tuple(sorted(args))
        return ("op", op.fn, args)
    raise TypeError(f"not an operand: {op!r}")


def canonical_key(q: QueryExpr):
    if isinstance(q, Scan):
        return ("scan", q.relation)
    if isinstance(q, Select):
        return ("select", operand_key(q.predicate), canonical_key(q.child))
    if isinstance(q, Project):
        cols = tuple((n, operand_key(op)) for n, op in q.columns)
        return ("project", cols, canonical_key(q.child))
    if isinstance(q, Join):
        return ("join", operand_key(q.predicate), canonical_key(q.left), canonical_key(q.right))
    if isinstance(q, Aggregate):
        return ("agg", q.agg_fn, q.column, q.group_by, canonical_key(q.child))
    if isinstance(q, OrderBy):
        return ("orderby", q.column, canonical_key(q.child))
    raise TypeError(f"not a query: {q!r}")


def fingerprint(q: QueryExpr) -> str:
    """Stable identifier of a query: hash of its parameterized SQL text.
    Catalog overrides and amortization factors key on this."""
    text = render(q)
    return hashlib.sha256(text.encode()).hexdigest()[:16]
