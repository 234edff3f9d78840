"""Abstract syntax for CobraLang programs.

A program is a list of functions; a function body is a statement list.
Every node records its source position (``line``/``col``) and compound
statements additionally record the line of their closing brace, which region
naming uses.  Positions never participate in equality so a reparsed
pretty-print compares equal to the original tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from . import queries as Q
from .errors import SemanticError


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Var:
    name: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FloatLit:
    value: float
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class StrLit:
    value: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ListLit:
    """Only the empty list literal ``[]`` exists in the grammar."""
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MapLit:
    """Only the empty map literal ``{}`` exists in the grammar."""
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Field:
    obj: "Expr"
    attr: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str                      # + - * / < <= > >= == != && ||
    left: "Expr"
    right: "Expr"
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str                      # ! -
    operand: "Expr"
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CallExpr:
    """Call of a free function.  Unknown names are opaque deterministic
    operations to both the cost model and the interpreter."""

    fn: str
    args: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


Expr = Union[Var, IntLit, FloatLit, StrLit, BoolLit, ListLit, MapLit,
             Field, Binary, Unary, CallExpr]


# ---------------------------------------------------------------------------
# statements

@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExecQuery:
    """``target = executeQuery(query { ... });`` fetches the rows of a query
    into a program variable."""

    target: str
    query: Q.QueryExpr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Prefetch:
    """``cacheByColumn(rel, col);`` fetches a whole relation and indexes it
    by one column for later cache lookups."""

    relation: str
    key_column: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CacheLookup:
    """``target = lookupCache(rel.col, key);`` reads the rows cached for a
    key value.  The relation and column name the cache populated by a prior
    Prefetch."""

    target: str
    relation: str
    key_column: str
    key: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MethodCall:
    """Statement form ``recv.method(args);``.  Collection mutators (add,
    put, addAll) and the console are interpreted; anything else is opaque."""

    receiver: str
    method: str
    args: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Return:
    value: Optional[Expr]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class QueryLoop:
    """Cursor loop: ``for (v : query { ... }) { ... }``."""

    var: str
    query: Q.QueryExpr
    body: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CollLoop:
    """Loop over an in-memory collection: ``for (v : expr) { ... }``."""

    var: str
    source: Expr
    body: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then_body: tuple
    else_body: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


Stmt = Union[Assign, ExecQuery, Prefetch, CacheLookup, MethodCall, Return,
             QueryLoop, CollLoop, While, If]


@dataclass(frozen=True)
class Param:
    name: str
    type: str = "any"


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple
    body: tuple
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    functions: tuple
    filename: str = field(default="<input>", compare=False)

    def function(self, name: str) -> FunctionDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise SemanticError(f"no function named {name!r}", self.filename)


# ---------------------------------------------------------------------------
# pretty printer

def emit_expr(e: Expr) -> str:
    return _expr(e, 0)


_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6}


def _expr(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, FloatLit):
        return repr(e.value)
    if isinstance(e, StrLit):
        return '"' + e.value.replace('"', '\\"') + '"'
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, ListLit):
        return "[]"
    if isinstance(e, MapLit):
        return "{}"
    if isinstance(e, Field):
        return f"{_expr(e.obj, 9)}.{e.attr}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        text = f"{_expr(e.left, p)} {e.op} {_expr(e.right, p + 1)}"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, Unary):
        return f"{e.op}{_expr(e.operand, 8)}"
    if isinstance(e, CallExpr):
        return f"{e.fn}(" + ", ".join(_expr(a, 0) for a in e.args) + ")"
    raise TypeError(f"not an expression: {e!r}")


def emit_query(q: Q.QueryExpr) -> str:
    """Algebra form used inside ``query { ... }`` literals."""
    if isinstance(q, Q.Scan):
        return f"scan({q.relation})"
    if isinstance(q, Q.Select):
        return f"select({_qoperand(q.predicate)}, {emit_query(q.child)})"
    if isinstance(q, Q.Project):
        items = ", ".join(
            name if isinstance(op, Q.Column) and op.name == name
            else f"{name} := {_qoperand(op)}"
            for name, op in q.columns
        )
        return f"project([{items}], {emit_query(q.child)})"
    if isinstance(q, Q.Join):
        return f"join({_qoperand(q.predicate)}, {emit_query(q.left)}, {emit_query(q.right)})"
    if isinstance(q, Q.Aggregate):
        col = q.column if q.column is not None else "star"
        if q.group_by is not None:
            return f"aggregate({q.agg_fn}, {col}, {q.group_by}, {emit_query(q.child)})"
        return f"aggregate({q.agg_fn}, {col}, {emit_query(q.child)})"
    if isinstance(q, Q.OrderBy):
        return f"orderby({q.column}, {emit_query(q.child)})"
    raise TypeError(f"not a query: {q!r}")


def _qoperand(op: Q.Operand) -> str:
    if isinstance(op, Q.Column):
        return op.name
    if isinstance(op, Q.Const):
        v = op.value
        if isinstance(v, str):
            return '"' + v.replace('"', '\\"') + '"'
        return repr(v)
    if isinstance(op, Q.Outer):
        if not isinstance(op.expr, tuple(_AST_EXPRS)):
            raise TypeError("outer operand does not reference program syntax")
        return f"outer({emit_expr(op.expr)})"
    if isinstance(op, Q.ScalarOp):
        return f"{op.fn}(" + ", ".join(_qoperand(a) for a in op.args) + ")"
    raise TypeError(f"not an operand: {op!r}")


_AST_EXPRS = (Var, IntLit, FloatLit, StrLit, BoolLit, Field, Binary, Unary, CallExpr)


def emit_stmt(s: Stmt, indent: int) -> list:
    pad = "  " * indent
    if isinstance(s, Assign):
        return [f"{pad}{s.target} = {emit_expr(s.value)};"]
    if isinstance(s, ExecQuery):
        return [f"{pad}{s.target} = executeQuery(query {{ {emit_query(s.query)} }});"]
    if isinstance(s, Prefetch):
        return [f"{pad}cacheByColumn({s.relation}, {s.key_column});"]
    if isinstance(s, CacheLookup):
        return [f"{pad}{s.target} = lookupCache({s.relation}.{s.key_column}, {emit_expr(s.key)});"]
    if isinstance(s, MethodCall):
        return [f"{pad}{s.receiver}.{s.method}(" + ", ".join(emit_expr(a) for a in s.args) + ");"]
    if isinstance(s, Return):
        return [f"{pad}return {emit_expr(s.value)};" if s.value is not None else f"{pad}return;"]
    if isinstance(s, QueryLoop):
        lines = [f"{pad}for ({s.var} : query {{ {emit_query(s.query)} }}) {{"]
        for b in s.body:
            lines += emit_stmt(b, indent + 1)
        return lines + [f"{pad}}}"]
    if isinstance(s, CollLoop):
        lines = [f"{pad}for ({s.var} : {emit_expr(s.source)}) {{"]
        for b in s.body:
            lines += emit_stmt(b, indent + 1)
        return lines + [f"{pad}}}"]
    if isinstance(s, While):
        lines = [f"{pad}while ({emit_expr(s.cond)}) {{"]
        for b in s.body:
            lines += emit_stmt(b, indent + 1)
        return lines + [f"{pad}}}"]
    if isinstance(s, If):
        lines = [f"{pad}if ({emit_expr(s.cond)}) {{"]
        for b in s.then_body:
            lines += emit_stmt(b, indent + 1)
        if s.else_body:
            lines.append(f"{pad}}} else {{")
            for b in s.else_body:
                lines += emit_stmt(b, indent + 1)
        return lines + [f"{pad}}}"]
    raise TypeError(f"not a statement: {s!r}")


def emit_function(f: FunctionDef) -> str:
    params = ", ".join(
        p.name if p.type == "any" else f"{p.name}: {p.type}" for p in f.params
    )
    lines = [f"fn {f.name}({params}) {{"]
    for s in f.body:
        lines += emit_stmt(s, 1)
    lines.append("}")
    return "\n".join(lines)


def emit_program(p: Program) -> str:
    return "\n\n".join(emit_function(f) for f in p.functions) + "\n"
