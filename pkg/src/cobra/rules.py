"""Rewrite rules that grow the alternatives DAG.

Each rule inspects one alternative of an OR node and, when its shape and
side conditions match, attaches a semantically equal alternative to the
same OR.  ``expand`` runs the rules round-robin over the OR nodes until
nothing new can be added or the application budget runs out.

The rules:

* ``loopToFold``  cursor loop region -> fold expression
* ``T1``          fold collecting whole rows -> materialized result set
* ``T2``          guard on the accumulator -> selection on the source
* ``T3``          computed accumulator input -> computed projection column
* ``T4``          fold nested in a fold -> fold over a join
* ``T5``          running sum / count -> server side aggregate; with
                  several accumulators, each independent total is served
                  from an aggregate query while the fold remains for the
                  rest (usually a degradation the cost model rejects)
* ``N1``          per-row query keyed by a cursor -> cache prefetch + lookup
* ``N2``          selection on the source -> guard on the accumulator

T2/N2 are inverses; their conversions are canonical so a pushed-then-pulled
predicate reproduces the original alternative and deduplication stops the
ping-pong.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import fir as F
from . import queries as Q
from . import syntax as S
from .dag import Dag, _expr_shape
from .errors import BudgetExceededError, CycleError

RULE_ORDER = ("loopToFold", "T1", "T2", "T3", "T4", "T5", "N1", "N2")

# program operators with a scalar-function form inside queries
_OP_TO_FN = {"==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt",
             ">=": "ge", "&&": "and", "||": "or",
             "+": "add", "-": "sub", "*": "mul", "/": "div"}
_FN_TO_OP = {v: k for k, v in _OP_TO_FN.items()}


@dataclass
class ExpansionReport:
    applied: int = 0
    passes: int = 0
    by_rule: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def summary(self) -> str:
        parts = [f"{r}={self.by_rule[r]}" for r in RULE_ORDER if r in self.by_rule]
        return f"applied={self.applied} passes={self.passes} " + " ".join(parts)


@dataclass
class _Ctx:
    dag: Dag
    relation_columns: dict | None
    legacy: bool


# ---------------------------------------------------------------------------
# conversions between functional expressions and query operands

def _ast_of(node):
    """Program expression denoting the value, for use as an outer operand.
    None when the node has no syntactic form."""
    if isinstance(node, (F.VarE, F.TVarE)):
        name = node.name
        return S.Var(name)
    if isinstance(node, F.TAttrE):
        return S.Field(S.Var(node.var), node.column)
    if isinstance(node, F.AttrE):
        src = _ast_of(node.src)
        return S.Field(src, node.column) if src is not None else None
    if isinstance(node, F.ConstE):
        v = node.value
        if isinstance(v, bool):
            return S.BoolLit(v)
        if isinstance(v, int):
            return S.IntLit(v)
        if isinstance(v, float):
            return S.FloatLit(v)
        if isinstance(v, str):
            return S.StrLit(v)
        return None
    if isinstance(node, F.BinE) and node.op in _OP_TO_FN:
        l, r = _ast_of(node.left), _ast_of(node.right)
        if l is None or r is None:
            return None
        return S.Binary(node.op, l, r)
    if isinstance(node, F.UnE):
        a = _ast_of(node.operand)
        return S.Unary(node.op, a) if a is not None else None
    if isinstance(node, F.CallE):
        args = [_ast_of(a) for a in node.args]
        if any(a is None for a in args):
            return None
        return S.CallExpr(node.fn, tuple(args))
    return None


def _outer(e) -> Q.Outer:
    return Q.Outer(e, text=S.emit_expr(e))


def _operand_of(node, cursor):
    """Query operand computing the node per row of ``cursor``, or None."""
    if isinstance(node, F.ConstE):
        v = node.value
        if isinstance(v, (bool, int, float, str)):
            return Q.Const(v)
        return None
    if isinstance(node, F.TAttrE):
        if node.var == cursor:
            return Q.Column(node.column)
        return _outer(S.Field(S.Var(node.var), node.column))
    if isinstance(node, F.VarE):
        return _outer(S.Var(node.name))
    if isinstance(node, F.BinE):
        fn = _OP_TO_FN.get(node.op)
        if fn is None:
            return None
        l = _operand_of(node.left, cursor)
        r = _operand_of(node.right, cursor)
        if l is None or r is None:
            return None
        return Q.ScalarOp(fn, (l, r))
    if isinstance(node, F.UnE) and node.op == "!":
        a = _operand_of(node.operand, cursor)
        return Q.ScalarOp("not", (a,)) if a is not None else None
    if isinstance(node, F.AttrE):
        e = _ast_of(node)
        return _outer(e) if e is not None else None
    return None


def _fir_of_operand(op, cursor):
    """Inverse of ``_operand_of``: functional form of a query operand."""
    if isinstance(op, Q.Const):
        return F.ConstE(op.value)
    if isinstance(op, Q.Column):
        return F.TAttrE(cursor, op.name)
    if isinstance(op, Q.Outer):
        return _outer_fir(op.expr)
    if isinstance(op, Q.ScalarOp):
        args = [_fir_of_operand(a, cursor) for a in op.args]
        if any(a is None for a in args):
            return None
        if op.fn == "not":
            return F.UnE("!", args[0])
        sym = _FN_TO_OP.get(op.fn)
        if sym is None or len(args) != 2:
            return None
        return F.BinE(sym, args[0], args[1])
    return None


def _outer_fir(e):
    if isinstance(e, S.Var):
        return F.VarE(e.name)
    if isinstance(e, S.Field):
        if isinstance(e.obj, S.Var):
            return F.TAttrE(e.obj.name, e.attr)
        inner = _outer_fir(e.obj)
        return F.AttrE(inner, e.attr) if inner is not None else None
    if isinstance(e, (S.IntLit, S.FloatLit, S.StrLit, S.BoolLit)):
        return F.ConstE(e.value)
    if isinstance(e, S.Binary):
        l, r = _outer_fir(e.left), _outer_fir(e.right)
        if l is None or r is None:
            return None
        return F.BinE(e.op, l, r)
    if isinstance(e, S.Unary):
        a = _outer_fir(e.operand)
        return F.UnE(e.op, a) if a is not None else None
    if isinstance(e, S.CallExpr):
        args = [_outer_fir(a) for a in e.args]
        if any(a is None for a in args):
            return None
        return F.CallE(e.fn, tuple(args))
    return None


# ---------------------------------------------------------------------------
# structural helpers

def _map_fir(node, fn):
    """Rebuild the tree bottom-up, applying ``fn`` at every node."""
    if isinstance(node, F.BinE):
        node = F.BinE(node.op, _map_fir(node.left, fn), _map_fir(node.right, fn))
    elif isinstance(node, F.UnE):
        node = F.UnE(node.op, _map_fir(node.operand, fn))
    elif isinstance(node, F.CallE):
        node = F.CallE(node.fn, tuple(_map_fir(a, fn) for a in node.args))
    elif isinstance(node, F.AttrE):
        node = F.AttrE(_map_fir(node.src, fn), node.column)
    elif isinstance(node, F.TupleE):
        node = F.TupleE(tuple(_map_fir(i, fn) for i in node.items))
    elif isinstance(node, F.ProjectE):
        node = F.ProjectE(_map_fir(node.src, fn), node.index)
    elif isinstance(node, F.CondE):
        node = F.CondE(_map_fir(node.pred, fn), _map_fir(node.then, fn),
                       _map_fir(node.els, fn))
    elif isinstance(node, F.InsertE):
        node = F.InsertE(_map_fir(node.coll, fn), _map_fir(node.item, fn))
    elif isinstance(node, F.MapPutE):
        node = F.MapPutE(_map_fir(node.map, fn), _map_fir(node.key, fn),
                         _map_fir(node.value, fn))
    elif isinstance(node, F.ConcatE):
        node = F.ConcatE(_map_fir(node.left, fn), _map_fir(node.right, fn))
    elif isinstance(node, F.LookupE):
        node = F.LookupE(node.relation, node.column, _map_fir(node.key, fn))
    elif isinstance(node, F.PrefetchE):
        node = F.PrefetchE(node.relation, node.column, _map_fir(node.body, fn))
    elif isinstance(node, F.FoldE):
        node = F.FoldE(node.var, node.names, _map_fir(node.acc, fn),
                       _map_fir(node.init, fn), _map_fir(node.source, fn))
    return fn(node)


def _operands(q):
    def ops(op):
        yield op
        if isinstance(op, Q.ScalarOp):
            for a in op.args:
                yield from ops(a)

    if isinstance(q, Q.Scan):
        return
    if isinstance(q, Q.Select):
        yield from ops(q.predicate)
        yield from _operands(q.child)
    elif isinstance(q, Q.Project):
        for _, op in q.columns:
            yield from ops(op)
        yield from _operands(q.child)
    elif isinstance(q, Q.Join):
        yield from ops(q.predicate)
        yield from _operands(q.left)
        yield from _operands(q.right)
    elif isinstance(q, (Q.Aggregate, Q.OrderBy)):
        yield from _operands(q.child)


def _map_outer(q, fn):
    """Rebuild a query, transforming the program expression of every outer
    operand with ``fn``."""
    def op_map(op):
        if isinstance(op, Q.Outer):
            e2 = fn(op.expr)
            return op if e2 is op.expr else _outer(e2)
        if isinstance(op, Q.ScalarOp):
            return Q.ScalarOp(op.fn, tuple(op_map(a) for a in op.args))
        return op

    if isinstance(q, Q.Scan):
        return q
    if isinstance(q, Q.Select):
        return Q.Select(op_map(q.predicate), _map_outer(q.child, fn))
    if isinstance(q, Q.Project):
        cols = tuple((n, op_map(op)) for n, op in q.columns)
        return Q.Project(cols, _map_outer(q.child, fn))
    if isinstance(q, Q.Join):
        return Q.Join(op_map(q.predicate), _map_outer(q.left, fn),
                      _map_outer(q.right, fn))
    if isinstance(q, Q.Aggregate):
        return Q.Aggregate(q.agg_fn, q.column, q.group_by,
                           _map_outer(q.child, fn))
    if isinstance(q, Q.OrderBy):
        return Q.OrderBy(q.column, _map_outer(q.child, fn))
    raise TypeError(f"not a query: {q!r}")


def _rename_ast(e, old, new):
    if isinstance(e, S.Var):
        return S.Var(new) if e.name == old else e
    if isinstance(e, S.Field):
        return S.Field(_rename_ast(e.obj, old, new), e.attr)
    if isinstance(e, S.Binary):
        return S.Binary(e.op, _rename_ast(e.left, old, new),
                        _rename_ast(e.right, old, new))
    if isinstance(e, S.Unary):
        return S.Unary(e.op, _rename_ast(e.operand, old, new))
    if isinstance(e, S.CallExpr):
        return S.CallExpr(e.fn, tuple(_rename_ast(a, old, new) for a in e.args))
    return e


def _rename_cursor(node, old, new):
    """Redirect every reference to row variable ``old`` onto ``new``."""
    def fix(n):
        if isinstance(n, F.TAttrE) and n.var == old:
            return F.TAttrE(new, n.column)
        if isinstance(n, F.TVarE) and n.name == old:
            return F.TVarE(new)
        if isinstance(n, (F.ExecE,)):
            return F.ExecE(_map_outer(n.query, lambda e: _rename_ast(e, old, new)))
        return n

    return _map_fir(node, fix)


def _bare_row_use(e, var) -> bool:
    """Whole-row use of ``var`` in a program expression (not ``var.col``)."""
    if isinstance(e, S.Var):
        return e.name == var
    if isinstance(e, S.Field):
        if isinstance(e.obj, S.Var):
            return False
        return True  # nested bases are beyond what the rewrite can redirect
    if isinstance(e, S.Binary):
        return _bare_row_use(e.left, var) or _bare_row_use(e.right, var)
    if isinstance(e, S.Unary):
        return _bare_row_use(e.operand, var)
    if isinstance(e, S.CallExpr):
        return any(_bare_row_use(a, var) for a in e.args)
    return False


def _uses_row(node, var) -> bool:
    """Does the expression use ``var`` as a whole row value?"""
    for n in F.walk(node):
        if isinstance(n, F.TVarE) and n.name == var:
            return True
        if isinstance(n, F.ExecE):
            for op in _operands(n.query):
                if isinstance(op, Q.Outer) and _bare_row_use(op.expr, var):
                    return True
    return False


def _ast_cols(e, var, out):
    if isinstance(e, S.Field) and isinstance(e.obj, S.Var) and e.obj.name == var:
        out.add(e.attr)
        return
    if isinstance(e, S.Field):
        _ast_cols(e.obj, var, out)
    elif isinstance(e, S.Binary):
        _ast_cols(e.left, var, out)
        _ast_cols(e.right, var, out)
    elif isinstance(e, S.Unary):
        _ast_cols(e.operand, var, out)
    elif isinstance(e, S.CallExpr):
        for a in e.args:
            _ast_cols(a, var, out)


def _cols_read(node, var) -> set:
    """Columns of row variable ``var`` the expression reads."""
    cols: set = set()
    for n in F.walk(node):
        if isinstance(n, F.TAttrE) and n.var == var:
            cols.add(n.column)
        if isinstance(n, F.ExecE):
            for op in _operands(n.query):
                if isinstance(op, Q.Outer):
                    _ast_cols(op.expr, var, cols)
    return cols


def _pass_value(names):
    if len(names) == 1:
        return F.SlotE(names[0])
    return F.TupleE(tuple(F.SlotE(n) for n in names))


def _is_pass(node, names) -> bool:
    return node == _pass_value(names)


def _attach(ctx, oid, fir, rule):
    """Intern the expression as a new alternative of the OR node."""
    op, payload, kids = _expr_shape(fir)
    try:
        children = [ctx.dag.expr(k) for k in kids]
        aid = ctx.dag.add_alt(oid, op, payload, children, rule=rule)
    except CycleError:
        return []
    return [aid] if aid is not None else []


def _fold_of_and(ctx, aid):
    a = ctx.dag.ands[aid]
    if a.op != "fold":
        return None
    return ctx.dag.expr_of_and(aid)


# ---------------------------------------------------------------------------
# the rules

def _r_loop_to_fold(ctx, oid, aid):
    a = ctx.dag.ands[aid]
    if a.op != "loop":
        return []
    node = ctx.dag.ors[oid]
    region = node.region
    if region is None or node.bounds is None:
        return []
    stmt = region.stmt
    if not isinstance(stmt, (S.QueryLoop, S.CollLoop)):
        return []
    inputs, outputs = node.bounds
    try:
        fold = F.loop_to_fold(stmt, inputs, outputs, legacy=ctx.legacy)
    except F.FoldDecline:
        return []
    return _attach(ctx, oid, fold, "loopToFold")


def _r_t1(ctx, oid, aid):
    f = _fold_of_and(ctx, aid)
    if f is None or len(f.names) != 1:
        return []
    n = f.names[0]
    if f.acc != F.InsertE(F.SlotE(n), F.TVarE(f.var)):
        return []
    if not isinstance(f.source, (F.ExecE, F.LookupE)):
        return []
    if f.init == F.NewListE():
        new = f.source
    else:
        new = F.ConcatE(f.init, f.source)
    return _attach(ctx, oid, new, "T1")


def _r_t2(ctx, oid, aid):
    f = _fold_of_and(ctx, aid)
    if f is None or not isinstance(f.acc, F.CondE):
        return []
    if not _is_pass(f.acc.els, f.names):
        return []
    if not isinstance(f.source, F.ExecE):
        return []
    if F.slot_names(f.acc.pred):
        return []
    pred = _operand_of(f.acc.pred, f.var)
    if pred is None:
        return []
    new = F.FoldE(f.var, f.names, f.acc.then, f.init,
                  F.ExecE(Q.Select(pred, f.source.query)))
    return _attach(ctx, oid, new, "T2")


def _r_n2(ctx, oid, aid):
    f = _fold_of_and(ctx, aid)
    if f is None or not isinstance(f.source, F.ExecE):
        return []
    q = f.source.query
    if not isinstance(q, Q.Select):
        return []
    pred = _fir_of_operand(q.predicate, f.var)
    if pred is None:
        return []
    new = F.FoldE(f.var, f.names,
                  F.CondE(pred, f.acc, _pass_value(f.names)),
                  f.init, F.ExecE(q.child))
    return _attach(ctx, oid, new, "N2")


def _computed_item(f):
    """(item, rebuild) when the single accumulator consumes one scalar
    expression of the cursor row; ``rebuild(new_item)`` reassembles the
    accumulator around a replacement."""
    if len(f.names) != 1:
        return None
    slot = F.SlotE(f.names[0])
    acc = f.acc
    if isinstance(acc, F.InsertE) and acc.coll == slot:
        return acc.item, lambda it: F.InsertE(slot, it)
    if isinstance(acc, F.BinE) and acc.left == slot:
        op = acc.op
        return acc.right, lambda it: F.BinE(op, slot, it)
    return None


def _r_t3(ctx, oid, aid):
    f = _fold_of_and(ctx, aid)
    if f is None or not isinstance(f.source, F.ExecE):
        return []
    q = f.source.query
    if isinstance(q, Q.Aggregate):
        return []
    found = _computed_item(f)
    if found is None:
        return []
    item, rebuild = found
    # only worth pushing when the row feeds a real computation
    if isinstance(item, (F.ConstE, F.TAttrE, F.TVarE)):
        return []
    if not isinstance(item, (F.BinE, F.UnE)):
        return []
    op = _operand_of(item, f.var)
    if op is None:
        return []
    used = _cols_read(item, f.var)
    col = "val"
    k = 2
    while col in used:
        col = f"val{k}"
        k += 1
    new = F.FoldE(f.var, f.names, rebuild(F.TAttrE(f.var, col)), f.init,
                  F.ExecE(Q.Project(((col, op),), q)))
    return _attach(ctx, oid, new, "T3")


def _running_total(acc, name, var):
    """(aggregate fn, column) when the accumulator is a running sum or
    count of the cursor rows."""
    if not (isinstance(acc, F.BinE) and acc.op == "+"):
        return None
    slot = F.SlotE(name)
    if acc.left == slot:
        item = acc.right
    elif acc.right == slot:
        item = acc.left
    else:
        return None
    if item == F.ConstE(1):
        return "count", None
    if isinstance(item, F.TAttrE) and item.var == var:
        return "sum", item.column
    return None


def _aggregate_value(f, fn, col, init):
    base = _strip_decoration(f.source.query, {col} if col else set())
    agg = Q.Aggregate(fn, col, None, base)
    attr = F.AttrE(F.ExecE(agg), col if fn == "sum" else "count")
    return attr if init == F.ConstE(0) else F.BinE("+", init, attr)


def _r_t5(ctx, oid, aid):
    f = _fold_of_and(ctx, aid)
    if f is None or not isinstance(f.source, F.ExecE):
        return []
    if len(f.names) == 1:
        found = _running_total(f.acc, f.names[0], f.var)
        if found is None:
            return []
        fn, col = found
        new = _aggregate_value(f, fn, col, f.init)
        return _attach(ctx, oid, new, "T5")
    # several accumulators: serve each independent running total from an
    # aggregate query and keep the fold for the components that need it
    if not isinstance(f.acc, F.TupleE) or len(f.acc.items) != len(f.names):
        return []
    made = []
    for i, name in enumerate(f.names):
        found = _running_total(f.acc.items[i], name, f.var)
        if found is None:
            continue
        fn, col = found
        if isinstance(f.init, F.TupleE) and len(f.init.items) == len(f.names):
            init_i = f.init.items[i]
        else:
            init_i = F.ProjectE(f.init, i)
        items = tuple(_aggregate_value(f, fn, col, init_i) if j == i
                      else F.ProjectE(f, j)
                      for j in range(len(f.names)))
        made += _attach(ctx, oid, F.TupleE(items), "T5")
    return made


def _strip_decoration(q, needed):
    """Drop ordering and pass-through projections; neither affects an
    aggregate over the result."""
    if isinstance(q, Q.OrderBy):
        return _strip_decoration(q.child, needed)
    if isinstance(q, Q.Project):
        plain = all(isinstance(op, Q.Column) and op.name == name
                    for name, op in q.columns)
        names = {name for name, _ in q.columns}
        if plain and needed <= names:
            return _strip_decoration(q.child, needed)
    return q


def _eq_outer(pred, var):
    """(inner column, outer column) of an equality against ``var``'s row."""
    if not isinstance(pred, Q.ScalarOp) or pred.fn != "eq" or len(pred.args) != 2:
        return None
    for a, b in (pred.args, pred.args[::-1]):
        if isinstance(a, Q.Column) and isinstance(b, Q.Outer):
            e = b.expr
            if (isinstance(e, S.Field) and isinstance(e.obj, S.Var)
                    and e.obj.name == var):
                return a.name, e.attr
    return None


def _r_t4(ctx, oid, aid):
    f = _fold_of_and(ctx, aid)
    if f is None:
        return []
    inner = f.acc
    if not isinstance(inner, F.FoldE) or inner.names != f.names:
        return []
    if not _is_pass(inner.init, f.names):
        return []
    if not isinstance(f.source, F.ExecE) or not isinstance(inner.source, F.ExecE):
        return []
    q1 = f.source.query
    orders = []
    qi = inner.source.query
    while isinstance(qi, Q.OrderBy):
        orders.append(qi.column)
        qi = qi.child
    if not isinstance(qi, Q.Select):
        return []
    m = _eq_outer(qi.predicate, f.var)
    if m is None:
        return []
    a_col, b_col = m
    q2 = qi.child
    if _uses_row(inner.acc, f.var) or _uses_row(inner.acc, inner.var):
        return []
    if ctx.relation_columns is not None:
        s1 = Q.output_schema(q1, ctx.relation_columns)
        s2 = Q.output_schema(q2, ctx.relation_columns)
        if s1 is not None and s2 is not None:
            reads1 = _cols_read(inner.acc, f.var) | {b_col}
            reads2 = _cols_read(inner.acc, inner.var) | {a_col}
            # every column must come from its own side of the join and must
            # not be shadowed when the rows merge
            if (not reads1 <= set(s1) or not reads2 <= set(s2)
                    or reads1 & set(s2)):
                return []
    acc = _rename_cursor(inner.acc, f.var, inner.var)
    right = q2
    for c in reversed(orders):
        right = Q.OrderBy(c, right)
    join = Q.Join(Q.ScalarOp("eq", (Q.Column(b_col), Q.Column(a_col))),
                  q1, right)
    new = F.FoldE(inner.var, f.names, acc, f.init, F.ExecE(join))
    return _attach(ctx, oid, new, "T4")


def _lookup_shape(q):
    """(relation, keyed column, cursor, cursor column) when the query is a
    point selection a cache can answer."""
    if not isinstance(q, Q.Select) or not isinstance(q.child, Q.Scan):
        return None
    if not isinstance(q.predicate, Q.ScalarOp) or q.predicate.fn != "eq":
        return None
    if len(q.predicate.args) != 2:
        return None
    for a, b in (q.predicate.args, q.predicate.args[::-1]):
        if isinstance(a, Q.Column) and isinstance(b, Q.Outer):
            e = b.expr
            if isinstance(e, S.Field) and isinstance(e.obj, S.Var):
                return q.child.relation, a.name, e.obj.name, e.attr
    return None


def _r_n1(ctx, oid, aid):
    f = _fold_of_and(ctx, aid)
    if f is None:
        return []
    bound = {n.var for n in F.walk(f) if isinstance(n, F.FoldE)}
    target = None
    for n in F.walk(f):
        if isinstance(n, F.ExecE):
            m = _lookup_shape(n.query)
            if m is not None and m[2] in bound:
                target = (m[0], m[1])
                break
    if target is None:
        return []
    rel, col = target

    def swap(n):
        if isinstance(n, F.ExecE):
            m = _lookup_shape(n.query)
            if m is not None and (m[0], m[1]) == (rel, col) and m[2] in bound:
                return F.LookupE(rel, col, F.TAttrE(m[2], m[3]))
        return n

    new = F.PrefetchE(rel, col, _map_fir(f, swap))
    return _attach(ctx, oid, new, "N1")


_RULES = {
    "loopToFold": _r_loop_to_fold,
    "T1": _r_t1,
    "T2": _r_t2,
    "T3": _r_t3,
    "T4": _r_t4,
    "T5": _r_t5,
    "N1": _r_n1,
    "N2": _r_n2,
}


# ---------------------------------------------------------------------------
# the expansion engine

def expand(dag: Dag, rules=None, budget: int = 10000, trace: bool = False,
           relation_columns=None, legacy: bool = False) -> ExpansionReport:
    """Saturate the DAG under the enabled rules.

    ``rules`` restricts to a subset of :data:`RULE_ORDER`; order of
    application always follows RULE_ORDER.  ``budget`` bounds the number of
    alternatives added; going past it raises :class:`BudgetExceededError`
    with the partial report attached.  Matching is memoized per (rule, OR,
    alternative), so each pass only examines work created since the last.
    """
    if rules is None:
        enabled = RULE_ORDER
    else:
        unknown = set(rules) - set(RULE_ORDER)
        if unknown:
            raise ValueError(f"unknown rule {sorted(unknown)[0]!r}")
        enabled = tuple(r for r in RULE_ORDER if r in set(rules))
    ctx = _Ctx(dag, relation_columns, legacy)
    rep = ExpansionReport()
    tried: set = set()
    changed = True
    while changed:
        changed = False
        rep.passes += 1
        for oid in sorted(dag.ors):
            node = dag.ors[oid]
            for rname in enabled:
                fn = _RULES[rname]
                for aid in list(node.alts):
                    key = (rname, oid, aid)
                    if key in tried:
                        continue
                    tried.add(key)
                    for new_aid in fn(ctx, oid, aid):
                        rep.applied += 1
                        rep.by_rule[rname] = rep.by_rule.get(rname, 0) + 1
                        if trace:
                            rep.trace.append(
                                f"rule={rname} or={node.label} new_and={new_aid}")
                        changed = True
                        if rep.applied > budget:
                            raise BudgetExceededError(
                                f"expansion exceeded {budget} rule applications",
                                report=rep)
    return rep
