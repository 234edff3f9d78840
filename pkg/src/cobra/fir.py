"""Functional representation of loop computations.

A cursor loop that only accumulates values is the same computation as a
fold: starting from the accumulators' values before the loop, combine one
source row at a time.  In the fold body, ``SlotE(v)`` is the value of
accumulator ``v`` at the start of the iteration, ``TAttrE(t, c)`` a column
of the current row, and ``VarE(x)`` a loop-invariant program variable.

``loop_to_fold`` derives that form by symbolic execution of the loop body:
it runs the statements over an environment mapping variables to expressions
instead of values.  Conditionals merge branch environments into ``CondE``
nodes, nested loops recurse into nested folds, and anything without fold
semantics (while loops, console output, cache population) raises
``FoldDecline``.

Evaluation of the functional form is used in differential tests against the
interpreter; shared subexpressions (the same object reached twice) are
computed once per iteration, matching how emitted code later hoists them.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import queries as Q
from . import syntax as S
from .evaluator import binary, field_of, opaque_call
from .errors import InterpreterError


class FoldDecline(Exception):
    """Loop has no fold form; carries the reason."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# ---------------------------------------------------------------------------
# nodes

@dataclass(frozen=True)
class ConstE:
    value: object


@dataclass(frozen=True)
class VarE:
    name: str


@dataclass(frozen=True)
class SlotE:
    name: str


@dataclass(frozen=True)
class TVarE:
    name: str


@dataclass(frozen=True)
class TAttrE:
    var: str
    column: str


@dataclass(frozen=True)
class BinE:
    op: str
    left: "Fir"
    right: "Fir"


@dataclass(frozen=True)
class UnE:
    op: str
    operand: "Fir"


@dataclass(frozen=True)
class CallE:
    fn: str
    args: tuple


@dataclass(frozen=True)
class AttrE:
    """Column of the first row of a result set."""

    src: "Fir"
    column: str


@dataclass(frozen=True)
class TupleE:
    items: tuple


@dataclass(frozen=True)
class ProjectE:
    src: "Fir"
    index: int


@dataclass(frozen=True)
class CondE:
    pred: "Fir"
    then: "Fir"
    els: "Fir"


@dataclass(frozen=True)
class NewListE:
    pass


@dataclass(frozen=True)
class NewMapE:
    pass


@dataclass(frozen=True)
class InsertE:
    coll: "Fir"
    item: "Fir"


@dataclass(frozen=True)
class MapPutE:
    map: "Fir"
    key: "Fir"
    value: "Fir"


@dataclass(frozen=True)
class ConcatE:
    left: "Fir"
    right: "Fir"


@dataclass(frozen=True)
class ExecE:
    query: Q.QueryExpr


@dataclass(frozen=True)
class LookupE:
    relation: str
    column: str
    key: "Fir"


@dataclass(frozen=True)
class PrefetchE:
    """Load and cache ``relation`` keyed by ``column``, then evaluate
    ``body``.  Cache lookups inside the body become local."""

    relation: str
    column: str
    body: "Fir"


@dataclass(frozen=True)
class FoldE:
    """Fold ``acc`` over the rows of ``source`` starting from ``init``.

    ``names`` lists the accumulators; with several, ``acc`` and ``init`` are
    tuples in the same order and the fold's value is that tuple."""

    var: str
    names: tuple
    acc: "Fir"
    init: "Fir"
    source: "Fir"


Fir = object


def children(node) -> tuple:
    if isinstance(node, BinE):
        return (node.left, node.right)
    if isinstance(node, UnE):
        return (node.operand,)
    if isinstance(node, CallE):
        return node.args
    if isinstance(node, AttrE):
        return (node.src,)
    if isinstance(node, TupleE):
        return node.items
    if isinstance(node, ProjectE):
        return (node.src,)
    if isinstance(node, CondE):
        return (node.pred, node.then, node.els)
    if isinstance(node, InsertE):
        return (node.coll, node.item)
    if isinstance(node, MapPutE):
        return (node.map, node.key, node.value)
    if isinstance(node, ConcatE):
        return (node.left, node.right)
    if isinstance(node, LookupE):
        return (node.key,)
    if isinstance(node, PrefetchE):
        return (node.body,)
    if isinstance(node, FoldE):
        return (node.acc, node.init, node.source)
    return ()


def walk(node):
    yield node
    for c in children(node):
        yield from walk(c)


def free_vars(node) -> frozenset:
    return frozenset(n.name for n in walk(node) if isinstance(n, VarE))


def slot_names(node) -> frozenset:
    return frozenset(n.name for n in walk(node) if isinstance(n, SlotE))


def uses_cursor(node, var: str) -> bool:
    for n in walk(node):
        if isinstance(n, TVarE) and n.name == var:
            return True
        if isinstance(n, TAttrE) and n.var == var:
            return True
        if isinstance(n, ExecE):
            if var in _query_program_vars(n.query):
                return True
    return False


def _query_program_vars(q: Q.QueryExpr) -> set:
    out: set = set()
    from .parser import query_uses
    query_uses(q, out)
    return out


# ---------------------------------------------------------------------------
# evaluation

def eval_fir(node, interp, env, slots=None, rows=None, memo=None):
    """Evaluate against an interpreter session.  ``env`` holds program
    variables, ``slots`` accumulator values, ``rows`` cursor bindings."""
    slots = slots if slots is not None else {}
    rows = rows if rows is not None else {}
    memo = memo if memo is not None else {}
    key = id(node)
    if key in memo:
        return memo[key]
    v = _eval(node, interp, env, slots, rows, memo)
    memo[key] = v
    return v


def _eval(node, interp, env, slots, rows, memo):
    ev = lambda n: eval_fir(n, interp, env, slots, rows, memo)
    if isinstance(node, ConstE):
        return node.value
    if isinstance(node, VarE):
        if node.name not in env:
            raise InterpreterError(f"unbound variable {node.name!r}")
        return env[node.name]
    if isinstance(node, SlotE):
        if node.name not in slots:
            raise InterpreterError(f"unbound accumulator {node.name!r}")
        return slots[node.name]
    if isinstance(node, TVarE):
        # cursor bindings shadow program variables of the same name
        return rows[node.name] if node.name in rows else env[node.name]
    if isinstance(node, TAttrE):
        row = rows[node.var] if node.var in rows else env[node.var]
        return field_of(row, node.column)
    if isinstance(node, BinE):
        if node.op == "&&":
            return bool(ev(node.left)) and bool(ev(node.right))
        if node.op == "||":
            return bool(ev(node.left)) or bool(ev(node.right))
        return binary(node.op, ev(node.left), ev(node.right))
    if isinstance(node, UnE):
        v = ev(node.operand)
        return (not v) if node.op == "!" else -v
    if isinstance(node, CallE):
        return opaque_call(node.fn, tuple(ev(a) for a in node.args))
    if isinstance(node, AttrE):
        return field_of(ev(node.src), node.column)
    if isinstance(node, TupleE):
        return tuple(ev(i) for i in node.items)
    if isinstance(node, ProjectE):
        return ev(node.src)[node.index]
    if isinstance(node, CondE):
        return ev(node.then) if ev(node.pred) else ev(node.els)
    if isinstance(node, NewListE):
        return []
    if isinstance(node, NewMapE):
        return {}
    if isinstance(node, InsertE):
        coll = ev(node.coll)
        return list(coll) + [ev(node.item)]
    if isinstance(node, MapPutE):
        m = dict(ev(node.map))
        m[ev(node.key)] = ev(node.value)
        return m
    if isinstance(node, ConcatE):
        return list(ev(node.left)) + list(ev(node.right))
    if isinstance(node, ExecE):
        scope = {**env, **rows}
        return interp.fetch(node.query, scope)
    if isinstance(node, LookupE):
        return interp.lookup(node.relation, node.column, ev(node.key))
    if isinstance(node, PrefetchE):
        interp.prefetch(node.relation, node.column)
        return ev(node.body)
    if isinstance(node, FoldE):
        src = ev(node.source)
        if not isinstance(src, list):
            raise InterpreterError("fold source is not a result set")
        val = ev(node.init)
        for row in src:
            rows2 = {**rows, node.var: row}
            if len(node.names) == 1:
                slots2 = {node.names[0]: val}
            else:
                slots2 = dict(zip(node.names, val))
            val = eval_fir(node.acc, interp, env, slots2, rows2, {})
        return val
    raise InterpreterError(f"bad functional node {node!r}")


# ---------------------------------------------------------------------------
# loop to fold

def _assigned(stmts) -> list:
    """Variables written by the statements, in first-write order."""
    out: list = []

    def note(name):
        if name not in out:
            out.append(name)

    def go(ss):
        for s in ss:
            if isinstance(s, S.Assign):
                note(s.target)
            elif isinstance(s, (S.ExecQuery, S.CacheLookup)):
                note(s.target)
            elif isinstance(s, S.MethodCall):
                if s.receiver != "console":
                    note(s.receiver)
            elif isinstance(s, (S.QueryLoop, S.CollLoop)):
                go(s.body)
            elif isinstance(s, S.While):
                go(s.body)
            elif isinstance(s, S.If):
                go(s.then_body)
                go(s.else_body)
    go(stmts)
    return out


class _MissingVar(Exception):
    pass


def to_fir(e: S.Expr, env: dict):
    """Program expression to functional form under the symbolic environment."""
    if isinstance(e, S.Var):
        if e.name not in env:
            raise _MissingVar(e.name)
        return env[e.name]
    if isinstance(e, (S.IntLit, S.FloatLit, S.StrLit, S.BoolLit)):
        return ConstE(e.value)
    if isinstance(e, S.ListLit):
        return NewListE()
    if isinstance(e, S.MapLit):
        return NewMapE()
    if isinstance(e, S.Field):
        obj = to_fir(e.obj, env)
        if isinstance(obj, TVarE):
            return TAttrE(obj.name, e.attr)
        return AttrE(obj, e.attr)
    if isinstance(e, S.Binary):
        return BinE(e.op, to_fir(e.left, env), to_fir(e.right, env))
    if isinstance(e, S.Unary):
        return UnE(e.op, to_fir(e.operand, env))
    if isinstance(e, S.CallExpr):
        return CallE(e.fn, tuple(to_fir(a, env) for a in e.args))
    raise FoldDecline(f"expression {e!r} has no functional form")


def _exec_sym(stmts, env: dict) -> None:
    """Run statements symbolically, updating env in place."""
    for s in stmts:
        if isinstance(s, S.Assign):
            env[s.target] = to_fir(s.value, env)
        elif isinstance(s, S.ExecQuery):
            env[s.target] = ExecE(s.query)
        elif isinstance(s, S.CacheLookup):
            env[s.target] = LookupE(s.relation, s.key_column,
                                    to_fir(s.key, env))
        elif isinstance(s, S.MethodCall):
            _method_sym(s, env)
        elif isinstance(s, S.If):
            _if_sym(s, env)
        elif isinstance(s, (S.QueryLoop, S.CollLoop)):
            inner = _fold_of(s, env)
            if len(inner.names) == 1:
                env[inner.names[0]] = inner
            else:
                for i, name in enumerate(inner.names):
                    env[name] = ProjectE(inner, i)
        elif isinstance(s, S.While):
            raise FoldDecline("while loop in body")
        elif isinstance(s, S.Prefetch):
            raise FoldDecline("cache population in body")
        elif isinstance(s, S.Return):
            raise FoldDecline("return in body")
        else:
            raise FoldDecline(f"statement {s!r} in body")


def _method_sym(s: S.MethodCall, env: dict) -> None:
    if s.receiver == "console":
        raise FoldDecline("console output in body")
    if s.receiver not in env:
        raise _MissingVar(s.receiver)
    if s.method in ("append", "add"):
        env[s.receiver] = InsertE(env[s.receiver], to_fir(s.args[0], env))
    elif s.method == "addAll":
        env[s.receiver] = ConcatE(env[s.receiver], to_fir(s.args[0], env))
    elif s.method == "put":
        env[s.receiver] = MapPutE(env[s.receiver], to_fir(s.args[0], env),
                                  to_fir(s.args[1], env))
    else:
        raise FoldDecline(f"method {s.method!r} in body")


def _if_sym(s: S.If, env: dict) -> None:
    pred = to_fir(s.cond, env)
    then_env = dict(env)
    _exec_sym(s.then_body, then_env)
    else_env = dict(env)
    _exec_sym(s.else_body, else_env)
    merged = {}
    for name in list(then_env) + [n for n in else_env if n not in then_env]:
        t = then_env.get(name)
        e = else_env.get(name)
        if t is None or e is None:
            continue            # defined on one path only; a later read declines
        merged[name] = t if t == e else CondE(pred, t, e)
    env.clear()
    env.update(merged)


def _fold_of(stmt, env: dict) -> FoldE:
    if isinstance(stmt, S.QueryLoop):
        source = ExecE(stmt.query)
    else:
        source = to_fir(stmt.source, env)
    assigned = _assigned(stmt.body)
    if stmt.var in assigned:
        raise FoldDecline("loop variable reassigned in body")
    accs = [v for v in assigned if v in env]
    if not accs:
        raise FoldDecline("loop accumulates nothing")
    body_env = dict(env)
    for a in accs:
        body_env[a] = SlotE(a)
    body_env[stmt.var] = TVarE(stmt.var)
    try:
        _exec_sym(stmt.body, body_env)
    except _MissingVar as m:
        raise FoldDecline(f"reads possibly undefined variable {m.args[0]!r}")
    names = tuple(accs)
    if len(names) == 1:
        acc = body_env[names[0]]
        init = env[names[0]]
    else:
        acc = TupleE(tuple(body_env[n] for n in names))
        init = TupleE(tuple(env[n] for n in names))
    return FoldE(stmt.var, names, acc, init, source)


def loop_to_fold(stmt, inputs, outputs, legacy: bool = False) -> FoldE:
    """Fold form of a loop region whose live boundary is ``inputs`` ->
    ``outputs``.  ``legacy`` restricts to single-accumulator loops."""
    assigned = _assigned(stmt.body)
    uninit = [v for v in assigned if v not in inputs and v in outputs]
    if uninit:
        raise FoldDecline(
            f"accumulator {uninit[0]!r} has no value when the loop is empty")
    env = {v: VarE(v) for v in inputs}
    fold = _fold_of(stmt, env)
    if legacy and len(fold.names) > 1:
        raise FoldDecline("multiple accumulators")
    missing = [v for v in outputs if v not in fold.names and v not in inputs]
    if missing:
        raise FoldDecline(f"output {missing[0]!r} is not an accumulator")
    return fold


# ---------------------------------------------------------------------------
# display

def show(node) -> str:
    if isinstance(node, ConstE):
        return repr(node.value)
    if isinstance(node, VarE):
        return node.name
    if isinstance(node, SlotE):
        return f"<{node.name}>"
    if isinstance(node, TVarE):
        return node.name
    if isinstance(node, TAttrE):
        return f"{node.var}.{node.column}"
    if isinstance(node, BinE):
        return f"({show(node.left)} {node.op} {show(node.right)})"
    if isinstance(node, UnE):
        return f"{node.op}{show(node.operand)}"
    if isinstance(node, CallE):
        return f"{node.fn}(" + ", ".join(show(a) for a in node.args) + ")"
    if isinstance(node, AttrE):
        return f"{show(node.src)}.{node.column}"
    if isinstance(node, TupleE):
        return "(" + ", ".join(show(i) for i in node.items) + ")"
    if isinstance(node, ProjectE):
        return f"{show(node.src)}[{node.index}]"
    if isinstance(node, CondE):
        return f"if({show(node.pred)}, {show(node.then)}, {show(node.els)})"
    if isinstance(node, NewListE):
        return "[]"
    if isinstance(node, NewMapE):
        return "{}"
    if isinstance(node, InsertE):
        return f"insert({show(node.coll)}, {show(node.item)})"
    if isinstance(node, MapPutE):
        return f"put({show(node.map)}, {show(node.key)}, {show(node.value)})"
    if isinstance(node, ConcatE):
        return f"concat({show(node.left)}, {show(node.right)})"
    if isinstance(node, ExecE):
        return f"exec[{Q.render(node.query)}]"
    if isinstance(node, LookupE):
        return f"lookup[{node.relation}.{node.column}]({show(node.key)})"
    if isinstance(node, PrefetchE):
        return f"prefetch[{node.relation}.{node.column}]({show(node.body)})"
    if isinstance(node, FoldE):
        return (f"fold[{node.var}]({show(node.acc)}; {show(node.init)}; "
                f"{show(node.source)})")
    return repr(node)
