"""Reference interpreter and in-memory query evaluation.

This is the semantic ground truth the rewriter is checked against: two
program variants are considered equivalent when running them on the same
database produces the same output state.

The output state of a run is the final value of every parameter plus the
return value.  Mutating a parameter (out-parameter style) is therefore
observable; console output and query counters are informational only.

Query results are multisets with a deterministic order: scans follow
storage order, joins are left-major nested loops, ``orderby`` is a stable
sort.  ``executeQuery`` and cursor loops share a per-run result cache keyed
by the concrete SQL text, the way an ORM session caches repeated queries,
so only distinct statements reach the database.  Column caches are
populated by ``cacheByColumn`` and read by ``lookupCache``; looking up
without a prior prefetch is an error, a missing key yields an empty list.
"""

from __future__ import annotations

import json
import random

from . import queries as Q
from . import syntax as S
from .errors import InterpreterError


# ---------------------------------------------------------------------------
# query evaluation

def _operand(op, row, resolve):
    if isinstance(op, Q.Column):
        if row is None or op.name not in row:
            raise InterpreterError(f"unknown column {op.name!r} in row")
        return row[op.name]
    if isinstance(op, Q.Const):
        return op.value
    if isinstance(op, Q.Outer):
        return resolve(op)
    if isinstance(op, Q.ScalarOp):
        args = [_operand(a, row, resolve) for a in op.args]
        return _scalar(op.fn, args)
    raise InterpreterError(f"bad operand {op!r}")


def _scalar(fn, args):
    a = args[0]
    b = args[1] if len(args) > 1 else None
    if fn == "eq":
        return a == b
    if fn == "ne":
        return a != b
    if fn == "lt":
        return a < b
    if fn == "le":
        return a <= b
    if fn == "gt":
        return a > b
    if fn == "ge":
        return a >= b
    if fn == "and":
        return bool(a) and bool(b)
    if fn == "or":
        return bool(a) or bool(b)
    if fn == "not":
        return not a
    if fn == "add":
        return a + b
    if fn == "sub":
        return a - b
    if fn == "mul":
        return a * b
    if fn == "div":
        return a / b
    raise InterpreterError(f"unknown scalar function {fn!r}")


def eval_query(q: Q.QueryExpr, db: dict, resolve=None) -> list:
    """Evaluate a query against ``db`` (relation name -> list of row dicts).
    ``resolve`` maps Outer operands to concrete values."""
    if resolve is None:
        def resolve(op):
            raise InterpreterError("query references program scope but no "
                                   "resolver was given")
    if isinstance(q, Q.Scan):
        if q.relation not in db:
            raise InterpreterError(f"unknown relation {q.relation!r}")
        return list(db[q.relation])
    if isinstance(q, Q.Select):
        rows = eval_query(q.child, db, resolve)
        return [r for r in rows if _operand(q.predicate, r, resolve)]
    if isinstance(q, Q.Project):
        rows = eval_query(q.child, db, resolve)
        return [{name: _operand(op, r, resolve) for name, op in q.columns}
                for r in rows]
    if isinstance(q, Q.OrderBy):
        rows = eval_query(q.child, db, resolve)
        return sorted(rows, key=lambda r: _sort_key(r.get(q.column)))
    if isinstance(q, Q.Join):
        left = eval_query(q.left, db, resolve)
        right = eval_query(q.right, db, resolve)
        out = []
        for l in left:
            for r in right:
                merged = {**l, **r}
                if _operand(q.predicate, merged, resolve):
                    out.append(merged)
        return out
    if isinstance(q, Q.Aggregate):
        rows = eval_query(q.child, db, resolve)
        name = q.column if q.column is not None else "count"
        if q.group_by is None:
            return [{name: _agg(q.agg_fn, q.column, rows)}]
        groups: dict = {}
        for r in rows:
            groups.setdefault(r[q.group_by], []).append(r)
        return [{q.group_by: g, name: _agg(q.agg_fn, q.column, rs)}
                for g, rs in groups.items()]
    raise InterpreterError(f"bad query node {q!r}")


def _agg(fn, col, rows):
    vals = [r[col] for r in rows] if col is not None else rows
    if fn == "count":
        return len(vals)
    if fn == "sum":
        return sum(vals) if vals else 0
    if fn == "min":
        return min(vals) if vals else None
    if fn == "max":
        return max(vals) if vals else None
    raise InterpreterError(f"unknown aggregate {fn!r}")


def _sort_key(v):
    # stable total order across the types a column can hold
    if v is None:
        return (0, 0)
    if isinstance(v, bool):
        return (1, v)
    if isinstance(v, (int, float)):
        return (2, v)
    return (3, str(v))


# ---------------------------------------------------------------------------
# program interpretation

class RunResult:
    def __init__(self, params, ret, console, query_count, rows_transferred):
        self.params = params                # name -> final value
        self.ret = ret
        self.console = console              # list of printed values
        self.query_count = query_count
        self.rows_transferred = rows_transferred

    def output_state(self):
        return ("state",
                tuple((k, freeze(v)) for k, v in self.params.items()),
                freeze(self.ret))

    def __repr__(self):
        return (f"<RunResult queries={self.query_count} "
                f"rows={self.rows_transferred}>")


def freeze(v):
    """Hashable structural snapshot.  Map iteration order is part of the
    value: a cumulative map built in a different row order is a different
    result."""
    if isinstance(v, dict):
        return ("map", tuple((freeze(k), freeze(x)) for k, x in v.items()))
    if isinstance(v, list):
        return ("list", tuple(freeze(x) for x in v))
    if isinstance(v, tuple):
        return ("tuple", tuple(freeze(x) for x in v))
    return v


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class Interpreter:
    def __init__(self, program: S.Program, db: dict):
        self.program = program
        self.db = db
        self.console = []
        self.query_count = 0
        self.rows_transferred = 0
        self.session: dict = {}             # concrete sql -> rows
        self.caches: dict = {}              # (relation, column) -> key -> rows

    # -- expressions -----------------------------------------------------

    def eval_expr(self, e, env):
        if isinstance(e, S.Var):
            if e.name not in env:
                raise InterpreterError(f"undefined variable {e.name!r}")
            return env[e.name]
        if isinstance(e, (S.IntLit, S.FloatLit, S.StrLit, S.BoolLit)):
            return e.value
        if isinstance(e, S.ListLit):
            return []
        if isinstance(e, S.MapLit):
            return {}
        if isinstance(e, S.Field):
            obj = self.eval_expr(e.obj, env)
            return field_of(obj, e.attr)
        if isinstance(e, S.Binary):
            if e.op == "&&":
                return self._bool(e.left, env) and self._bool(e.right, env)
            if e.op == "||":
                return self._bool(e.left, env) or self._bool(e.right, env)
            return binary(e.op, self.eval_expr(e.left, env),
                          self.eval_expr(e.right, env))
        if isinstance(e, S.Unary):
            v = self.eval_expr(e.operand, env)
            if e.op == "!":
                if not isinstance(v, bool):
                    raise InterpreterError("'!' needs a boolean")
                return not v
            return -v
        if isinstance(e, S.CallExpr):
            args = tuple(self.eval_expr(a, env) for a in e.args)
            return opaque_call(e.fn, args)
        raise InterpreterError(f"bad expression {e!r}")

    def _bool(self, e, env):
        v = self.eval_expr(e, env)
        if not isinstance(v, bool):
            raise InterpreterError("condition is not a boolean")
        return v

    def _resolver(self, env):
        def resolve(op: Q.Outer):
            return self.eval_expr(op.expr, env)
        return resolve

    # -- queries over the session ---------------------------------------

    def fetch(self, q: Q.QueryExpr, env) -> list:
        resolve = self._resolver(env)
        sql = Q.render(q, concrete=resolve)
        if sql in self.session:
            return self.session[sql]
        rows = eval_query(q, self.db, resolve)
        self.session[sql] = rows
        self.query_count += 1
        self.rows_transferred += len(rows)
        return rows

    def prefetch(self, relation, column):
        if relation not in self.db:
            raise InterpreterError(f"unknown relation {relation!r}")
        rows = self.db[relation]
        cache: dict = {}
        for r in rows:
            cache.setdefault(r.get(column), []).append(r)
        self.caches[(relation, column)] = cache
        self.query_count += 1
        self.rows_transferred += len(rows)

    def lookup(self, relation, column, key):
        cache = self.caches.get((relation, column))
        if cache is None:
            raise InterpreterError(
                f"lookupCache before cacheByColumn({relation}, {column})")
        return list(cache.get(key, []))

    # -- statements ------------------------------------------------------

    def exec_block(self, stmts, env):
        for s in stmts:
            self.exec_stmt(s, env)

    def exec_stmt(self, s, env):
        if isinstance(s, S.Assign):
            env[s.target] = self.eval_expr(s.value, env)
        elif isinstance(s, S.ExecQuery):
            env[s.target] = self.fetch(s.query, env)
        elif isinstance(s, S.Prefetch):
            self.prefetch(s.relation, s.key_column)
        elif isinstance(s, S.CacheLookup):
            env[s.target] = self.lookup(s.relation, s.key_column,
                                        self.eval_expr(s.key, env))
        elif isinstance(s, S.MethodCall):
            self.exec_method(s, env)
        elif isinstance(s, S.Return):
            raise _Return(self.eval_expr(s.value, env)
                          if s.value is not None else None)
        elif isinstance(s, S.QueryLoop):
            rows = self.fetch(s.query, env)
            for r in rows:
                env[s.var] = r
                self.exec_block(s.body, env)
            env.pop(s.var, None)
        elif isinstance(s, S.CollLoop):
            src = self.eval_expr(s.source, env)
            if not isinstance(src, list):
                raise InterpreterError("for-loop source is not a list")
            for v in list(src):
                env[s.var] = v
                self.exec_block(s.body, env)
            env.pop(s.var, None)
        elif isinstance(s, S.While):
            while self._bool(s.cond, env):
                self.exec_block(s.body, env)
        elif isinstance(s, S.If):
            if self._bool(s.cond, env):
                self.exec_block(s.then_body, env)
            else:
                self.exec_block(s.else_body, env)
        else:
            raise InterpreterError(f"bad statement {s!r}")

    def exec_method(self, s: S.MethodCall, env):
        args = [self.eval_expr(a, env) for a in s.args]
        if s.receiver == "console":
            if s.method != "print":
                raise InterpreterError(f"console has no method {s.method!r}")
            self.console.extend(args)
            return
        recv = env.get(s.receiver)
        if recv is None and s.receiver not in env:
            raise InterpreterError(f"undefined variable {s.receiver!r}")
        if isinstance(recv, list):
            if s.method == "append" or s.method == "add":
                recv.append(args[0])
                return
            if s.method == "addAll":
                if not isinstance(args[0], list):
                    raise InterpreterError("addAll needs a list")
                recv.extend(args[0])
                return
        if isinstance(recv, dict):
            if s.method == "put":
                recv[args[0]] = args[1]
                return
        raise InterpreterError(
            f"no method {s.method!r} on value of {s.receiver!r}")


def field_of(obj, attr):
    if isinstance(obj, dict):
        if attr not in obj:
            raise InterpreterError(f"row has no column {attr!r}")
        return obj[attr]
    if isinstance(obj, list):
        # field access on a result set reads the first row
        if not obj:
            raise InterpreterError(f"field {attr!r} on empty result")
        return field_of(obj[0], attr)
    raise InterpreterError(f"field {attr!r} on non-row value")


def binary(op, l, r):
    if op == "+":
        if isinstance(l, str) or isinstance(r, str):
            return str(l) + str(r)
        return l + r
    if op == "-":
        return l - r
    if op == "*":
        return l * r
    if op == "/":
        return l / r
    if op == "==":
        return l == r
    if op == "!=":
        return l != r
    if op == "<":
        return l < r
    if op == "<=":
        return l <= r
    if op == ">":
        return l > r
    if op == ">=":
        return l >= r
    raise InterpreterError(f"unknown operator {op!r}")


def opaque_call(fn, args):
    """Free functions are uninterpreted: equal arguments give equal results,
    which is all equivalence checking needs."""
    return ("call", fn) + tuple(args)


def run_function(program: S.Program, name: str, args: list, db: dict) -> RunResult:
    fn = program.function(name)
    if len(args) != len(fn.params):
        raise InterpreterError(
            f"{name} takes {len(fn.params)} arguments, got {len(args)}")
    interp = Interpreter(program, db)
    env = {p.name: a for p, a in zip(fn.params, args)}
    ret = None
    try:
        interp.exec_block(fn.body, env)
    except _Return as r:
        ret = r.value
    params = {p.name: env.get(p.name) for p in fn.params}
    return RunResult(params, ret, interp.console,
                     interp.query_count, interp.rows_transferred)


# ---------------------------------------------------------------------------
# databases

def load_db(path: str) -> dict:
    """Database JSON.  Relations are either ``{"schema": [cols],
    "rows": [[values]]}`` or already a list of row dicts."""
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise InterpreterError("database file must map relations to rows")
    db = {}
    for rel, val in data.items():
        if isinstance(val, dict):
            try:
                schema, rows = val["schema"], val["rows"]
            except KeyError as missing:
                raise InterpreterError(
                    f"relation {rel!r} needs {missing.args[0]!r}")
            bad = next((r for r in rows if len(r) != len(schema)), None)
            if bad is not None:
                raise InterpreterError(
                    f"relation {rel!r} has a row of width {len(bad)}, "
                    f"schema has {len(schema)} columns")
            db[rel] = [dict(zip(schema, r)) for r in rows]
        elif isinstance(val, list):
            db[rel] = val
        else:
            raise InterpreterError(f"relation {rel!r} is not a table")
    return db


def generate_db(seed: int, schemas: dict) -> dict:
    """Small random database for differential testing.

    ``schemas`` maps relation name to a spec dict:

      rows     int or (lo, hi) range
      key      column name given unique values 1..n
      fk       {column: parent_relation} drawn from the parent's keys
      values   {column: (lo, hi)} uniform ints
      floats   {column: (lo, hi)} uniform floats rounded to 2 digits

    Relations are generated in dict order, so parents must precede the
    relations whose foreign keys reference them.  Every foreign key
    resolves to an existing parent row.
    """
    rng = random.Random(seed)
    db: dict = {}
    keys: dict = {}
    for rel, spec in schemas.items():
        n = spec.get("rows", 50)
        if isinstance(n, tuple):
            n = rng.randint(*n)
        rows = []
        for i in range(1, n + 1):
            row = {}
            if "key" in spec:
                row[spec["key"]] = i
            for col, parent in spec.get("fk", {}).items():
                row[col] = rng.choice(keys[parent])
            for col, (lo, hi) in spec.get("values", {}).items():
                row[col] = rng.randint(lo, hi)
            for col, (lo, hi) in spec.get("floats", {}).items():
                row[col] = round(rng.uniform(lo, hi), 2)
            rows.append(row)
        if "key" in spec:
            keys[rel] = [r[spec["key"]] for r in rows]
        db[rel] = rows
    return db
