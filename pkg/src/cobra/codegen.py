"""Emit the program a plan denotes back to source form.

Structural alternatives (sequences, loops, conditionals, opaque regions)
re-emit their original statements with rewritten children spliced in.
Functional alternatives are lowered to statements: folds become loops
over fresh accumulator updates, query nodes become ``executeQuery`` /
``cacheByColumn`` / ``lookupCache`` statements, and pure operators map
straight onto expressions.  The result parses and interprets again, so
emitted plans can be checked against the original program.
"""

from __future__ import annotations

from . import fir as F
from . import syntax as S
from .errors import UnloweredOperatorError

_REGION_OPS = ("seq", "loop", "cond", "basicblock", "blackbox")


def emit_plan(dag, choice, fn: S.FunctionDef) -> S.FunctionDef:
    """Function computing the chosen plan of ``dag``."""
    em = _Emitter(dag, choice, fn)
    body = em.stmts_of_or(dag.root)
    return S.FunctionDef(fn.name, fn.params, tuple(body), fn.line, fn.end_line)


def emit_source(dag, choice, program: S.Program, entry: str) -> str:
    """Whole-program source with the entry function replaced by the plan."""
    fns = tuple(emit_plan(dag, choice, f) if f.name == entry else f
                for f in program.functions)
    return S.emit_program(S.Program(fns, program.filename))


def _region_stmts(region) -> list:
    if region.stmts:
        return list(region.stmts)
    if region.kind == "block":
        return [region.stmt] if region.stmt is not None else []
    return [s for c in region.children for s in _region_stmts(c)]


class _Emitter:
    def __init__(self, dag, choice, fn):
        self.dag = dag
        self.choice = choice
        self.used = set(_names_of_fn(fn))
        self.counter = 0
        self.lowered = {}            # id(fold) -> True, per emission

    def fresh(self) -> str:
        while True:
            name = f"_t{self.counter}"
            self.counter += 1
            if name not in self.used:
                self.used.add(name)
                return name

    # -- structure -------------------------------------------------------

    def stmts_of_or(self, oid) -> list:
        node = self.dag.ors[oid]
        if not node.alts:
            if node.payload is None:
                raise UnloweredOperatorError(f"{node.label} has no alternatives")
            return _region_stmts(node.payload[1])
        a = self.dag.ands[self.choice[oid]]
        if a.op in _REGION_OPS:
            return self.region_and(a)
        expr = self.dag.expr_of_choice(oid, self.choice)
        self._note_names(expr)
        outputs = tuple(node.bounds[1]) if node.bounds else ()
        out: list = []
        self.assign_value(outputs, expr, out)
        return out

    def region_and(self, a) -> list:
        if a.op == "seq":
            return [s for c in a.children for s in self.stmts_of_or(c)]
        if a.op in ("basicblock", "blackbox"):
            return _region_stmts(a.payload)
        region = a.payload
        stmt = region.stmt
        if a.op == "loop":
            body = (tuple(self.stmts_of_or(a.children[1]))
                    if len(a.children) > 1 else stmt.body)
            if isinstance(stmt, S.QueryLoop):
                return [S.QueryLoop(stmt.var, stmt.query, body)]
            if isinstance(stmt, S.CollLoop):
                return [S.CollLoop(stmt.var, stmt.source, body)]
            if isinstance(stmt, S.While):
                return [S.While(stmt.cond, body)]
            raise UnloweredOperatorError(f"loop over {stmt!r}")
        if a.op == "cond":
            roles = {c.role: o for c, o in zip(region.children, a.children)}
            then = tuple(self.stmts_of_or(roles["then"])) if "then" in roles else ()
            els = tuple(self.stmts_of_or(roles["else"])) if "else" in roles else ()
            # the branch header run carries any statements fused before the if
            hdr = _region_stmts(region.children[0])
            if hdr and hdr[-1] is stmt:
                hdr = hdr[:-1]
            return hdr + [S.If(stmt.cond, then, els)]
        raise UnloweredOperatorError(f"region operator {a.op!r}")

    # -- values at statement position ------------------------------------

    def assign_value(self, outputs, e, out) -> None:
        if isinstance(e, F.PrefetchE):
            out.append(S.Prefetch(e.relation, e.column))
            self.assign_value(outputs, e.body, out)
            return
        if isinstance(e, F.FoldE):
            self.fold_stmts(e, out)
            return
        if len(outputs) == 1:
            self.assign_one(outputs[0], e, out)
            return
        if isinstance(e, F.TupleE):
            order = self._tuple_order(e)
            vals = []
            for comp in e.items:
                if isinstance(comp, F.ProjectE) and isinstance(comp.src, F.FoldE):
                    self.fold_once(comp.src, out)
                    vals.append(S.Var(comp.src.names[comp.index]))
                else:
                    tmp = self.fresh()
                    self.assign_one(tmp, comp, out)
                    vals.append(S.Var(tmp))
            for name, v in zip(order, vals):
                if not (isinstance(v, S.Var) and v.name == name):
                    out.append(S.Assign(name, v))
            return
        raise UnloweredOperatorError(
            f"cannot bind {len(outputs)} outputs from {F.show(e)}")

    def _tuple_order(self, e) -> tuple:
        for n in F.walk(e):
            if isinstance(n, F.FoldE) and len(n.names) == len(e.items):
                return n.names
        raise UnloweredOperatorError("tuple value names its components nowhere")

    def fold_once(self, f, out) -> None:
        if id(f) in self.lowered:
            return
        self.lowered[id(f)] = True
        self.fold_stmts(f, out)

    def fold_stmts(self, f, out) -> None:
        self.lowered[id(f)] = True
        if len(f.names) == 1:
            self.assign_one(f.names[0], f.init, out)
        else:
            if not isinstance(f.init, F.TupleE) or len(f.init.items) != len(f.names):
                raise UnloweredOperatorError("fold initializer is not a tuple")
            for n, e in zip(f.names, f.init.items):
                self.assign_one(n, e, out)
        body: list = []
        self.acc_stmts(f, body)
        if isinstance(f.source, F.ExecE):
            out.append(S.QueryLoop(f.var, f.source.query, tuple(body)))
        else:
            src = self.expr_ast(f.source, out)
            out.append(S.CollLoop(f.var, src, tuple(body)))

    def acc_stmts(self, f, out) -> None:
        if len(f.names) == 1:
            self.commit(f.names[0], f.acc, out, out)
            return
        if not isinstance(f.acc, F.TupleE) or len(f.acc.items) != len(f.names):
            raise UnloweredOperatorError("fold accumulator is not a tuple")
        reads: list = []          # value computation, old accumulator state
        writes: list = []         # accumulator updates
        for n, comp in zip(f.names, f.acc.items):
            self.commit(n, comp, reads, writes)
        out.extend(reads)
        out.extend(writes)

    def commit(self, name, comp, reads, writes) -> None:
        """Statements updating one accumulator.  Argument values land in
        ``reads`` so every update sees the previous iteration's state."""
        if comp == F.SlotE(name):
            return
        if isinstance(comp, F.FoldE) and comp.names == (name,) and \
                comp.init == F.SlotE(name):
            # a nested loop keeps accumulating into the same name
            self.fold_stmts(comp, reads)
            return
        ops = _self_chain(comp, name)
        if ops is not None:
            for method, args in ops:
                asts = tuple(self._read_arg(name, a, reads) for a in args)
                writes.append(S.MethodCall(name, method, asts))
            return
        if isinstance(comp, F.CondE):
            pred = self._read_arg(name, comp.pred, reads)
            t_r, t_w, e_r, e_w = [], [], [], []
            self.commit(name, comp.then, t_r, t_w)
            self.commit(name, comp.els, e_r, e_w)
            then, els = tuple(t_r + t_w), tuple(e_r + e_w)
            if not then and not els:
                return
            if not then:
                writes.append(S.If(S.Unary("!", pred), els, ()))
            else:
                writes.append(S.If(pred, then, els))
            return
        ast = self._read_arg(name, comp, reads, own_ok=True)
        writes.append(S.Assign(name, ast))

    def _read_arg(self, name, e, reads, own_ok=False):
        ast = self.expr_ast(e, reads)
        slots = F.slot_names(e)
        if own_ok:
            slots = slots - {name}
        if slots:
            tmp = self.fresh()
            reads.append(S.Assign(tmp, ast))
            return S.Var(tmp)
        return ast

    # -- single assignments ----------------------------------------------

    def assign_one(self, target, e, out) -> None:
        if e == F.VarE(target) or e == F.SlotE(target):
            return
        if isinstance(e, F.FoldE):
            self.fold_stmts(e, out)
            if len(e.names) == 1:
                if e.names[0] != target:
                    out.append(S.Assign(target, S.Var(e.names[0])))
                return
            raise UnloweredOperatorError(
                f"fold of {len(e.names)} accumulators in single assignment")
        if isinstance(e, F.ProjectE):
            if not isinstance(e.src, F.FoldE):
                raise UnloweredOperatorError("projection of a non-fold value")
            self.fold_once(e.src, out)
            name = e.src.names[e.index]
            if name != target:
                out.append(S.Assign(target, S.Var(name)))
            return
        if isinstance(e, F.PrefetchE):
            out.append(S.Prefetch(e.relation, e.column))
            self.assign_one(target, e.body, out)
            return
        if isinstance(e, F.ExecE):
            out.append(S.ExecQuery(target, e.query))
            return
        if isinstance(e, F.LookupE):
            out.append(S.CacheLookup(target, e.relation, e.column,
                                     self.expr_ast(e.key, out)))
            return
        if isinstance(e, (F.ConcatE, F.InsertE, F.MapPutE)):
            base, ops = _chain(e)
            is_map = any(m == "put" for m, _ in ops)
            if base == F.VarE(target) or base == F.SlotE(target):
                pass                             # updates extend the value in place
            elif isinstance(base, (F.NewListE, F.NewMapE)):
                out.append(S.Assign(target, self.expr_ast(base, out)))
            elif not is_map:
                # updated copy of another list
                out.append(S.Assign(target, S.ListLit()))
                out.append(S.MethodCall(target, "addAll",
                                        (self.expr_ast(base, out),)))
            else:
                raise UnloweredOperatorError("map update on a shared value")
            for method, args in ops:
                asts = tuple(self.expr_ast(a, out) for a in args)
                out.append(S.MethodCall(target, method, asts))
            return
        if isinstance(e, F.CondE):
            pred = self.expr_ast(e.pred, out)
            then: list = []
            self.assign_one(target, e.then, then)
            els: list = []
            self.assign_one(target, e.els, els)
            if not then and not els:
                return
            if not then:
                out.append(S.If(S.Unary("!", pred), tuple(els), ()))
            else:
                out.append(S.If(pred, tuple(then), tuple(els)))
            return
        if isinstance(e, F.TupleE):
            raise UnloweredOperatorError("tuple value in single assignment")
        out.append(S.Assign(target, self.expr_ast(e, out)))

    # -- expressions -----------------------------------------------------

    def expr_ast(self, e, out):
        """Expression for a value; statement-only forms are hoisted into
        ``out`` behind a fresh name."""
        if isinstance(e, F.ConstE):
            return _lit(e.value)
        if isinstance(e, (F.VarE, F.TVarE, F.SlotE)):
            return S.Var(e.name)
        if isinstance(e, F.TAttrE):
            return S.Field(S.Var(e.var), e.column)
        if isinstance(e, F.BinE):
            return S.Binary(e.op, self.expr_ast(e.left, out),
                            self.expr_ast(e.right, out))
        if isinstance(e, F.UnE):
            return S.Unary(e.op, self.expr_ast(e.operand, out))
        if isinstance(e, F.CallE):
            return S.CallExpr(e.fn, tuple(self.expr_ast(a, out) for a in e.args))
        if isinstance(e, F.AttrE):
            return S.Field(self.expr_ast(e.src, out), e.column)
        if isinstance(e, F.NewListE):
            return S.ListLit()
        if isinstance(e, F.NewMapE):
            return S.MapLit()
        tmp = self.fresh()
        self.assign_one(tmp, e, out)
        return S.Var(tmp)

    def _note_names(self, expr) -> None:
        for n in F.walk(expr):
            if isinstance(n, (F.VarE, F.TVarE, F.SlotE)):
                self.used.add(n.name)
            elif isinstance(n, F.TAttrE):
                self.used.add(n.var)
            elif isinstance(n, F.FoldE):
                self.used.add(n.var)
                self.used.update(n.names)


def _chain(e):
    """Peel collection updates down to their base value."""
    ops: list = []
    cur = e
    while True:
        if isinstance(cur, F.InsertE):
            ops.append(("append", (cur.item,)))
            cur = cur.coll
        elif isinstance(cur, F.MapPutE):
            ops.append(("put", (cur.key, cur.value)))
            cur = cur.map
        elif isinstance(cur, F.ConcatE):
            ops.append(("addAll", (cur.right,)))
            cur = cur.left
        else:
            break
    ops.reverse()
    return cur, ops


def _self_chain(e, name):
    """Update operations applied to the accumulator itself, or None."""
    base, ops = _chain(e)
    if ops and (base == F.SlotE(name) or base == F.VarE(name)):
        return ops
    return None


def _lit(v):
    if isinstance(v, bool):
        return S.BoolLit(v)
    if isinstance(v, int):
        return S.IntLit(v)
    if isinstance(v, float):
        return S.FloatLit(v)
    if isinstance(v, str):
        return S.StrLit(v)
    raise UnloweredOperatorError(f"constant {v!r} has no literal form")


def _names_of_fn(fn: S.FunctionDef):
    names = {p.name for p in fn.params}

    def expr(e):
        if isinstance(e, S.Var):
            names.add(e.name)
        elif isinstance(e, S.Field):
            expr(e.obj)
        elif isinstance(e, S.Binary):
            expr(e.left)
            expr(e.right)
        elif isinstance(e, S.Unary):
            expr(e.operand)
        elif isinstance(e, S.CallExpr):
            for a in e.args:
                expr(a)

    def stmt(s):
        if isinstance(s, S.Assign):
            names.add(s.target)
            expr(s.value)
        elif isinstance(s, (S.ExecQuery, S.CacheLookup)):
            names.add(s.target)
            if isinstance(s, S.CacheLookup):
                expr(s.key)
        elif isinstance(s, S.MethodCall):
            names.add(s.receiver)
            for a in s.args:
                expr(a)
        elif isinstance(s, S.Return):
            if s.value is not None:
                expr(s.value)
        elif isinstance(s, (S.QueryLoop, S.CollLoop)):
            names.add(s.var)
            if isinstance(s, S.CollLoop):
                expr(s.source)
            for b in s.body:
                stmt(b)
        elif isinstance(s, S.While):
            expr(s.cond)
            for b in s.body:
                stmt(b)
        elif isinstance(s, S.If):
            expr(s.cond)
            for b in s.then_body:
                stmt(b)
            for b in s.else_body:
                stmt(b)

    for s in fn.body:
        stmt(s)
    return names
