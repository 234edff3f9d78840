"""Three-address lowering and control-flow graph construction.

Compound expressions are flattened into fresh temporaries named ``_tN``,
numbered left to right in lowering order.  Each lowered record keeps a
reference to the source statement that produced it, so later passes can
regroup records per statement.

Blocks hold maximal straight-line runs of records.  Loop and branch
statements occupy dedicated header blocks.  Boolean conditions built from
``&&`` and ``||`` are decomposed into chained single-predicate blocks, which
is what makes such conditionals unstructured downstream.

The graph always has a synthetic empty entry and exit block; every block is
reachable from the entry and reaches the exit.
"""

from __future__ import annotations

from . import queries as Q
from . import syntax as S
from .errors import SemanticError

EXIT = -1


class Tac:
    """One three-address record.  ``uses`` lists read names (variables and
    temporaries), ``target`` the written name if any."""

    __slots__ = ("op", "target", "uses", "line", "payload", "stmt")

    def __init__(self, op, target, uses, line, payload=None, stmt=None):
        self.op = op
        self.target = target
        self.uses = tuple(uses)
        self.line = line
        self.payload = payload
        self.stmt = stmt

    def __repr__(self):
        t = f"{self.target} = " if self.target else ""
        return f"<{t}{self.op} {self.uses}>"


class Block:
    __slots__ = ("bid", "kind", "tacs", "succs", "preds", "line", "payload", "owner_path")

    def __init__(self, bid, kind="plain", line=0):
        self.bid = bid
        self.kind = kind            # entry | exit | plain | loop_header | pred
        self.tacs = []
        self.succs = []             # ordered; branch blocks: [true, false]
        self.preds = []
        self.line = line
        self.payload = None         # loop_header: (loop_kind, var, source, stmt)
        self.owner_path = ()        # enclosing compound statements, outermost first

    def __repr__(self):
        return f"<B{self.bid} {self.kind} L{self.line} -> {self.succs}>"


class Cfg:
    def __init__(self, fn: S.FunctionDef, filename: str):
        self.fn = fn
        self.filename = filename
        self.blocks: dict[int, Block] = {}
        self.entry_id = None
        self.exit_id = None

    def block(self, bid: int) -> Block:
        return self.blocks[bid]

    def body_blocks(self) -> list:
        return [b for b in self.blocks.values() if b.kind not in ("entry", "exit")]

    def tac_count(self) -> int:
        return sum(len(b.tacs) for b in self.blocks.values())


def _is_temp(name: str) -> bool:
    return name.startswith("_t")


class _Builder:
    def __init__(self, fn: S.FunctionDef, filename: str):
        self.cfg = Cfg(fn, filename)
        self.next_bid = 0
        self.next_temp = 0
        self.stmt_path: list = []

    def new_block(self, kind="plain", line=0) -> Block:
        b = Block(self.next_bid, kind, line)
        b.owner_path = tuple(self.stmt_path)
        self.next_bid += 1
        self.cfg.blocks[b.bid] = b
        return b

    def edge(self, a: Block, b_id: int) -> None:
        a.succs.append(b_id)

    def temp(self) -> str:
        self.next_temp += 1
        return f"_t{self.next_temp}"

    # -- expression lowering ----------------------------------------------

    def lower_expr(self, e: S.Expr, block: Block, stmt, target=None) -> str:
        """Emit records computing ``e``; returns the name holding the value.
        With ``target`` the top-level record writes there directly."""
        line = getattr(e, "line", 0) or (stmt.line if stmt else 0)

        def emit(op, uses, payload=None):
            name = target if target is not None else self.temp()
            block.tacs.append(Tac(op, name, uses, line, payload, stmt))
            return name

        if isinstance(e, S.Var):
            if target is not None:
                return emit("copy", [e.name])
            return e.name
        if isinstance(e, (S.IntLit, S.FloatLit, S.StrLit, S.BoolLit)):
            # literals used as operands still get a record so every value
            # source is a named definition
            return emit("const", [], e.value)
        if isinstance(e, S.ListLit):
            return emit("newlist", [])
        if isinstance(e, S.MapLit):
            return emit("newmap", [])
        if isinstance(e, S.Field):
            obj = self.lower_expr(e.obj, block, stmt)
            return emit("field", [obj], e.attr)
        if isinstance(e, S.Binary):
            l = self.lower_expr(e.left, block, stmt)
            r = self.lower_expr(e.right, block, stmt)
            return emit("bin", [l, r], e.op)
        if isinstance(e, S.Unary):
            v = self.lower_expr(e.operand, block, stmt)
            return emit("un", [v], e.op)
        if isinstance(e, S.CallExpr):
            args = [self.lower_expr(a, block, stmt) for a in e.args]
            return emit("call", args, e.fn)
        raise TypeError(f"not an expression: {e!r}")

    def query_use_names(self, q: Q.QueryExpr) -> list:
        uses: set = set()
        from .parser import query_uses
        query_uses(q, uses)
        return sorted(uses)

    # -- statement lowering ------------------------------------------------

    def lower_simple(self, s: S.Stmt, block: Block) -> None:
        if isinstance(s, S.Assign):
            self.lower_expr(s.value, block, s, target=s.target)
        elif isinstance(s, S.ExecQuery):
            block.tacs.append(Tac("execquery", s.target, self.query_use_names(s.query),
                                  s.line, s.query, s))
        elif isinstance(s, S.Prefetch):
            block.tacs.append(Tac("prefetch", None, [], s.line,
                                  (s.relation, s.key_column), s))
        elif isinstance(s, S.CacheLookup):
            key = self.lower_expr(s.key, block, s)
            block.tacs.append(Tac("lookup", s.target, [key], s.line,
                                  (s.relation, s.key_column), s))
        elif isinstance(s, S.MethodCall):
            args = [self.lower_expr(a, block, s) for a in s.args]
            if s.receiver == "console":
                block.tacs.append(Tac("console", None, args, s.line, s.method, s))
            else:
                block.tacs.append(Tac("method", s.receiver, [s.receiver] + args,
                                      s.line, s.method, s))
        else:
            raise TypeError(f"not a simple statement: {s!r}")

    def lower_condition(self, cond: S.Expr, stmt, true_id_fn, false_id_fn,
                        chained: bool = False) -> Block:
        """Chain of predicate blocks for a condition.  ``true_id_fn`` and
        ``false_id_fn`` supply target block ids on demand (lets the caller
        create join blocks lazily).  Returns the entry block.  Blocks from
        decomposed short-circuit conditions are marked ``pred_chain``; they
        never form structured conditionals."""
        if isinstance(cond, S.Binary) and cond.op == "&&":
            second = None

            def right_entry():
                nonlocal second
                if second is None:
                    second = self.lower_condition(cond.right, stmt, true_id_fn,
                                                  false_id_fn, True)
                return second.bid

            return self.lower_condition(cond.left, stmt, right_entry, false_id_fn, True)
        if isinstance(cond, S.Binary) and cond.op == "||":
            second = None

            def right_entry():
                nonlocal second
                if second is None:
                    second = self.lower_condition(cond.right, stmt, true_id_fn,
                                                  false_id_fn, True)
                return second.bid

            return self.lower_condition(cond.left, stmt, true_id_fn, right_entry, True)
        if isinstance(cond, S.Unary) and cond.op == "!":
            return self.lower_condition(cond.operand, stmt, false_id_fn, true_id_fn,
                                        chained)
        blk = self.new_block("pred_chain" if chained else "pred",
                             line=getattr(cond, "line", stmt.line) or stmt.line)
        v = self.lower_expr(cond, blk, stmt)
        blk.tacs.append(Tac("branch", None, [v], blk.line, cond, stmt))
        blk.payload = (cond, stmt)
        self.edge(blk, true_id_fn())
        self.edge(blk, false_id_fn())
        return blk

    def lower_block(self, stmts, current: Block) -> Block | None:
        """Lower a statement list starting in ``current``.  Returns the open
        block control falls out of, or None when all paths returned."""
        for idx, s in enumerate(stmts):
            if current is None:
                raise SemanticError("unreachable code", self.cfg.filename,
                                    s.line, getattr(s, "col", 0))
            if isinstance(s, (S.Assign, S.ExecQuery, S.Prefetch, S.CacheLookup, S.MethodCall)):
                self.lower_simple(s, current)
            elif isinstance(s, S.Return):
                if s.value is not None:
                    v = self.lower_expr(s.value, current, s)
                    current.tacs.append(Tac("return", None, [v], s.line, None, s))
                else:
                    current.tacs.append(Tac("return", None, [], s.line, None, s))
                self.edge(current, EXIT)
                current = None
            elif isinstance(s, (S.QueryLoop, S.CollLoop)):
                current = self.lower_loop(s, current)
            elif isinstance(s, S.While):
                current = self.lower_while(s, current)
            elif isinstance(s, S.If):
                current = self.lower_if(s, current)
            else:
                raise TypeError(f"not a statement: {s!r}")
        return current

    def lower_loop(self, s, current: Block) -> Block:
        header = self.new_block("loop_header", line=s.line)
        self.edge(current, header.bid)
        if isinstance(s, S.QueryLoop):
            header.tacs.append(Tac("iterate", s.var, self.query_use_names(s.query),
                                   s.line, s.query, s))
            header.payload = ("query", s.var, s.query, s)
        else:
            src = self.lower_expr(s.source, header, s)
            header.tacs.append(Tac("iterate", s.var, [src], s.line, None, s))
            header.payload = ("coll", s.var, s.source, s)
        self.stmt_path.append(s)
        body = self.new_block(line=s.line)
        self.stmt_path.pop()
        after = self.new_block(line=s.end_line)
        self.edge(header, body.bid)
        self.edge(header, after.bid)
        self.stmt_path.append(s)
        tail = self.lower_block(s.body, body)
        self.stmt_path.pop()
        if tail is not None:
            self.edge(tail, header.bid)
        return after

    def lower_while(self, s: S.While, current: Block) -> Block:
        after = self.new_block(line=s.end_line)
        body_entry_holder = []

        def body_id():
            if not body_entry_holder:
                self.stmt_path.append(s)
                body_entry_holder.append(self.new_block(line=s.line))
                self.stmt_path.pop()
            return body_entry_holder[0].bid

        header = self.lower_condition(s.cond, s, body_id, lambda: after.bid)
        if header.kind == "pred":
            header.kind = "loop_header"
            header.payload = ("while", None, s.cond, s)
        self.edge(current, header.bid)
        self.stmt_path.append(s)
        tail = self.lower_block(s.body, self.cfg.blocks[body_id()])
        self.stmt_path.pop()
        if tail is not None:
            self.edge(tail, header.bid)
        return after

    def lower_if(self, s: S.If, current: Block) -> Block | None:
        join_holder = []

        def join_id():
            if not join_holder:
                join_holder.append(self.new_block(line=s.end_line))
            return join_holder[0].bid

        self.stmt_path.append(s)
        then_entry = self.new_block(line=s.then_body[0].line if s.then_body else s.line)
        else_entry = self.new_block(line=s.else_body[0].line if s.else_body else s.end_line) \
            if s.else_body else None
        self.stmt_path.pop()

        header = self.lower_condition(
            s.cond, s,
            lambda: then_entry.bid,
            (lambda: else_entry.bid) if else_entry is not None else join_id,
        )
        self.edge(current, header.bid)

        self.stmt_path.append(s)
        t_tail = self.lower_block(s.then_body, then_entry)
        e_tail = self.lower_block(s.else_body, else_entry) if else_entry is not None else None
        self.stmt_path.pop()

        if t_tail is not None:
            self.edge(t_tail, join_id())
        if else_entry is not None and e_tail is not None:
            self.edge(e_tail, join_id())
        if join_holder:
            return join_holder[0]
        return None   # both branches returned


def _cleanup(cfg: Cfg) -> None:
    """Drop empty plain blocks, rewiring their predecessors."""
    changed = True
    while changed:
        changed = False
        for b in list(cfg.blocks.values()):
            if b.kind != "plain" or b.tacs or b.bid in (cfg.entry_id, cfg.exit_id):
                continue
            if len(b.succs) != 1:
                continue
            succ = b.succs[0]
            if succ == b.bid:
                continue
            for other in cfg.blocks.values():
                other.succs = [succ if x == b.bid else x for x in other.succs]
            del cfg.blocks[b.bid]
            changed = True


def _wire(cfg: Cfg) -> None:
    for b in cfg.blocks.values():
        b.preds = []
    for b in cfg.blocks.values():
        seen = set()
        dedup = []
        for x in b.succs:
            if x not in seen:
                seen.add(x)
                dedup.append(x)
        b.succs = [cfg.exit_id if x == EXIT else x for x in dedup]
    for b in cfg.blocks.values():
        for x in b.succs:
            cfg.blocks[x].preds.append(b.bid)


def build_cfg(fn: S.FunctionDef, filename: str = "<input>") -> Cfg:
    builder = _Builder(fn, filename)
    cfg = builder.cfg
    entry = builder.new_block("entry", line=fn.line)
    cfg.entry_id = entry.bid
    first = builder.new_block(line=fn.body[0].line if fn.body else fn.line)
    builder.edge(entry, first.bid)
    tail = builder.lower_block(fn.body, first)
    exit_blk = builder.new_block("exit", line=fn.end_line)
    cfg.exit_id = exit_blk.bid
    if tail is not None:
        builder.edge(tail, exit_blk.bid)
    _cleanup(cfg)
    _wire(cfg)
    unreachable = set(cfg.blocks) - _reachable(cfg)
    if unreachable:
        bid = sorted(unreachable)[0]
        raise SemanticError("unreachable code", filename, cfg.blocks[bid].line, 0)
    return cfg


def _reachable(cfg: Cfg) -> set:
    seen = {cfg.entry_id}
    work = [cfg.entry_id]
    while work:
        for s in cfg.blocks[work.pop()].succs:
            if s not in seen:
                seen.add(s)
                work.append(s)
    return seen


# ---------------------------------------------------------------------------
# liveness

def tac_defs_uses(t: Tac) -> tuple:
    defs = {t.target} if t.target is not None else set()
    return defs, set(t.uses)


def liveness(cfg: Cfg, seed: set) -> dict:
    """Backward live-variable analysis.  ``seed`` is the live set at function
    exit (parameters, typically).  Returns block id -> (live_in, live_out)."""
    live_in = {bid: set() for bid in cfg.blocks}
    live_out = {bid: set() for bid in cfg.blocks}
    live_in[cfg.exit_id] = set(seed)
    order = list(cfg.blocks)
    changed = True
    while changed:
        changed = False
        for bid in order:
            if bid == cfg.exit_id:
                continue
            b = cfg.blocks[bid]
            out = set()
            for s in b.succs:
                out |= live_in[s]
            cur = set(out)
            for t in reversed(b.tacs):
                defs, uses = tac_defs_uses(t)
                cur = (cur - defs) | uses
            if out != live_out[bid] or cur != live_in[bid]:
                live_out[bid] = out
                live_in[bid] = cur
                changed = True
    return {bid: (live_in[bid], live_out[bid]) for bid in cfg.blocks}


def visible(names: set) -> frozenset:
    """Strip lowering temporaries; they never cross statement boundaries."""
    return frozenset(n for n in names if not _is_temp(n))
