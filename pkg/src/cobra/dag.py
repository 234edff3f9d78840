"""AND-OR DAG of program alternatives.

An OR node stands for one computation and holds the alternative ways to
produce it; an AND node is one such way: an operator applied to child
computations.  Rewrite rules only ever add alternatives, so everything the
DAG ever contained stays available for costing and extraction.

The initial DAG mirrors the region tree: every region becomes an OR node;
sequences, loops and conditionals become AND nodes over their parts;
straight-line runs and black boxes stay as payload leaves with no
alternatives.  Rewriting then grows the DAG, for example by giving a loop
OR a fold alternative whose accumulator expression is a sub-DAG of its own.

Expression sub-DAGs are hash-consed: building the same functional
expression twice yields the same OR node, which is how alternatives share
structure.  Adding an alternative whose children can reach the target OR
would make a computation depend on itself; that is detected before any
mutation and raises ``CycleError``.
"""

from __future__ import annotations

from . import fir as F
from .errors import CycleError, InternalError


class OrNode:
    __slots__ = ("oid", "alts", "payload", "label", "initial", "region", "bounds")

    def __init__(self, oid, label, payload=None, initial=False, region=None,
                 bounds=None):
        self.oid = oid
        self.alts = []              # AndNode ids, in creation order
        self.payload = payload      # leaf computations: tagged tuple
        self.label = label
        self.initial = initial      # part of the pre-rewrite DAG
        self.region = region
        self.bounds = bounds        # (inputs, outputs) for region nodes

    def __repr__(self):
        return f"<Or {self.oid} {self.label}>"


class AndNode:
    __slots__ = ("aid", "op", "payload", "children", "owner", "rule")

    def __init__(self, aid, op, payload, children, owner, rule=None):
        self.aid = aid
        self.op = op
        self.payload = payload
        self.children = tuple(children)   # OR ids
        self.owner = owner                # OR id this is an alternative of
        self.rule = rule                  # rule name that introduced it

    def __repr__(self):
        return f"<And {self.aid} {self.op}>"


class Dag:
    def __init__(self):
        self.ors: dict[int, OrNode] = {}
        self.ands: dict[int, AndNode] = {}
        self.root = None
        self._next = 0
        self._expr_index: dict = {}       # functional expr -> or id
        self._leaf_index: dict = {}       # leaf payload -> or id
        self.frozen = False

    # -- construction ----------------------------------------------------

    def _nid(self) -> int:
        self._next += 1
        return self._next

    def new_or(self, label=None, payload=None, initial=False, region=None,
               bounds=None) -> int:
        if self.frozen:
            raise InternalError("DAG is frozen")
        oid = self._nid()
        self.ors[oid] = OrNode(oid, label or f"e{oid}", payload, initial,
                               region, bounds)
        return oid

    def leaf(self, payload, label=None, initial=False) -> int:
        """Hash-consed payload leaf (constants, variables, slots, rows)."""
        if payload in self._leaf_index:
            return self._leaf_index[payload]
        oid = self.new_or(label or _leaf_label(payload), payload, initial)
        self._leaf_index[payload] = oid
        return oid

    def add_alt(self, or_id, op, payload, children, initial=False, rule=None):
        """Add an alternative to an OR node.  Returns the new AND id, or
        None when an identical alternative already exists."""
        if self.frozen:
            raise InternalError("DAG is frozen")
        node = self.ors[or_id]
        key = (op, payload, tuple(children))
        for aid in node.alts:
            a = self.ands[aid]
            if (a.op, a.payload, a.children) == key:
                return None
        for c in children:
            if self._reaches(c, or_id):
                raise CycleError(
                    f"alternative for {node.label} would depend on itself")
        aid = self._nid()
        self.ands[aid] = AndNode(aid, op, payload, children, or_id, rule)
        node.alts.append(aid)
        return aid

    def _reaches(self, start_or, target_or) -> bool:
        if start_or == target_or:
            return True
        seen = set()
        work = [start_or]
        while work:
            cur = work.pop()
            if cur in seen:
                continue
            seen.add(cur)
            for aid in self.ors[cur].alts:
                for c in self.ands[aid].children:
                    if c == target_or:
                        return True
                    if c not in seen:
                        work.append(c)
        return False

    def freeze(self):
        self.frozen = True

    # -- expression building --------------------------------------------

    def expr(self, node) -> int:
        """OR node computing the given functional expression, hash-consed."""
        if node in self._expr_index:
            return self._expr_index[node]
        oid = self._build_expr(node)
        self._expr_index[node] = oid
        return oid

    def _build_expr(self, node) -> int:
        if isinstance(node, F.ConstE):
            return self.leaf(("const", node.value))
        if isinstance(node, F.VarE):
            return self.leaf(("var", node.name))
        if isinstance(node, F.SlotE):
            return self.leaf(("slot", node.name))
        if isinstance(node, F.TVarE):
            return self.leaf(("trow", node.name))
        if isinstance(node, F.TAttrE):
            return self.leaf(("tattr", (node.var, node.column)))
        if isinstance(node, F.NewListE):
            return self.leaf(("newlist",))
        if isinstance(node, F.NewMapE):
            return self.leaf(("newmap",))
        op, payload, kids = _expr_shape(node)
        children = [self.expr(k) for k in kids]
        oid = self.new_or()
        self.add_alt(oid, op, payload, children)
        return oid

    def expr_of_and(self, aid: int):
        """Reconstruct a functional expression following first alternatives.
        Inverse of ``expr`` for freshly built sub-DAGs."""
        a = self.ands[aid]
        kids = [self.expr_of_or(c) for c in a.children]
        return _expr_unshape(a.op, a.payload, kids)

    def expr_of_or(self, oid: int):
        node = self.ors[oid]
        if node.payload is not None:
            return _leaf_expr(node.payload)
        if not node.alts:
            raise InternalError(f"OR {node.label} has no alternatives")
        return self.expr_of_and(node.alts[0])

    def expr_of_choice(self, oid: int, choice: dict):
        """Reconstruct a functional expression following a plan's choices
        instead of first alternatives."""
        node = self.ors[oid]
        if node.payload is not None:
            return _leaf_expr(node.payload)
        a = self.ands[choice[oid]]
        kids = [self.expr_of_choice(c, choice) for c in a.children]
        return _expr_unshape(a.op, a.payload, kids)

    # -- queries ---------------------------------------------------------

    def counts(self) -> tuple:
        return len(self.ors), len(self.ands)

    def reachable(self, root=None) -> tuple:
        """(or ids, and ids) reachable from the root, in id order."""
        root = root if root is not None else self.root
        seen_or, seen_and = set(), set()
        work = [root]
        while work:
            cur = work.pop()
            if cur in seen_or:
                continue
            seen_or.add(cur)
            for aid in self.ors[cur].alts:
                seen_and.add(aid)
                work.extend(self.ands[aid].children)
        return sorted(seen_or), sorted(seen_and)

    def topo_ors(self, root=None) -> list:
        """Reachable OR ids, children before parents."""
        root = root if root is not None else self.root
        out, state = [], {}

        def visit(oid):
            if state.get(oid) == 2:
                return
            if state.get(oid) == 1:
                raise CycleError("cycle in DAG")
            state[oid] = 1
            for aid in self.ors[oid].alts:
                for c in self.ands[aid].children:
                    visit(c)
            state[oid] = 2
            out.append(oid)
        visit(root)
        return out


def _leaf_label(payload) -> str:
    tag = payload[0]
    if tag in ("var", "slot", "trow"):
        return f"{tag}:{payload[1]}"
    if tag == "tattr":
        return f"tattr:{payload[1][0]}.{payload[1][1]}"
    if tag == "const":
        return f"const:{payload[1]!r}"
    return tag


def _expr_shape(node) -> tuple:
    """(op, payload, children) encoding of a composite functional node."""
    if isinstance(node, F.BinE):
        return "bin", node.op, (node.left, node.right)
    if isinstance(node, F.UnE):
        return "un", node.op, (node.operand,)
    if isinstance(node, F.CallE):
        return "call", node.fn, node.args
    if isinstance(node, F.AttrE):
        return "attr", node.column, (node.src,)
    if isinstance(node, F.TupleE):
        return "tuple", None, node.items
    if isinstance(node, F.ProjectE):
        return "project", node.index, (node.src,)
    if isinstance(node, F.CondE):
        return "guard", None, (node.pred, node.then, node.els)
    if isinstance(node, F.InsertE):
        return "insert", None, (node.coll, node.item)
    if isinstance(node, F.MapPutE):
        return "map_put", None, (node.map, node.key, node.value)
    if isinstance(node, F.ConcatE):
        return "concat", None, (node.left, node.right)
    if isinstance(node, F.ExecE):
        return "execquery", node.query, ()
    if isinstance(node, F.LookupE):
        return "lookup", (node.relation, node.column), (node.key,)
    if isinstance(node, F.PrefetchE):
        return "prefetch", (node.relation, node.column), (node.body,)
    if isinstance(node, F.FoldE):
        return "fold", (node.var, node.names), (node.acc, node.init, node.source)
    raise InternalError(f"no DAG encoding for {node!r}")


def _leaf_expr(payload):
    tag = payload[0]
    if tag == "const":
        return F.ConstE(payload[1])
    if tag == "var":
        return F.VarE(payload[1])
    if tag == "slot":
        return F.SlotE(payload[1])
    if tag == "trow":
        return F.TVarE(payload[1])
    if tag == "tattr":
        return F.TAttrE(payload[1][0], payload[1][1])
    if tag == "newlist":
        return F.NewListE()
    if tag == "newmap":
        return F.NewMapE()
    raise InternalError(f"payload {payload!r} is not an expression leaf")


def _expr_unshape(op, payload, kids):
    if op == "bin":
        return F.BinE(payload, kids[0], kids[1])
    if op == "un":
        return F.UnE(payload, kids[0])
    if op == "call":
        return F.CallE(payload, tuple(kids))
    if op == "attr":
        return F.AttrE(kids[0], payload)
    if op == "tuple":
        return F.TupleE(tuple(kids))
    if op == "project":
        return F.ProjectE(kids[0], payload)
    if op == "guard":
        return F.CondE(kids[0], kids[1], kids[2])
    if op == "insert":
        return F.InsertE(kids[0], kids[1])
    if op == "map_put":
        return F.MapPutE(kids[0], kids[1], kids[2])
    if op == "concat":
        return F.ConcatE(kids[0], kids[1])
    if op == "execquery":
        return F.ExecE(payload)
    if op == "lookup":
        return F.LookupE(payload[0], payload[1], kids[0])
    if op == "prefetch":
        return F.PrefetchE(payload[0], payload[1], kids[0])
    if op == "fold":
        return F.FoldE(payload[0], payload[1], kids[0], kids[1], kids[2])
    raise InternalError(f"operator {op!r} is not an expression")


# ---------------------------------------------------------------------------
# initial DAG from the region tree

def build_initial(info) -> Dag:
    """DAG with one OR per region and one AND per structured region."""
    dag = Dag()
    root_region = info.root
    root = _build_region(dag, root_region, info)
    dag.root = root
    node = dag.ors[root]
    if not node.alts and node.payload is not None:
        # a function that is a single straight-line run still needs an
        # alternative for the planner to choose
        payload = node.payload
        node.payload = None
        dag.add_alt(root, payload[0], payload[1], (), initial=True)
    return dag


def _build_region(dag: Dag, region, info) -> int:
    bounds = info.boundary(region)
    if region.kind in ("block",) or (region.kind == "sequential" and region.is_run):
        kind = "basicblock"
        return dag.new_or(region.name, (kind, region), initial=True,
                          region=region, bounds=bounds)
    if region.kind == "blackbox":
        return dag.new_or(region.name, ("blackbox", region), initial=True,
                          region=region, bounds=bounds)
    oid = dag.new_or(region.name, initial=True, region=region, bounds=bounds)
    kids = [_build_region(dag, c, info) for c in region.children]
    op = {"sequential": "seq", "loop": "loop", "conditional": "cond"}[region.kind]
    dag.add_alt(oid, op, region, kids, initial=True)
    return oid


# ---------------------------------------------------------------------------
# export

def export_dot(dag: Dag, chosen=None) -> str:
    """Graphviz text.  ``chosen`` may map OR id -> AND id to highlight a
    plan."""
    lines = ["digraph andor {", "  rankdir=TB;"]
    ors, ands = dag.reachable()
    for oid in ors:
        o = dag.ors[oid]
        shape = "ellipse"
        label = o.label.replace('"', "'")
        style = ' style=bold' if chosen and oid in chosen else ""
        lines.append(f'  o{oid} [shape={shape} label="{label}"{style}];')
    for aid in ands:
        a = dag.ands[aid]
        label = a.op if a.payload is None else f"{a.op}"
        style = ""
        if chosen and chosen.get(a.owner) == aid:
            style = ' style=bold'
        lines.append(f'  a{aid} [shape=box label="{label}"{style}];')
        lines.append(f"  o{a.owner} -> a{aid};")
        for c in a.children:
            lines.append(f"  a{aid} -> o{c};")
    lines.append("}")
    return "\n".join(lines)
