"""Plan selection over the alternatives DAG.

A plan picks one alternative per OR node.  Because alternatives of an OR
compute the same value, costs combine bottom-up in a single pass over a
topological order; each OR keeps its cheapest alternative and parents
build on those.  Shared subtrees are charged at every use (the emitted
program evaluates them wherever they appear), so a plan's cost is the
cost of its tree expansion.

Near-ties (within 1e-12 relative) break toward fewer database-touching
nodes, then toward the pre-rewrite alternative, then toward the lowest
node id, keeping the choice deterministic across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import queries as Q
from .cost import Cost, CostModel

_REL_TOL = 1e-12


@dataclass
class PlanResult:
    choice: dict                  # OR id -> chosen AND id, for ORs with alternatives
    cost: Cost
    or_costs: dict                # OR id -> cost of its best alternative
    or_queries: dict              # OR id -> database-touching nodes under it


def _block_queries(cfg, bid) -> int:
    if cfg is None or bid is None:
        return 0
    n = 0
    for t in cfg.blocks[bid].tacs:
        if t.op in ("execquery", "prefetch"):
            n += 1
        elif t.op == "iterate" and t.payload is not None:
            n += 1
    return n


def _region_queries(region, cfg) -> int:
    """Static count of database-touching statements inside a region."""
    kind = region.kind
    if kind == "block":
        return _block_queries(cfg, region.block_id)
    if kind == "blackbox":
        covered = set()
        total = 0
        for c in region.children:
            covered |= c.blocks
            total += _region_queries(c, cfg)
        for bid in sorted(region.blocks - covered):
            total += _block_queries(cfg, bid)
        return total
    return sum(_region_queries(c, cfg) for c in region.children)


def best_plan(dag, model: CostModel) -> PlanResult:
    choice: dict = {}
    or_costs: dict = {}
    or_queries: dict = {}
    for oid in dag.topo_ors():
        node = dag.ors[oid]
        if not node.alts:
            or_costs[oid] = model.leaf_cost(node)
            if node.payload is not None and node.payload[0] in ("basicblock",
                                                                "blackbox"):
                or_queries[oid] = _region_queries(node.payload[1], model.cfg)
            else:
                or_queries[oid] = 0
            continue
        best = None                      # (cost, tie key, aid, queries)
        for aid in node.alts:
            a = dag.ands[aid]
            cost = model.and_cost(dag, a, [or_costs[c] for c in a.children])
            queries = ((1 if a.op in ("execquery", "prefetch") else 0)
                       + sum(or_queries[c] for c in a.children))
            key = (queries, 0 if a.rule is None else 1, aid)
            if best is None:
                best = (cost, key, aid, queries)
                continue
            ref = max(abs(best[0].total), abs(cost.total), 1e-300)
            if (best[0].total - cost.total) / ref > _REL_TOL:
                best = (cost, key, aid, queries)
            elif abs(best[0].total - cost.total) / ref <= _REL_TOL and key < best[1]:
                best = (cost, key, aid, queries)
        or_costs[oid] = best[0]
        or_queries[oid] = best[3]
        choice[oid] = best[2]
    return PlanResult(choice, or_costs[dag.root], or_costs, or_queries)


# ---------------------------------------------------------------------------
# exhaustive enumeration, the oracle for the single-pass search

def enumerate_plans(dag, root=None) -> list:
    """Every complete plan as an OR -> AND choice map.  Exponential; for
    small DAGs and tests."""
    root = root if root is not None else dag.root
    out = []

    def rec(frontier, choice):
        undecided = [o for o in sorted(frontier)
                     if o not in choice and dag.ors[o].alts]
        if not undecided:
            out.append(choice)
            return
        oid = undecided[0]
        for aid in dag.ors[oid].alts:
            nxt = dict(choice)
            nxt[oid] = aid
            rec(frontier | set(dag.ands[aid].children), nxt)

    rec({root}, {})
    return out


def plan_cost(dag, choice, model: CostModel, root=None) -> Cost:
    """Tree-expansion cost of one concrete plan."""
    root = root if root is not None else dag.root

    def cost_or(oid):
        node = dag.ors[oid]
        if not node.alts:
            return model.leaf_cost(node)
        a = dag.ands[choice[oid]]
        return model.and_cost(dag, a, [cost_or(c) for c in a.children])

    return cost_or(root)


# ---------------------------------------------------------------------------
# plan inspection

def chosen_ands(dag, choice, root=None) -> list:
    """AND nodes the plan uses, discovered from the root down."""
    root = root if root is not None else dag.root
    out, seen, work = [], set(), [root]
    while work:
        oid = work.pop()
        if oid in seen:
            continue
        seen.add(oid)
        node = dag.ors[oid]
        if not node.alts:
            continue
        a = dag.ands[choice[oid]]
        out.append(a)
        work.extend(a.children)
    return out


def _region_tacs(region, cfg):
    if cfg is None:
        return
    if region.kind == "block":
        if region.block_id is not None:
            yield from cfg.blocks[region.block_id].tacs
        return
    if region.kind == "blackbox":
        covered = set()
        for c in region.children:
            covered |= c.blocks
            yield from _region_tacs(c, cfg)
        for bid in sorted(region.blocks - covered):
            yield from cfg.blocks[bid].tacs
        return
    for c in region.children:
        yield from _region_tacs(c, cfg)


def plan_queries(dag, choice, cfg=None, root=None) -> list:
    """Query expressions the plan executes: chosen query nodes plus the
    queries inside region leaves it keeps."""
    queries = []
    for a in chosen_ands(dag, choice, root):
        if a.op == "execquery":
            queries.append(a.payload)
    root = root if root is not None else dag.root
    seen, work = set(), [root]
    while work:
        oid = work.pop()
        if oid in seen:
            continue
        seen.add(oid)
        node = dag.ors[oid]
        if not node.alts:
            if node.payload is not None and node.payload[0] in ("basicblock",
                                                                "blackbox"):
                for t in _region_tacs(node.payload[1], cfg):
                    if t.op in ("execquery", "iterate") and t.payload is not None:
                        queries.append(t.payload)
            continue
        work.extend(dag.ands[choice[oid]].children)
    return queries


def _has_join(q) -> bool:
    if isinstance(q, Q.Join):
        return True
    if isinstance(q, (Q.Select, Q.Project, Q.OrderBy, Q.Aggregate)):
        return _has_join(q.child)
    return False


def classify(dag, choice, cfg=None, root=None) -> str:
    """Family of the plan: "P2" caches a relation locally, "P1" runs a
    join, "P0" is everything else (typically a query per loop row)."""
    for a in chosen_ands(dag, choice, root):
        if a.op == "prefetch":
            return "P2"
    for q in plan_queries(dag, choice, cfg, root):
        if _has_join(q):
            return "P1"
    return "P0"


def count_plan_queries(dag, choice, cfg=None, root=None) -> int:
    """Static count of database-touching nodes in the plan."""
    n = len(plan_queries(dag, choice, cfg, root))
    for a in chosen_ands(dag, choice, root):
        if a.op == "prefetch":
            n += 1
    root = root if root is not None else dag.root
    seen, work = set(), [root]
    while work:
        oid = work.pop()
        if oid in seen:
            continue
        seen.add(oid)
        node = dag.ors[oid]
        if not node.alts:
            if node.payload is not None and node.payload[0] in ("basicblock",
                                                                "blackbox"):
                for t in _region_tacs(node.payload[1], cfg):
                    if t.op == "prefetch":
                        n += 1
            continue
        work.extend(dag.ands[choice[oid]].children)
    return n


# ---------------------------------------------------------------------------
# explanation

def explain(dag, model: CostModel, result: PlanResult) -> str:
    """Per-OR listing of every alternative with its cost, marking the
    chosen one and rendering query-producing alternatives as SQL."""
    lines = []
    ors, _ = dag.reachable()
    for oid in ors:
        node = dag.ors[oid]
        if not node.alts:
            continue
        lines.append(f"{node.label}:")
        for aid in node.alts:
            a = dag.ands[aid]
            cost = model.and_cost(dag, a, [result.or_costs[c] for c in a.children])
            mark = "*" if result.choice.get(oid) == aid else " "
            tag = a.op if a.rule is None else f"{a.op} [{a.rule}]"
            extra = ""
            if a.op == "execquery":
                extra = f"  {Q.render(a.payload)}"
            elif a.op == "prefetch":
                extra = f"  cache {a.payload[0]} by {a.payload[1]}"
            elif a.op == "lookup":
                extra = f"  {a.payload[0]}.{a.payload[1]}"
            lines.append(f" {mark} {tag}  cost={cost.total:.6g}{extra}")
    return "\n".join(lines)
