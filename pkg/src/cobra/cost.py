"""Cost model for programs with embedded queries.

A query costs one network round trip, the server time to produce the
result, and the transfer of the rows that come back; server production and
transfer overlap, so whichever dominates is charged:

    cost(q) = nrt + first_row + max(n * row_bytes / bandwidth, tail)

``first_row`` is the server time before the first row is available and
``tail`` the additional server time until the last one.  Cardinalities and
row widths come from catalog statistics, with per-query overrides keyed by
the fingerprint of the rendered SQL.

Whole-relation fetches can be amortized across program runs: their cost is
divided by an amortization factor (per-fingerprint or global).  Factor 1
charges the full fetch, ``inf`` treats the data as already cached.

Program-side work is charged per three-address record (``cz_s``) and per
operator node (``cy_s``).  Loop bodies multiply by the estimated iteration
count, conditional branches weight by a fixed probability.

Worked examples, using the ``unit`` preset (round trip 0.1 s, bandwidth
1e6 B/s, server base 0.01 s, no per-input-row time, per-output-row tail
1e-4 s, operator node 9e-8 s; ``orders`` holds 10,000 rows of 200 bytes):

* ``queryCost(scan(orders))``: transfer is 10,000 * 200 / 1e6 = 2.0 s and
  dominates the 1.0 s server tail, so the query costs
  0.1 + 0.01 + 2.0 = **2.11 s**.
* ``prefetchCost("orders", "o_custkey")`` with amortization factor 50:
  2.11 / 50 = **0.0422 s**.
* a fold over that scan whose accumulator is a single operator node:
  2.11 + 10,000 * 9e-8 = **2.1109 s**.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

from . import queries as Q
from .errors import CatalogError, InvalidAmortizationError

DEFAULT_CONSTANTS = {
    "cz_s": 3e-8,                 # one three-address record
    "cy_s": 3e-8,                 # one operator node
    "default_iters": 100.0,       # loops over plain collections
    "default_prob": 0.5,          # conditional branch probability
    "default_selectivity": 0.2,   # predicates without statistics
    "server_base_s": 1e-3,        # query setup before the first row
    "server_first_per_row_s": 1e-7,   # per input row, before the first row
    "server_last_per_row_s": 1e-6,    # per output row, after the first row
    "default_card": 1000.0,       # relations without statistics
    "default_row_bytes": 100.0,
    "col_bytes": 40.0,            # projected column without statistics
    "agg_row_bytes": 16.0,        # aggregate output column
}

PRESETS = ("slow-remote", "fast-local", "unit")


@dataclass(frozen=True)
class Cost:
    """Seconds spent on the wire, in the database, and in the program."""

    network: float = 0.0
    server: float = 0.0
    cpu: float = 0.0

    @property
    def total(self) -> float:
        return self.network + self.server + self.cpu

    def __add__(self, other: "Cost") -> "Cost":
        return Cost(self.network + other.network, self.server + other.server,
                    self.cpu + other.cpu)

    def scale(self, k: float) -> "Cost":
        return Cost(self.network * k, self.server * k, self.cpu * k)

    def __repr__(self):
        return (f"Cost(total={self.total:.6g}, net={self.network:.6g}, "
                f"server={self.server:.6g}, cpu={self.cpu:.6g})")


ZERO = Cost()


class Catalog:
    """Network parameters, model constants and relation statistics."""

    def __init__(self, data: dict, source: str = "<catalog>"):
        if not isinstance(data, dict):
            raise CatalogError(f"{source}: catalog must be an object")
        net = data.get("network", {})
        if not isinstance(net, dict):
            raise CatalogError(f"{source}: network must be an object")
        try:
            self.nrt_s = float(net.get("nrt_s", 0.0))
            self.bandwidth_Bps = float(net.get("bandwidth_Bps", math.inf))
        except (TypeError, ValueError):
            raise CatalogError(f"{source}: network parameters must be numbers")
        if self.bandwidth_Bps <= 0:
            raise CatalogError(f"{source}: bandwidth_Bps must be positive")
        self.constants = dict(DEFAULT_CONSTANTS)
        consts = data.get("constants", {})
        if not isinstance(consts, dict):
            raise CatalogError(f"{source}: constants must be an object")
        for k, v in consts.items():
            if k not in DEFAULT_CONSTANTS:
                raise CatalogError(f"{source}: unknown constant {k!r}")
            self.constants[k] = float(v)
        self.relations = {}
        for name, rel in (data.get("relations", {}) or {}).items():
            if not isinstance(rel, dict):
                raise CatalogError(f"{source}: relation {name!r} must be an object")
            self.relations[name] = {
                "card": float(rel.get("card", self.constants["default_card"])),
                "row_bytes": float(rel.get("row_bytes",
                                           self.constants["default_row_bytes"])),
                "distinct": {c: float(d) for c, d in
                             (rel.get("distinct", {}) or {}).items()},
                "columns": list(rel.get("columns", []) or []),
            }
        self.query_overrides = {}
        for ov in data.get("query_overrides", []) or []:
            fp = ov.get("fingerprint")
            if not fp:
                raise CatalogError(f"{source}: query override without fingerprint")
            self.query_overrides[fp] = {k: float(v) for k, v in ov.items()
                                        if k != "fingerprint"}
        self.amortization = {}
        for fp, af in (data.get("amortization", {}) or {}).items():
            self.amortization[fp] = _parse_af(af, source)
        self.af_global = 1.0
        self.source = source

    # -- loading ---------------------------------------------------------

    @classmethod
    def load(cls, path: str) -> "Catalog":
        try:
            with open(path) as f:
                data = json.load(f)
        except OSError as e:
            raise CatalogError(f"cannot read catalog {path}: {e.strerror}")
        except json.JSONDecodeError as e:
            raise CatalogError(f"{path}: invalid JSON: {e}")
        return cls(data, source=path)

    @classmethod
    def preset(cls, name: str) -> "Catalog":
        if name not in PRESETS:
            raise CatalogError(
                f"unknown network preset {name!r}; choose from {', '.join(PRESETS)}")
        text = resources.files("cobra").joinpath(
            "catalogs", f"{name}.json").read_text()
        return cls(json.loads(text), source=f"preset:{name}")

    # -- statistics ------------------------------------------------------

    def const(self, name: str) -> float:
        return self.constants[name]

    def relation(self, name: str) -> dict:
        rel = self.relations.get(name)
        if rel is None:
            rel = {"card": self.constants["default_card"],
                   "row_bytes": self.constants["default_row_bytes"],
                   "distinct": {}, "columns": []}
        return rel

    def relation_columns(self) -> dict:
        """Relation -> ordered column tuple, for schema-aware rewrites."""
        out = {}
        for name, rel in self.relations.items():
            if rel["columns"]:
                out[name] = tuple(rel["columns"])
        return out

    def set_af(self, af) -> None:
        self.af_global = _parse_af(af, self.source)


def _parse_af(af, source) -> float:
    if af == "inf":
        return math.inf
    try:
        val = float(af)
    except (TypeError, ValueError):
        raise InvalidAmortizationError(
            f"{source}: amortization factor must be a number or \"inf\"")
    if val < 1.0:
        raise InvalidAmortizationError(
            f"{source}: amortization factor {val} is below 1")
    return val


# ---------------------------------------------------------------------------
# the model

class CostModel:
    def __init__(self, catalog: Catalog, cfg=None):
        self.catalog = catalog
        self.cfg = cfg              # block lookup for region leaves

    # -- statistics over queries ----------------------------------------

    def estimate_card(self, q) -> float:
        ov = self.catalog.query_overrides.get(Q.fingerprint(q))
        if ov and "nq" in ov:
            return ov["nq"]
        return self._card(q)

    def _card(self, q) -> float:
        if isinstance(q, Q.Scan):
            return self.catalog.relation(q.relation)["card"]
        if isinstance(q, Q.Select):
            return self._card(q.child) * self._selectivity(q.predicate, q.child)
        if isinstance(q, (Q.Project, Q.OrderBy)):
            return self._card(q.child)
        if isinstance(q, Q.Aggregate):
            if q.group_by is None:
                return 1.0
            d = self._distinct(q.child, q.group_by)
            return d if d is not None else self._card(q.child)
        if isinstance(q, Q.Join):
            return self._join_card(q)
        raise TypeError(f"not a query: {q!r}")

    def _distinct(self, q, col):
        src = Q.column_source(q, col, self._columns_map())
        if src is None:
            return None
        rel, base = src
        return self.catalog.relation(rel)["distinct"].get(base)

    def _columns_map(self) -> dict:
        # column_source only needs listed relations; leave others unresolved
        return self.catalog.relation_columns()

    def _selectivity(self, pred, child) -> float:
        default = self.catalog.const("default_selectivity")
        if not isinstance(pred, Q.ScalarOp):
            return default
        if pred.fn == "and":
            s = 1.0
            for a in pred.args:
                s *= self._selectivity(a, child)
            return s
        if pred.fn == "or":
            return min(1.0, sum(self._selectivity(a, child) for a in pred.args))
        if pred.fn == "not":
            return max(0.0, 1.0 - self._selectivity(pred.args[0], child))
        if pred.fn == "eq" and len(pred.args) == 2:
            cols = [a for a in pred.args if isinstance(a, Q.Column)]
            if len(cols) == 1:
                d = self._distinct(child, cols[0].name)
                if d:
                    return 1.0 / d
        return default

    def _join_card(self, q: Q.Join) -> float:
        nl, nr = self._card(q.left), self._card(q.right)
        pred = q.predicate
        if isinstance(pred, Q.ScalarOp) and pred.fn == "eq" and len(pred.args) == 2:
            a, b = pred.args
            if isinstance(a, Q.Column) and isinstance(b, Q.Column):
                da = (self._distinct(q.left, a.name)
                      or self._distinct(q.right, a.name))
                db = (self._distinct(q.right, b.name)
                      or self._distinct(q.left, b.name))
                if da and db:
                    return nl * nr / max(da, db, 1.0)
        return nl * nr * self.catalog.const("default_selectivity")

    def row_bytes(self, q) -> float:
        ov = self.catalog.query_overrides.get(Q.fingerprint(q))
        if ov and "srow_bytes" in ov:
            return ov["srow_bytes"]
        return self._row_bytes(q)

    def _row_bytes(self, q) -> float:
        if isinstance(q, Q.Scan):
            return self.catalog.relation(q.relation)["row_bytes"]
        if isinstance(q, (Q.Select, Q.OrderBy)):
            return self._row_bytes(q.child)
        if isinstance(q, Q.Project):
            child = self._row_bytes(q.child)
            ncols = self._width(q.child)
            if ncols:
                return child * min(1.0, len(q.columns) / ncols)
            return min(child, self.catalog.const("col_bytes") * len(q.columns))
        if isinstance(q, Q.Join):
            return self._row_bytes(q.left) + self._row_bytes(q.right)
        if isinstance(q, Q.Aggregate):
            ncols = 2 if q.group_by is not None else 1
            return self.catalog.const("agg_row_bytes") * ncols
        raise TypeError(f"not a query: {q!r}")

    def _width(self, q):
        schema = Q.output_schema(q, self._columns_map())
        return len(schema) if schema else None

    def _input_card(self, q) -> float:
        if isinstance(q, Q.Scan):
            return self.catalog.relation(q.relation)["card"]
        if isinstance(q, (Q.Select, Q.Project, Q.OrderBy, Q.Aggregate)):
            return self._input_card(q.child)
        if isinstance(q, Q.Join):
            return self._input_card(q.left) + self._input_card(q.right)
        raise TypeError(f"not a query: {q!r}")

    # -- query costs -----------------------------------------------------

    def raw_query_cost(self, q) -> Cost:
        const = self.catalog.const
        ov = self.catalog.query_overrides.get(Q.fingerprint(q), {})
        n = self.estimate_card(q)
        srow = self.row_bytes(q)
        if "cqf_s" in ov:
            first = ov["cqf_s"]
        else:
            first = (const("server_base_s")
                     + const("server_first_per_row_s") * self._input_card(q))
        if "cql_s" in ov and "cqf_s" in ov:
            tail = max(0.0, ov["cql_s"] - ov["cqf_s"])
        else:
            tail = const("server_last_per_row_s") * n
        transfer = n * srow / self.catalog.bandwidth_Bps
        network = self.catalog.nrt_s + transfer
        server = first + max(0.0, tail - transfer)
        return Cost(network=network, server=server)

    def amortization_of(self, q) -> float:
        af = self.catalog.amortization.get(Q.fingerprint(q))
        if af is not None:
            return af
        if self.catalog.af_global != 1.0 and self.whole_relation(q):
            return self.catalog.af_global
        return 1.0

    def whole_relation(self, q) -> bool:
        """Queries worth caching: every row of one relation comes back."""
        if isinstance(q, Q.Scan):
            return True
        if isinstance(q, (Q.OrderBy, Q.Project)):
            return self.whole_relation(q.child)
        return False

    def query_cost(self, q) -> Cost:
        cost = self.raw_query_cost(q)
        af = self.amortization_of(q)
        if af == math.inf:
            return ZERO
        return cost.scale(1.0 / af)

    def prefetch_cost(self, relation: str, column: str) -> Cost:
        return self.query_cost(Q.Scan(relation))

    # -- program-side pieces ---------------------------------------------

    def tac_cost(self, t) -> Cost:
        cz = Cost(cpu=self.catalog.const("cz_s"))
        if t.op in ("execquery", "iterate") and t.payload is not None:
            return self.query_cost(t.payload) + cz
        if t.op == "prefetch":
            return self.prefetch_cost(*t.payload) + cz
        return cz

    def region_cost(self, region) -> Cost:
        kind = region.kind
        if kind == "block":
            return self._block_cost(region.block_id)
        if kind == "sequential":
            total = ZERO
            for c in region.children:
                total = total + self.region_cost(c)
            return total
        if kind == "loop":
            header = self.region_cost(region.children[0])
            body = (self.region_cost(region.children[1])
                    if len(region.children) > 1 else ZERO)
            return header + body.scale(self.iterations(region))
        if kind == "conditional":
            p = self.catalog.const("default_prob")
            parts = {c.role: self.region_cost(c) for c in region.children}
            cost = parts.get("header", ZERO)
            cost = cost + parts.get("then", ZERO).scale(p)
            if "else" in parts:
                cost = cost + parts["else"].scale(1.0 - p)
            return cost
        if kind == "blackbox":
            covered = set()
            total = ZERO
            for c in region.children:
                covered |= c.blocks
                total = total + self.region_cost(c)
            for bid in sorted(region.blocks - covered):
                total = total + self._block_cost(bid)
            return total
        raise TypeError(f"not a region: {region!r}")

    def _block_cost(self, bid) -> Cost:
        if self.cfg is None or bid is None:
            return ZERO
        total = ZERO
        for t in self.cfg.blocks[bid].tacs:
            total = total + self.tac_cost(t)
        return total

    def iterations(self, region) -> float:
        if region.loop_kind == "query":
            return self.estimate_card(region.loop_source)
        return self.catalog.const("default_iters")

    # -- DAG nodes -------------------------------------------------------

    def leaf_cost(self, or_node) -> Cost:
        payload = or_node.payload
        if payload is None:
            return ZERO
        tag = payload[0]
        if tag in ("basicblock", "blackbox"):
            return self.region_cost(payload[1])
        return ZERO

    def fold_iterations(self, dag, src_oid) -> float:
        """Rows a fold's source yields.  Every alternative computes the
        same result set, so the first one with statistics decides."""
        node = dag.ors[src_oid]
        for aid in node.alts:
            a = dag.ands[aid]
            if a.op == "execquery":
                return self.estimate_card(a.payload)
            if a.op == "lookup":
                rel = self.catalog.relation(a.payload[0])
                d = rel["distinct"].get(a.payload[1])
                if d:
                    return rel["card"] / d
                return self.catalog.const("default_iters")
            if a.op == "concat":
                left = self.fold_iterations(dag, a.children[0])
                right = self.fold_iterations(dag, a.children[1])
                return left + right
        return self.catalog.const("default_iters")

    def and_cost(self, dag, a, kids) -> Cost:
        """Cost of one alternative given the costs of its children.

        Shared subtrees are charged at every use: the program evaluates
        them wherever they appear, so plan costs follow tree expansion."""
        op = a.op
        cy = Cost(cpu=self.catalog.const("cy_s"))
        const = self.catalog.const
        if op == "seq":
            total = ZERO
            for k in kids:
                total = total + k
            return total
        if op == "loop":
            header = kids[0]
            body = kids[1] if len(kids) > 1 else ZERO
            return header + body.scale(self.iterations(a.payload))
        if op == "cond":
            p = const("default_prob")
            cost = kids[0] + kids[1].scale(p)
            if len(kids) > 2:
                cost = cost + kids[2].scale(1.0 - p)
            return cost
        if op == "fold":
            acc, init, src = kids
            n = self.fold_iterations(dag, a.children[2])
            return init + src + acc.scale(n)
        if op == "execquery":
            return self.query_cost(a.payload)
        if op == "lookup":
            return cy + kids[0] + Cost(cpu=const("cz_s"))
        if op == "prefetch":
            return self.prefetch_cost(*a.payload) + kids[0]
        if op == "guard":
            p = const("default_prob")
            return (cy + kids[0] + kids[1].scale(p)
                    + kids[2].scale(1.0 - p))
        if op == "opaque":
            total = Cost(*a.payload)
            for k in kids:
                total = total + k
            return total
        if op in ("bin", "un", "call", "attr", "tuple", "project", "insert",
                  "map_put", "concat"):
            total = cy
            for k in kids:
                total = total + k
            return total
        if op in ("basicblock", "blackbox"):
            # degenerate root alternative converted from a leaf payload
            return self.region_cost(a.payload)
        raise TypeError(f"no cost rule for operator {op!r}")
