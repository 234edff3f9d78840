"""Catalog handling and the cost model."""

import json
import math

import pytest

from cobra import queries as Q
from cobra.cost import Catalog, Cost, CostModel, DEFAULT_CONSTANTS, PRESETS
from cobra.errors import CatalogError, InvalidAmortizationError


def scan(rel):
    return Q.Scan(rel)


def eq(col, val):
    return Q.ScalarOp("eq", (Q.Column(col), Q.Const(val)))


# -- cost algebra ----------------------------------------------------------

def test_cost_components_add_and_scale():
    c = Cost(network=1.0, server=0.5, cpu=0.25)
    assert (c + c).total == 3.5
    assert c.scale(4).network == 4.0
    assert Cost().total == 0.0


# -- catalog ---------------------------------------------------------------

def test_presets_ship_with_the_package():
    for name in PRESETS:
        cat = Catalog.preset(name)
        assert cat.nrt_s > 0
    assert Catalog.preset("slow-remote").bandwidth_Bps == 62500
    assert Catalog.preset("fast-local").nrt_s == 0.0005


def test_unknown_preset_rejected():
    with pytest.raises(CatalogError):
        Catalog.preset("dialup")


def test_catalog_file_round_trip(tmp_path):
    p = tmp_path / "cat.json"
    p.write_text(json.dumps({
        "network": {"nrt_s": 0.25, "bandwidth_Bps": 1000},
        "relations": {"t": {"card": 5, "row_bytes": 10,
                            "distinct": {"k": 5}, "columns": ["k", "v"]}},
    }))
    cat = Catalog.load(str(p))
    assert cat.nrt_s == 0.25
    assert cat.relation("t")["card"] == 5
    assert cat.relation_columns() == {"t": ("k", "v")}


def test_catalog_load_errors(tmp_path):
    with pytest.raises(CatalogError) as e:
        Catalog.load(str(tmp_path / "missing.json"))
    assert "cannot read" in str(e.value)
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(CatalogError):
        Catalog.load(str(p))


def test_unknown_constant_rejected():
    with pytest.raises(CatalogError) as e:
        Catalog({"constants": {"cz_sec": 1.0}})
    assert "cz_sec" in str(e.value)


def test_nonpositive_bandwidth_rejected():
    with pytest.raises(CatalogError):
        Catalog({"network": {"bandwidth_Bps": 0}})


def test_unknown_relation_falls_back_to_defaults():
    cat = Catalog({})
    rel = cat.relation("mystery")
    assert rel["card"] == DEFAULT_CONSTANTS["default_card"]
    assert rel["row_bytes"] == DEFAULT_CONSTANTS["default_row_bytes"]


def test_amortization_parsing():
    cat = Catalog({})
    cat.set_af("inf")
    assert cat.af_global == math.inf
    cat.set_af("50")
    assert cat.af_global == 50.0
    with pytest.raises(InvalidAmortizationError):
        cat.set_af(0.5)
    with pytest.raises(InvalidAmortizationError):
        Catalog({"amortization": {"abc": "-3"}})


# -- cardinality and width estimates ---------------------------------------

def test_cardinality_estimates():
    m = CostModel(Catalog.preset("slow-remote"))
    assert m.estimate_card(scan("customers")) == 1000
    # equality against a known-distinct column
    assert m.estimate_card(Q.Select(eq("o_custkey", 7), scan("orders"))) == 10
    # no statistics: default selectivity
    gt = Q.ScalarOp("gt", (Q.Column("o_total"), Q.Const(100)))
    assert m.estimate_card(Q.Select(gt, scan("orders"))) == 2000
    assert m.estimate_card(Q.Aggregate("sum", "sale_amt", None, scan("sales"))) == 1
    assert m.estimate_card(Q.Aggregate("sum", "sale_amt", "month", scan("sales"))) == 12
    join = Q.Join(Q.ScalarOp("eq", (Q.Column("o_custkey"), Q.Column("c_custkey"))),
                  scan("orders"), scan("customers"))
    assert m.estimate_card(join) == 10000


def test_row_width_estimates():
    m = CostModel(Catalog.preset("slow-remote"))
    proj = Q.Project((("o_id", Q.Column("o_id")), ("o_total", Q.Column("o_total"))),
                     scan("orders"))
    assert m.row_bytes(proj) == 150 * 2 / 5
    agg = Q.Aggregate("sum", "sale_amt", None, scan("sales"))
    assert m.row_bytes(agg) == 16
    join = Q.Join(eq("o_custkey", 1), scan("orders"), scan("customers"))
    assert m.row_bytes(join) == 150 + 350


def test_query_overrides_replace_estimates():
    fp = Q.fingerprint(scan("orders"))
    cat = Catalog({"network": {"nrt_s": 0.1, "bandwidth_Bps": 1e6},
                   "relations": {"orders": {"card": 100, "row_bytes": 10}},
                   "query_overrides": [{"fingerprint": fp, "nq": 7,
                                        "srow_bytes": 3}]})
    m = CostModel(cat)
    assert m.estimate_card(scan("orders")) == 7
    assert m.row_bytes(scan("orders")) == 3


# -- worked costs ----------------------------------------------------------

def test_transfer_bound_scan():
    # 10,000 rows of 200 bytes over 1e6 B/s dominate the server tail
    m = CostModel(Catalog.preset("unit"))
    c = m.query_cost(scan("orders"))
    assert c.total == pytest.approx(2.11, rel=1e-9)
    assert c.network == pytest.approx(0.1 + 2.0, rel=1e-9)
    assert c.server == pytest.approx(0.01, rel=1e-9)


def test_server_bound_query():
    # one aggregate row back: the server tail dominates the transfer
    m = CostModel(Catalog.preset("unit"))
    c = m.query_cost(Q.Aggregate("sum", "o_total", None, scan("orders")))
    assert c.network == pytest.approx(0.1 + 16 / 1e6, rel=1e-9)
    assert c.server == pytest.approx(0.01 + (1e-4 - 16 / 1e6), rel=1e-9)


def test_amortized_prefetch():
    cat = Catalog.preset("unit")
    cat.set_af(50)
    m = CostModel(cat)
    assert m.prefetch_cost("orders", "o_custkey").total == pytest.approx(
        2.11 / 50, rel=1e-9)


def test_infinite_amortization_zeroes_whole_relation_fetches():
    cat = Catalog.preset("unit")
    cat.set_af("inf")
    m = CostModel(cat)
    assert m.query_cost(scan("orders")).total == 0.0
    # correlated lookups never amortize
    sel = Q.Select(eq("o_custkey", 3), scan("orders"))
    assert m.query_cost(sel).total > 0


def test_per_query_amortization_by_fingerprint():
    fp = Q.fingerprint(scan("orders"))
    cat = Catalog.preset("unit")
    cat.amortization[fp] = 10.0
    m = CostModel(cat)
    assert m.query_cost(scan("orders")).total == pytest.approx(0.211, rel=1e-9)
    assert m.query_cost(scan("customers")).total > 0.211


def test_loop_iteration_estimates():
    import types
    m = CostModel(Catalog.preset("slow-remote"))
    q_loop = types.SimpleNamespace(loop_kind="query", loop_source=scan("sales"))
    assert m.iterations(q_loop) == 5000
    c_loop = types.SimpleNamespace(loop_kind="coll", loop_source=None)
    assert m.iterations(c_loop) == DEFAULT_CONSTANTS["default_iters"]
