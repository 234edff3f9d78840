"""End-to-end driver and the differential self-check."""

import pytest

from cobra import parser, pipeline
from cobra.cost import Catalog

from conftest import sample_source


def test_program_relations_sees_queries_and_caches():
    prog = parser.parse(sample_source("p0"))
    assert pipeline.program_relations(prog) == {"customers", "orders"}
    src = """
fn f(rows) {
  cacheByColumn(payments, p_orderkey);
  rows = lookupCache(payments.p_orderkey, 3);
}
"""
    assert pipeline.program_relations(parser.parse(src)) == {"payments"}


def test_optimize_picks_the_entry_function():
    src = sample_source("p0") + "\n" + sample_source("m0")
    r = pipeline.optimize(src, Catalog.preset("slow-remote"), entry="mySum")
    assert r.entry == "mySum"
    assert "orderby(month" in r.source


def test_check_equivalent_accepts_a_faithful_rewrite():
    cat = Catalog.preset("slow-remote")
    r = pipeline.optimize(sample_source("p0"), cat)
    assert pipeline.check_equivalent(r.original, r.source, r.entry, cat)


def test_check_equivalent_rejects_a_wrong_rewrite():
    cat = Catalog.preset("slow-remote")
    r = pipeline.optimize(sample_source("t2n2"), cat)
    broken = r.source.replace("total + _t0.o_total", "total + _t0.o_total + 1")
    assert broken != r.source
    assert not pipeline.check_equivalent(r.original, broken, r.entry, cat)


def test_check_equivalent_needs_catalog_schemas():
    cat = Catalog({"relations": {}})
    prog = parser.parse(sample_source("p0"))
    with pytest.raises(ValueError) as e:
        pipeline.check_equivalent(prog, sample_source("p0"), "processOrders", cat)
    assert "no schema" in str(e.value)
