"""Rewrite rules and DAG saturation."""

import pytest

from cobra import dag as D, fir as F, parser, queries as Q, regions, rules
from cobra.cost import Catalog
from cobra.errors import BudgetExceededError

from conftest import sample_source


def _expanded(name, **kw):
    cat = Catalog.preset("slow-remote")
    prog = parser.parse(sample_source(name))
    info = regions.build_regions(prog.functions[0])
    g = D.build_initial(info)
    rep = rules.expand(g, relation_columns=cat.relation_columns(), **kw)
    return g, rep


def _queries(g):
    out = []
    for a in g.ands.values():
        if a.op == "execquery":
            out.append(Q.render(a.payload))
    return out


def test_correlated_pair_gets_join_prefetch_and_guard():
    g, rep = _expanded("p0")
    assert rep.by_rule == {"loopToFold": 2, "T4": 1, "N1": 1, "N2": 2}
    assert rep.applied == 6
    sqls = _queries(g)
    assert any("join" in s for s in sqls)
    prefetches = [a for a in g.ands.values() if a.op == "prefetch"]
    assert [a.payload for a in prefetches] == [("orders", "o_custkey")]
    lookups = [a for a in g.ands.values() if a.op == "lookup"]
    assert [a.payload for a in lookups] == [("orders", "o_custkey")]
    assert any(a.op == "guard" for a in g.ands.values())


def test_dependent_accumulators_split_then_collapse():
    g, rep = _expanded("m0")
    assert rep.by_rule == {"loopToFold": 1, "T5": 1}
    sqls = _queries(g)
    assert "select sum(sale_amt) from sales" in sqls


def test_rule_subset_is_honored():
    g, rep = _expanded("p0", rules=("loopToFold",))
    assert set(rep.by_rule) == {"loopToFold"}
    assert not any(a.op == "prefetch" for a in g.ands.values())


def test_unknown_rule_name_rejected():
    with pytest.raises(ValueError) as e:
        _expanded("p0", rules=("loopToFold", "T9"))
    assert "T9" in str(e.value)


def test_budget_interrupts_with_partial_report():
    with pytest.raises(BudgetExceededError) as e:
        _expanded("p0", budget=2)
    assert e.value.report.applied == 3


def test_expansion_saturates():
    cat = Catalog.preset("slow-remote")
    g, rep = _expanded("p0")
    again = rules.expand(g, relation_columns=cat.relation_columns())
    assert again.applied == 0


def test_trace_records_each_application():
    g, rep = _expanded("p0", trace=True)
    assert len(rep.trace) == rep.applied
    assert all(t.startswith("rule=") and " or=" in t and " new_and=" in t
               for t in rep.trace)


def test_legacy_mode_skips_dependent_folds():
    g, rep = _expanded("m0", legacy=True)
    assert "loopToFold" not in rep.by_rule


def test_selection_and_guard_forms_alternate():
    # a fold over a filtered scan gains exactly one guarded form; pushing
    # the guard back into the query reproduces the original alternative,
    # which hash-consing absorbs
    cat = Catalog.preset("slow-remote")
    sel = Q.Select(Q.ScalarOp("gt", (Q.Column("o_total"), Q.Const(500))),
                   Q.Scan("orders"))
    fold = F.FoldE(var="o", names=("total",),
                   acc=F.BinE("+", F.SlotE("total"), F.TAttrE("o", "o_total")),
                   init=F.ConstE(0), source=F.ExecE(sel))
    g = D.Dag()
    g.root = g.expr(fold)
    rep = rules.expand(g, rules=("T2", "N2"),
                       relation_columns=cat.relation_columns())
    assert len(g.ors[g.root].alts) == 2
    ops = {(g.ands[a].op, g.ands[a].rule) for a in g.ors[g.root].alts}
    assert ops == {("fold", None), ("fold", "N2")}


def test_report_summary_lists_rules_in_order():
    g, rep = _expanded("p0")
    s = rep.summary()
    assert s.startswith("applied=6 passes=")
    assert s.index("loopToFold=2") < s.index("T4=1") < s.index("N1=1")
