"""The AND-OR DAG of program alternatives."""

import pytest
from hypothesis import given, strategies as st

from cobra import dag as D, fir as F, parser, queries as Q, regions
from cobra.errors import CycleError, InternalError

from conftest import sample_source


def _initial(name):
    prog = parser.parse(sample_source(name))
    info = regions.build_regions(prog.functions[0])
    return D.build_initial(info), info


def test_initial_dag_mirrors_the_region_tree():
    g, info = _initial("p0")
    root = g.ors[g.root]
    assert root.label == "S2-9"
    assert len(root.alts) == 1
    seq = g.ands[root.alts[0]]
    assert seq.op == "seq"
    labels = [g.ors[c].label for c in seq.children]
    assert labels == ["B2", "L3-9"]
    loop = g.ors[seq.children[1]]
    assert g.ands[loop.alts[0]].op == "loop"
    # leaves carry their region as a payload and start with no alternatives
    leaf = g.ors[seq.children[0]]
    assert leaf.payload[0] == "basicblock"
    assert leaf.alts == []


def test_or_bounds_follow_liveness():
    g, info = _initial("p0")
    seq = g.ands[g.ors[g.root].alts[0]]
    loop = g.ors[seq.children[1]]
    assert loop.bounds == (frozenset({"result"}), frozenset({"result"}))


def test_duplicate_alternative_is_absorbed():
    g = D.Dag()
    a = g.leaf(("var", "x"))
    o = g.new_or(label="top")
    first = g.add_alt(o, "un", "-", [a])
    assert first is not None
    assert g.add_alt(o, "un", "-", [a]) is None
    assert len(g.ors[o].alts) == 1


def test_cycles_are_rejected():
    g = D.Dag()
    a = g.new_or(label="a")
    b = g.new_or(label="b")
    g.add_alt(a, "un", "-", [b])
    with pytest.raises(CycleError):
        g.add_alt(b, "un", "-", [a])
    with pytest.raises(CycleError):
        g.add_alt(a, "un", "-", [a])


def test_frozen_dag_rejects_growth():
    g = D.Dag()
    g.leaf(("var", "x"))
    g.freeze()
    with pytest.raises(InternalError):
        g.new_or(label="late")


def test_topo_orders_children_first():
    g, _ = _initial("p0")
    order = g.topo_ors()
    pos = {oid: i for i, oid in enumerate(order)}
    for aid, a in g.ands.items():
        for c in a.children:
            assert pos[c] < pos[a.owner]


def test_hash_consing_shares_subexpressions():
    g = D.Dag()
    e = F.BinE("+", F.VarE("x"), F.ConstE(1))
    assert g.expr(e) == g.expr(F.BinE("+", F.VarE("x"), F.ConstE(1)))
    both = F.BinE("*", e, e)
    oid = g.expr(both)
    kids = g.ands[g.ors[oid].alts[0]].children
    assert kids[0] == kids[1]


# random functional expressions; leaves are small so trees stay printable
_leaves = st.one_of(
    st.integers(-5, 5).map(F.ConstE),
    st.sampled_from(["x", "y"]).map(F.VarE),
    st.sampled_from(["acc"]).map(F.SlotE),
    st.tuples(st.sampled_from(["t"]), st.sampled_from(["a", "b"]))
      .map(lambda p: F.TAttrE(*p)),
)


def _compound(children):
    return st.one_of(
        st.tuples(st.sampled_from(["+", "*"]), children, children)
          .map(lambda p: F.BinE(*p)),
        st.tuples(children, st.sampled_from(["f", "g"]))
          .map(lambda p: F.AttrE(*p)),
        st.tuples(children, children, children).map(lambda p: F.CondE(*p)),
        st.tuples(children, children).map(lambda p: F.InsertE(*p)),
        st.lists(children, min_size=1, max_size=3)
          .map(lambda xs: F.TupleE(tuple(xs))),
    )


@given(st.recursive(_leaves, _compound, max_leaves=12))
def test_expressions_round_trip_through_the_dag(e):
    g = D.Dag()
    oid = g.expr(e)
    assert g.expr_of_or(oid) == e


def test_expr_of_choice_follows_the_plan():
    g = D.Dag()
    oid = g.expr(F.BinE("+", F.VarE("x"), F.ConstE(1)))
    alt = g.add_alt(oid, "bin", "*", [g.expr(F.VarE("x")), g.expr(F.ConstE(2))],
                    rule="fake")
    assert g.expr_of_or(oid) == F.BinE("+", F.VarE("x"), F.ConstE(1))
    choice = {oid: alt}
    assert g.expr_of_choice(oid, choice) == F.BinE("*", F.VarE("x"), F.ConstE(2))


def test_dot_export_shows_ors_ands_and_the_plan():
    g, _ = _initial("p0")
    choice = {oid: o.alts[0] for oid, o in g.ors.items() if o.alts}
    text = D.export_dot(g, chosen=choice)
    assert text.startswith("digraph")
    assert 'label="S2-9" style=bold' in text
    assert text.count("shape=box") == len(g.ands)
    assert text.rstrip().endswith("}")
