"""Control-flow graph recovery into a region tree."""

from cobra import parser, regions

from conftest import sample_source


def _info(src, entry=0):
    prog = parser.parse(src)
    return regions.build_regions(prog.functions[entry])


DUMPS = {
    "p0": "S2-9 { B2; L3-9 { B3; L4-8 { B4; S5-7 } } }",
    "m0": "S2-9 { S2-3; L4-7 { B4; S5-6 }; S8-9 }",
    "t4": "S2-7 { B2; L3-7 { B3; L4-6 { B4; B5 } } }",
    "t2n2": "S2-7 { B2; L3-7 { B3; C4-6 { B4; B5 } } }",
    "n1": "S2-7 { B2; L3-7 { B3; L4-6 { B4; B5 } } }",
}


def test_sample_region_trees():
    for name, expected in DUMPS.items():
        info = _info(sample_source(name))
        assert regions.dump(info.root) == expected, name


def test_nested_query_loops():
    info = _info(sample_source("p0"))
    root = info.root
    assert root.kind == "sequential"
    outer = root.children[1]
    assert outer.kind == "loop" and outer.loop_kind == "query"
    assert outer.loop_var == "cust"
    inner = outer.children[1]
    assert inner.kind == "loop" and inner.loop_var == "o"
    body = inner.children[1]
    # straight-line statements fused into one run
    assert body.kind == "sequential" and body.is_run
    assert len(body.stmts) == 3


def test_live_boundaries_follow_data_flow():
    info = _info(sample_source("p0"))
    outer = info.root.children[1]
    assert info.boundary(outer) == (frozenset({"result"}), frozenset({"result"}))
    inner = outer.children[1]
    ins, outs = info.boundary(inner)
    assert ins == frozenset({"cust", "result"})
    assert outs == frozenset({"result"})
    body = inner.children[1]
    ins, outs = info.boundary(body)
    assert "o" in ins and outs == frozenset({"cust", "result"})


def test_conditional_region_roles():
    info = _info(sample_source("t2n2"))
    cond = info.root.children[1].children[1]
    assert cond.kind == "conditional"
    assert [(c.name, c.role) for c in cond.children] == [("B4", "header"), ("B5", "then")]
    ins, outs = info.boundary(cond)
    assert ins == frozenset({"o", "total"}) and outs == frozenset({"total"})


def test_if_else_grows_three_children():
    src = """
fn f(r, flag) {
  r = 0;
  if (flag) {
    r = 1;
  } else {
    r = 2;
  }
  console.print(r);
}
"""
    info = _info(src)
    cond = next(c for c in info.root.children if c.kind == "conditional")
    assert [c.role for c in cond.children] == ["header", "then", "else"]


def test_while_loop_region():
    src = """
fn f(n) {
  n = 10;
  while (n > 0) {
    n = n - 1;
  }
  return n;
}
"""
    info = _info(src)
    assert regions.dump(info.root) == "S3-7 { B3; L4-6 { B4; B5 }; B7 }"
    loop = info.root.children[1]
    assert loop.loop_kind == "while"


def test_expanded_dump_is_indented_tree():
    info = _info(sample_source("p0"))
    text = regions.dump_expanded(info.root)
    lines = text.splitlines()
    assert lines[0].startswith("S2-9 {")
    assert any(l.startswith("    L4-8 {") for l in lines)
    assert text.count("{") == text.count("}")
