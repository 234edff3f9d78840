"""Lexer, parser, static checks, and source emission."""

import pytest

from cobra import parser, syntax as S
from cobra.errors import ParseError, SemanticError

from conftest import SAMPLES, sample_source


def test_emit_is_a_fixpoint_on_all_samples():
    for name in SAMPLES:
        src = sample_source(name)
        prog = parser.parse(src, f"{name}.cob")
        out = S.emit_program(prog)
        again = S.emit_program(parser.parse(out, f"{name}.cob"))
        assert out == again


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as e:
        parser.parse("fn f() {\n  x = 1 +;\n}\n", "bad.cob")
    assert e.value.filename == "bad.cob"
    assert e.value.line == 2
    assert "bad.cob:2:" in str(e.value)


def test_unknown_token_rejected():
    with pytest.raises(ParseError):
        parser.parse("fn f() { x = 1 ? 2; }")


def test_undefined_variable_rejected():
    with pytest.raises(SemanticError) as e:
        parser.parse("fn f() {\n  y = x + 1;\n}\n")
    assert "undefined variable 'x'" in str(e.value)


def test_loop_variable_shadowing_rejected():
    src = """
fn f(out) {
  out = [];
  for (x : query { scan(orders) }) {
    for (x : query { scan(sales) }) {
      out.append(x);
    }
  }
}
"""
    with pytest.raises(SemanticError) as e:
        parser.parse(src)
    assert "shadows" in str(e.value)


def test_check_flag_skips_validation():
    src = "fn f() {\n  y = x + 1;\n}\n"
    prog = parser.parse(src, check=False)
    assert prog.functions[0].name == "f"


def test_query_with_outer_reference_round_trips():
    src = """
fn f(out, k) {
  out = [];
  for (o : query { select(eq(o_custkey, outer(k)), scan(orders)) }) {
    out.append(o.o_id);
  }
}
"""
    prog = parser.parse(src)
    out = S.emit_program(prog)
    assert "outer(k)" in out
    assert S.emit_program(parser.parse(out)) == out


def test_statement_forms_round_trip():
    src = """
fn f(r, flag) {
  r = {};
  total = 0;
  cacheByColumn(orders, o_custkey);
  rows = lookupCache(orders.o_custkey, 7);
  hits = executeQuery(query { select(gt(o_total, 100), scan(orders)) });
  for (o : rows) {
    total = total + o.o_total;
  }
  while (total > 10) {
    total = total - 1;
  }
  if (flag) {
    r.put(1, total);
  } else {
    r.put(2, total);
  }
  console.print(total);
  return r;
}
"""
    prog = parser.parse(src)
    out = S.emit_program(prog)
    assert S.emit_program(parser.parse(out)) == out
    kinds = [type(s).__name__ for s in prog.functions[0].body]
    assert "Prefetch" in kinds and "CacheLookup" in kinds
    assert "While" in kinds and "If" in kinds and "Return" in kinds


def test_line_numbers_track_source():
    src = sample_source("p0")
    prog = parser.parse(src)
    lines = [s.line for s in prog.functions[0].body]
    assert lines == sorted(lines)
    assert lines[0] >= 2
