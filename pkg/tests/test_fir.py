"""Functional form of expressions and loops."""

import pytest

from cobra import evaluator as E, fir as F, parser, syntax as S

from conftest import make_db, sample_source


def _loop_of(name, index):
    prog = parser.parse(sample_source(name))
    return prog, prog.functions[0].body[index]


def test_to_fir_maps_syntax_shapes():
    env = {"x": F.VarE("x")}
    e = S.Binary("+", S.Var("x"), S.IntLit(1))
    assert F.to_fir(e, env) == F.BinE("+", F.VarE("x"), F.ConstE(1))
    e = S.CallExpr("g", (S.Field(S.Var("x"), "a"),))
    assert F.to_fir(e, env) == F.CallE("g", (F.AttrE(F.VarE("x"), "a"),))


def test_to_fir_substitutes_the_environment():
    env = {"x": F.BinE("*", F.VarE("y"), F.ConstE(2))}
    got = F.to_fir(S.Binary("+", S.Var("x"), S.Var("x")), env)
    assert got == F.BinE("+", env["x"], env["x"])


def test_free_vars_and_slots():
    e = F.BinE("+", F.SlotE("acc"), F.AttrE(F.VarE("row"), "a"))
    assert F.free_vars(e) == frozenset({"row"})
    assert F.slot_names(e) == frozenset({"acc"})
    assert F.uses_cursor(F.TAttrE("t", "m"), "t")
    assert not F.uses_cursor(F.TAttrE("t", "m"), "u")


def test_loop_to_fold_orders_accumulators_by_first_write():
    prog, loop = _loop_of("m0", 2)
    fold = F.loop_to_fold(loop, {"sum", "cSum"}, {"sum", "cSum"})
    assert fold.names == ("sum", "cSum")
    assert isinstance(fold.acc, F.TupleE) and len(fold.acc.items) == 2
    assert isinstance(fold.init, F.TupleE)
    assert isinstance(fold.source, F.ExecE)


def test_legacy_mode_declines_dependent_accumulators():
    prog, loop = _loop_of("m0", 2)
    with pytest.raises(F.FoldDecline) as e:
        F.loop_to_fold(loop, {"sum", "cSum"}, {"sum", "cSum"}, legacy=True)
    assert "multiple accumulators" in str(e.value)


def test_uninitialized_accumulator_declines():
    src = """
fn f(n) {
  for (t : query { scan(sales) }) {
    n = t.sale_amt;
  }
}
"""
    prog = parser.parse(src, check=False)
    loop = prog.functions[0].body[0]
    with pytest.raises(F.FoldDecline) as e:
        F.loop_to_fold(loop, set(), {"n"})
    assert "no value when the loop is empty" in str(e.value)


def test_nested_loops_fold_recursively():
    prog, loop = _loop_of("p0", 1)
    fold = F.loop_to_fold(loop, {"result"}, {"result"})
    assert fold.names == ("result",)
    inner = [n for n in F.walk(fold.acc) if isinstance(n, F.FoldE)]
    assert len(inner) == 1
    assert inner[0].names == ("result",)


def test_fold_evaluates_like_the_loop():
    db = make_db(5, ["sales"])
    prog, loop = _loop_of("m0", 2)
    fold = F.loop_to_fold(loop, {"sum", "cSum"}, {"sum", "cSum"})
    interp = E.Interpreter(prog, db)
    got = F.eval_fir(fold, interp, {"sum": 0, "cSum": {}})
    ref = E.run_function(prog, "mySum", [None, None], db)
    assert got == (ref.params["sum"], ref.params["cSum"])


def test_nested_fold_evaluates_like_the_loops():
    db = make_db(5, ["customers", "orders"])
    prog, loop = _loop_of("p0", 1)
    fold = F.loop_to_fold(loop, {"result"}, {"result"})
    interp = E.Interpreter(prog, db)
    got = F.eval_fir(fold, interp, {"result": []})
    ref = E.run_function(prog, "processOrders", [None], db)
    assert got == ref.params["result"]


def test_insert_is_functional_in_fir():
    lst = [1]
    got = F.eval_fir(F.InsertE(F.VarE("l"), F.ConstE(2)), None, {"l": lst})
    assert got == [1, 2]
    assert lst == [1]


def test_map_put_is_functional_in_fir():
    m = {1: 1}
    got = F.eval_fir(F.MapPutE(F.VarE("m"), F.ConstE(2), F.ConstE(4)), None, {"m": m})
    assert got == {1: 1, 2: 4}
    assert m == {1: 1}


def test_cond_takes_one_branch():
    e = F.CondE(F.BinE(">", F.VarE("x"), F.ConstE(0)),
                F.ConstE("pos"), F.ConstE("neg"))
    assert F.eval_fir(e, None, {"x": 3}) == "pos"
    assert F.eval_fir(e, None, {"x": -3}) == "neg"


def test_show_is_readable():
    prog, loop = _loop_of("m0", 2)
    fold = F.loop_to_fold(loop, {"sum", "cSum"}, {"sum", "cSum"})
    text = F.show(fold)
    assert "fold" in text and "sum" in text and "cSum" in text
