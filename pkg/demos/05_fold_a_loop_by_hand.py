"""Turn a loop into its fold form and check it means the same thing.

The running-sum loop writes two variables where the second depends on
the first inside one iteration.  Its fold threads both through a single
tuple accumulator; evaluating that fold against the interpreter's run of
the original loop gives identical values.
"""

from importlib import resources

from cobra import evaluator, fir, parser

src = resources.files("cobra").joinpath("samples", "m0.cob").read_text()
prog = parser.parse(src)
loop = prog.functions[0].body[2]

fold = fir.loop_to_fold(loop, {"sum", "cSum"}, {"sum", "cSum"})
print("accumulators:", ", ".join(fold.names))
print(fir.show(fold))
print()

try:
    fir.loop_to_fold(loop, {"sum", "cSum"}, {"sum", "cSum"}, legacy=True)
except fir.FoldDecline as e:
    print("single-accumulator mode declines:", e)
print()

schemas = {"sales": {"rows": 30, "key": "s_id",
                     "values": {"month": (1, 12), "sale_amt": (1, 50)}}}
db = evaluator.generate_db(1, schemas)

interp = evaluator.Interpreter(prog, db)
folded = fir.eval_fir(fold, interp, {"sum": 0, "cSum": {}})
looped = evaluator.run_function(prog, "mySum", [None, None], db)

print("fold result:  sum =", folded[0])
print("loop result:  sum =", looped.params["sum"])
assert folded == (looped.params["sum"], looped.params["cSum"])
print("cumulative maps agree on", len(folded[1]), "months")
