"""Watch the DAG grow one rewrite at a time.

Expands the running-sum sample with tracing on, then lists each OR node
with its alternatives.  The loop first becomes a fold; splitting the two
accumulators then exposes an aggregate query for the sum, which the
planner prices but rejects because the cumulative map still needs every
row.
"""

from importlib import resources

from cobra import dag as dagmod, parser, planner, regions, rules
from cobra.cost import Catalog, CostModel

src = resources.files("cobra").joinpath("samples", "m0.cob").read_text()
prog = parser.parse(src)
info = regions.build_regions(prog.functions[0])
g = dagmod.build_initial(info)

print("initial DAG:", g.counts()[0], "OR nodes,", g.counts()[1], "alternatives")

cat = Catalog.preset("slow-remote")
report = rules.expand(g, trace=True, relation_columns=cat.relation_columns())
for line in report.trace:
    print(" ", line)
print("after expansion:", g.counts()[0], "OR nodes,", g.counts()[1],
      "alternatives\n")

model = CostModel(cat, cfg=info.cfg)
best = planner.best_plan(g, model)
print(planner.explain(g, model, best))

dot = dagmod.export_dot(g, chosen=best.choice)
with open("m0_dag.dot", "w") as f:
    f.write(dot)
print("\nwrote m0_dag.dot (render with: dot -Tsvg m0_dag.dot)")
