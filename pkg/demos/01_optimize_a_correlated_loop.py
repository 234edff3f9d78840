"""Walk one program through the whole pipeline.

The sample iterates customers and, for each one, queries their orders:
the classic correlated pair that costs one round trip per customer.  On
the slow-remote network the optimizer replaces it with a prefetch and
per-key cache lookups.
"""

from importlib import resources

from cobra import pipeline, regions
from cobra.cost import Catalog

src = resources.files("cobra").joinpath("samples", "p0.cob").read_text()

print("input program")
print("-------------")
print(src)

cat = Catalog.preset("slow-remote")
result = pipeline.optimize(src, cat)

print("region tree:", regions.dump(result.info.root))
print("rules fired:", result.report.summary())
print()

print("alternatives and costs")
print("----------------------")
print(result.explain())
print()

print(f"chosen plan: {result.family}, "
      f"estimated {result.plan.cost.total:.4f} s per run")
print("-------------")
print(result.source)
