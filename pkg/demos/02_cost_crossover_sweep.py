"""Where the plan choice flips as tables grow.

Sweeps the orders cardinality with a large fixed customer table and
prints which plan family wins at each size.  The join transfers every
joined row, so it scales with the result; the prefetch pays for whole
relations up front, so it wins once the join output gets large.
"""

from importlib import resources

from cobra import pipeline
from cobra.cost import Catalog

src = resources.files("cobra").joinpath("samples", "p0.cob").read_text()
CUSTOMERS = 73_000


def catalog(preset, orders):
    cat = Catalog.preset(preset)
    cat.relations["customers"]["card"] = CUSTOMERS
    cat.relations["customers"]["distinct"]["c_custkey"] = CUSTOMERS
    cat.relations["orders"]["card"] = orders
    cat.relations["orders"]["distinct"]["o_orderkey"] = orders
    cat.relations["orders"]["distinct"]["o_custkey"] = min(orders, CUSTOMERS)
    return cat


for preset in ("slow-remote", "fast-local"):
    print(f"{preset} ({CUSTOMERS:,} customers)")
    print(f"{'orders':>12}  {'family':6}  {'est. seconds':>12}")
    for n in (100, 1_000, 10_000, 100_000, 1_000_000):
        r = pipeline.optimize(src, catalog(preset, n))
        print(f"{n:>12,}  {r.family:6}  {r.plan.cost.total:>12.4f}")
    print()
