"""Shared fixtures: sample programs, generation schemas, catalogs."""

import random
from importlib import resources

import pytest

from cobra import dag as D, evaluator as E
from cobra.cost import Catalog

# Generation schemas matching the relations of the shipped catalogs.
# Key columns are unique 1..n; foreign keys draw from the parent's keys.
SCHEMAS = {
    "customers": {"rows": 8, "key": "c_custkey",
                  "values": {"c_birth_year": (1950, 2000), "c_region": (0, 4)}},
    "orders": {"rows": 30, "key": "o_orderkey",
               "fk": {"o_custkey": "customers"},
               "values": {"o_id": (0, 99), "o_total": (10, 900)}},
    "sales": {"rows": 25, "key": "s_id",
              "values": {"month": (1, 12), "sale_amt": (1, 50)}},
    "payments": {"rows": 40, "key": "p_id",
                 "fk": {"p_orderkey": "orders"},
                 "values": {"p_amount": (1, 500)}},
    "r1": {"rows": 12, "key": "a", "values": {"b": (0, 9), "c": (0, 9)}},
    "r2": {"rows": 20, "key": "d", "values": {"e": (0, 30), "f": (0, 9)}},
}

SAMPLES = ("p0", "m0", "t4", "t2n2", "n1")


def sample_source(name: str) -> str:
    return resources.files("cobra").joinpath("samples", f"{name}.cob").read_text()


def sample_path(name: str) -> str:
    return str(resources.files("cobra").joinpath("samples", f"{name}.cob"))


def schemas_for(relations) -> dict:
    """The schemas for ``relations`` plus foreign-key parents, declaration
    order preserved so parents are generated first."""
    wanted = set(relations)
    changed = True
    while changed:
        changed = False
        for r in list(wanted):
            for parent in SCHEMAS[r].get("fk", {}).values():
                if parent not in wanted:
                    wanted.add(parent)
                    changed = True
    return {r: s for r, s in SCHEMAS.items() if r in wanted}


def make_db(seed: int, relations) -> dict:
    return E.generate_db(seed, schemas_for(relations))


def opaque_dag(rng: random.Random) -> D.Dag:
    """A DAG of uninterpreted alternatives with random positive costs."""
    g = D.Dag()
    ors = []
    for _ in range(rng.randint(1, 12)):
        oid = g.new_or()
        for _ in range(rng.randint(1, 3)):
            kids = [rng.choice(ors) for _ in range(rng.randint(0, min(3, len(ors))))]
            payload = (rng.uniform(0.01, 10.0), rng.uniform(0.0, 1.0), 0.0)
            g.add_alt(oid, "opaque", payload, kids)
        ors.append(oid)
    g.root = ors[-1]
    return g


@pytest.fixture
def slow_remote() -> Catalog:
    return Catalog.preset("slow-remote")


@pytest.fixture
def fast_local() -> Catalog:
    return Catalog.preset("fast-local")


@pytest.fixture
def unit_catalog() -> Catalog:
    return Catalog.preset("unit")
