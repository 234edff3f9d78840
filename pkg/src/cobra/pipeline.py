"""End-to-end driver: parse, expand, choose a plan, emit the program."""

from __future__ import annotations

from dataclasses import dataclass

from . import codegen, dag as dagmod, parser, planner, regions, rules
from .cost import Catalog, CostModel
from .evaluator import generate_db, run_function


@dataclass
class OptimizeResult:
    source: str                  # emitted program
    original: object             # parsed input program
    entry: str
    dag: object
    info: object                 # region tree and analyses
    report: object               # expansion report
    model: CostModel
    plan: object                 # planner result
    family: str                  # P0 / P1 / P2

    def explain(self) -> str:
        return planner.explain(self.dag, self.model, self.plan)


def optimize(source: str, catalog: Catalog, entry: str = None,
             rule_names=None, budget: int = 10000, legacy: bool = False,
             trace: bool = False, filename: str = "<input>") -> OptimizeResult:
    program = parser.parse(source, filename)
    fn = program.functions[0] if entry is None else program.function(entry)
    info = regions.build_regions(fn, filename)
    dag = dagmod.build_initial(info)
    report = rules.expand(dag, rules=rule_names, budget=budget, trace=trace,
                          relation_columns=catalog.relation_columns(),
                          legacy=legacy)
    model = CostModel(catalog, cfg=info.cfg)
    plan = planner.best_plan(dag, model)
    family = planner.classify(dag, plan.choice, cfg=info.cfg)
    emitted = codegen.emit_source(dag, plan.choice, program, fn.name)
    return OptimizeResult(emitted, program, fn.name, dag, info, report,
                          model, plan, family)


def program_relations(program) -> set:
    """Relations a program touches, from query literals and cache calls."""
    import cobra.syntax as S
    import cobra.queries as Q
    rels: set = set()

    def query(q):
        if isinstance(q, Q.Scan):
            rels.add(q.relation)
        elif isinstance(q, Q.Join):
            query(q.left)
            query(q.right)
        elif isinstance(q, (Q.Select, Q.Project, Q.OrderBy, Q.Aggregate)):
            query(q.child)

    def stmt(s):
        if isinstance(s, S.ExecQuery):
            query(s.query)
        elif isinstance(s, (S.Prefetch, S.CacheLookup)):
            rels.add(s.relation)
        elif isinstance(s, S.QueryLoop):
            query(s.query)
            for b in s.body:
                stmt(b)
        elif isinstance(s, (S.CollLoop, S.While)):
            for b in s.body:
                stmt(b)
        elif isinstance(s, S.If):
            for b in s.then_body:
                stmt(b)
            for b in s.else_body:
                stmt(b)

    for f in program.functions:
        for s in f.body:
            stmt(s)
    return rels


def check_equivalent(original, emitted_source: str, entry: str,
                     catalog: Catalog, seeds=range(5), rows: int = 40) -> bool:
    """Differential run of the emitted program against the original on
    small random databases built from the catalog's schemas."""
    emitted = parser.parse(emitted_source, "<emitted>")
    fn = original.function(entry)
    rels = program_relations(original)
    schemas = {}
    for rel in sorted(rels):
        cols = catalog.relation_columns().get(rel)
        if not cols:
            raise ValueError(f"no schema for relation {rel!r} in the catalog")
        schemas[rel] = {"rows": rows, "key": cols[0],
                        "values": {c: (0, 9) for c in cols[1:]}}
    args = [None] * len(fn.params)
    for seed in seeds:
        db = generate_db(seed, schemas)
        want = run_function(original, entry, list(args), db).output_state()
        got = run_function(emitted, entry, list(args), db).output_state()
        if want != got:
            return False
    return True
