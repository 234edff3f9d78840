"""Command line interface.

``optimize`` writes the chosen program to stdout; diagnostics, traces and
the ``--explain`` report go to stderr.  Exit codes: 0 success, 1 user
error, 2 broken internal invariant.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, codegen, dag as dagmod, parser, pipeline, planner, regions
from .cost import PRESETS, Catalog
from .errors import CobraError, InternalError
from .evaluator import load_db, run_function
from .rules import RULE_ORDER


def _build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cobra",
        description="Cost-based rewriting of imperative programs with "
                    "embedded queries.")
    ap.add_argument("--version", action="version", version=f"cobra {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="program source (.cob)")
    common.add_argument("--entry", metavar="FN",
                        help="function to work on (default: first in the file)")

    cat = argparse.ArgumentParser(add_help=False)
    cat.add_argument("--catalog", metavar="PATH",
                     help="statistics and constants (JSON)")
    cat.add_argument("--network", choices=PRESETS + ("custom",),
                     help="preset catalog, or preset network parameters when "
                          "--catalog is also given; 'custom' keeps the "
                          "catalog's own network section")
    cat.add_argument("--af", metavar="N|inf",
                     help="global amortization factor for prefetches")

    rules = argparse.ArgumentParser(add_help=False)
    rules.add_argument("--rules", metavar="LIST",
                       help="comma-separated rewrite subset (default: all of "
                            + ",".join(RULE_ORDER) + ")")
    rules.add_argument("--budget", type=int, default=10000, metavar="N",
                       help="rewrite application budget (default 10000)")
    rules.add_argument("--legacy", action="store_true",
                       help="restrict loop folding to single accumulators")
    rules.add_argument("--trace-rules", action="store_true",
                       help="log each rewrite application to stderr")

    p = sub.add_parser("optimize", parents=[common, cat, rules],
                       help="rewrite a program to its cheapest plan")
    p.add_argument("--explain", action="store_true",
                   help="per-alternative cost report on stderr")
    p.add_argument("--list-alternatives", action="store_true",
                   help="list every alternative of every OR node on stderr")
    p.add_argument("--emit-dot", metavar="PATH",
                   help="write the expanded DAG as Graphviz text")
    p.add_argument("--self-check", action="store_true",
                   help="interpret input and output on seeded random "
                        "databases and require equal results")

    p = sub.add_parser("run", parents=[common],
                       help="interpret a program against a JSON database")
    p.add_argument("--db", required=True, metavar="PATH",
                   help="database JSON ({relation: {schema, rows}})")

    sub.add_parser("dump-regions", parents=[common],
                   help="print the region tree")

    p = sub.add_parser("dump-dag", parents=[common, cat, rules],
                       help="print the alternatives DAG")
    p.add_argument("--emit-dot", metavar="PATH",
                   help="write Graphviz text instead of a node listing")
    p.add_argument("--initial", action="store_true",
                   help="skip expansion; show the DAG as built")
    return ap


def _read(path: str) -> str:
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise CobraError(f"no such file: {path}" if e.errno == 2
                         else f"cannot read {path}: {e.strerror}")


def _catalog(args) -> Catalog:
    if args.catalog:
        cat = Catalog.load(args.catalog)
        if args.network and args.network != "custom":
            preset = Catalog.preset(args.network)
            cat.nrt_s = preset.nrt_s
            cat.bandwidth_Bps = preset.bandwidth_Bps
    elif args.network and args.network != "custom":
        cat = Catalog.preset(args.network)
    else:
        cat = Catalog.preset("slow-remote")
    if args.af is not None:
        cat.set_af(args.af)
    return cat


def _rule_names(args):
    if args.rules is None:
        return None
    names = tuple(n.strip() for n in args.rules.split(",") if n.strip())
    for n in names:
        if n not in RULE_ORDER:
            raise CobraError(
                f"unknown rule {n!r}; known: {', '.join(RULE_ORDER)}")
    return names


def _cmd_optimize(args) -> int:
    source = _read(args.file)
    cat = _catalog(args)
    result = pipeline.optimize(
        source, cat, entry=args.entry, rule_names=_rule_names(args),
        budget=args.budget, legacy=args.legacy, trace=args.trace_rules,
        filename=args.file)
    if args.trace_rules:
        for line in result.report.trace:
            print(line, file=sys.stderr)
    if args.explain or args.list_alternatives:
        print(result.explain(), file=sys.stderr)
    if args.emit_dot:
        with open(args.emit_dot, "w") as f:
            f.write(dagmod.export_dot(result.dag, chosen=result.plan.choice))
    if args.self_check:
        ok = pipeline.check_equivalent(result.original, result.source,
                                       result.entry, cat)
        if not ok:
            print("self-check failed: emitted program diverges from input",
                  file=sys.stderr)
            return 1
        print("self-check passed", file=sys.stderr)
    sys.stdout.write(result.source)
    return 0


def _cmd_run(args) -> int:
    program = parser.parse(_read(args.file), args.file)
    fn = program.functions[0] if args.entry is None else program.function(args.entry)
    db = load_db(args.db)
    res = run_function(program, fn.name, [None] * len(fn.params), db)
    for v in res.console:
        print(v)
    if res.ret is not None:
        print(f"return: {res.ret}")
    print(f"queries={res.query_count} rows_transferred={res.rows_transferred}",
          file=sys.stderr)
    return 0


def _cmd_dump_regions(args) -> int:
    program = parser.parse(_read(args.file), args.file)
    fn = program.functions[0] if args.entry is None else program.function(args.entry)
    info = regions.build_regions(fn, args.file)
    print(regions.dump(info.root))
    return 0


def _cmd_dump_dag(args) -> int:
    program = parser.parse(_read(args.file), args.file)
    fn = program.functions[0] if args.entry is None else program.function(args.entry)
    info = regions.build_regions(fn, args.file)
    dag = dagmod.build_initial(info)
    if not args.initial:
        from . import rules as rulesmod
        cat = _catalog(args)
        rep = rulesmod.expand(dag, rules=_rule_names(args), budget=args.budget,
                              trace=args.trace_rules,
                              relation_columns=cat.relation_columns(),
                              legacy=args.legacy)
        if args.trace_rules:
            for line in rep.trace:
                print(line, file=sys.stderr)
    if args.emit_dot:
        with open(args.emit_dot, "w") as f:
            f.write(dagmod.export_dot(dag))
        return 0
    for oid in sorted(dag.ors):
        node = dag.ors[oid]
        alts = ", ".join(
            f"{dag.ands[a].op}#{a}" for a in node.alts) or "leaf"
        print(f"{node.label}: {alts}")
    return 0


_COMMANDS = {
    "optimize": _cmd_optimize,
    "run": _cmd_run,
    "dump-regions": _cmd_dump_regions,
    "dump-dag": _cmd_dump_dag,
}


def main(argv=None) -> int:
    ap = _build_argparser()
    args = ap.parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    except CobraError as e:
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
