"""Command-line interface.

Exit codes: 0 success, 1 property failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import analyze, ast, fuzz, harness, sqlfront, translate
from .errors import NullvlError
from .evaluator import EvalConfig, evaluate
from .logic import load_grounding, load_kernel
from .parser import parse_expression
from .typecheck import typecheck
from .values import bag_to_json, load_database
from .harness import kernel_by_name


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _semantics_kernel(spec: str):
    if spec.startswith("grounded:"):
        from .logic import kernel_grounded

        return kernel_grounded(load_grounding(spec.split(":", 1)[1]))
    if spec.startswith("mvl:"):
        return load_kernel(spec.split(":", 1)[1])
    if spec in ("3vl", "2vl", "2vl-syn"):
        return kernel_by_name(spec)
    raise NullvlError(
        f"unknown semantics {spec!r}; use 3vl, 2vl, 2vl-syn, grounded:<file> or mvl:<file>"
    )


def _cmd_eval(args) -> int:
    db = load_database(args.db)
    expr = parse_expression(_read(args.expr))
    checked = typecheck(expr, db.schema)
    kernel = _semantics_kernel(args.semantics)
    cfg = EvalConfig(kernel=kernel, recursion_cap=args.recursion_cap)
    bag = evaluate(checked.expr, db, cfg=cfg)
    if args.canonical:
        print(bag.canonical_text())
    else:
        print(json.dumps(bag_to_json(bag, checked.sig.labels), indent=1))
    return 0


def _cmd_translate(args) -> int:
    text = _read(args.expr)
    expr = parse_expression(text)
    schema = load_database(args.schema).schema if args.schema else fuzz.default_schema()
    expr = typecheck(expr, schema).expr
    if args.direction == "2to3":
        result = translate.tr_to_3vl(expr, schema)
    elif args.direction == "3to2":
        result = translate.tr_from_3vl(expr, schema)
    elif args.direction == "gr-to-3":
        if not args.grounding:
            raise NullvlError("gr-to-3 needs --grounding <file>")
        result = translate.tr_grounded_to_3vl(expr, schema, load_grounding(args.grounding))
    elif args.direction == "mvl-to-3":
        if not args.kernel:
            raise NullvlError("mvl-to-3 needs --kernel <file>")
        result = translate.tr_mvl_to_3vl(expr, schema, load_kernel(args.kernel))
    else:
        raise NullvlError(f"unknown direction {args.direction!r}")
    print(ast.render_expression(result.output))
    if args.trace:
        print(json.dumps({"size_ratio": float(result.size_ratio), "trace": result.trace_json()}, indent=1), file=sys.stderr)
    return 0


def _cmd_analyze(args) -> int:
    db = load_database(args.db)
    expr = parse_expression(_read(args.expr))
    expr = typecheck(expr, db.schema).expr
    report = analyze.coincidence_certificate(expr, db.schema)
    if args.json:
        print(json.dumps(report.to_json(), indent=1))
    else:
        print(report.to_table())
    return 0


def _cmd_sql2ra(args) -> int:
    db = load_database(args.schema)
    query = sqlfront.parse_sql(_read(args.sql))
    lowered = sqlfront.lower_to_algebra(query, db.schema)
    lowered = typecheck(lowered, db.schema).expr
    print(ast.render_expression(lowered))
    return 0


def _cmd_rewrite(args) -> int:
    if (args.source, args.target) != ("2vl", "3vl"):
        raise NullvlError("rewrite supports --from 2vl --to 3vl")
    db = load_database(args.schema)
    query = sqlfront.parse_sql(_read(args.sql))
    lowered = sqlfront.lower_to_algebra(query, db.schema)
    lowered = typecheck(lowered, db.schema).expr
    result = translate.tr_to_3vl(lowered, db.schema)
    print(sqlfront.emit_sql(result.output))
    return 0


def _cmd_fuzz(args) -> int:
    cfg = fuzz.FuzzConfig(
        seed=args.seed,
        max_depth=args.depth,
        null_rate=args.null_rate,
        rows_per_relation=args.rows,
        cases=args.cases,
    )
    summary = harness.run_differential(args.family, cfg, bundle_dir=args.bundles)
    out = summary.to_json()
    print(json.dumps(out, indent=1))
    for bundle in summary.bundles:
        print(f"counterexample: {json.dumps(bundle)[:400]}", file=sys.stderr)
    return 1 if summary.failed else 0


def _cmd_replay(args) -> int:
    with open(args.bundle, "r", encoding="utf-8") as fh:
        bundle = json.load(fh)
    outcome = harness.replay(bundle)
    print(json.dumps({"status": outcome.status, "detail": outcome.detail}))
    return 0 if outcome.status == "pass" else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nullvl",
        description="Evaluate, translate and analyze queries over data with nulls "
        "under pluggable condition semantics.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("eval", help="evaluate an expression on a database")
    pe.add_argument("--semantics", default="3vl",
                    help="3vl | 2vl | 2vl-syn | grounded:<file> | mvl:<file>")
    pe.add_argument("--canonical", action="store_true", help="print the sorted text form")
    pe.add_argument("--recursion-cap", type=int, default=10_000)
    pe.add_argument("expr", help="expression file ('-' for stdin)")
    pe.add_argument("db", help="database JSON file")
    pe.set_defaults(fn=_cmd_eval)

    pt = sub.add_parser("translate", help="translate an expression between semantics")
    pt.add_argument("--direction", required=True, choices=["2to3", "3to2", "gr-to-3", "mvl-to-3"])
    pt.add_argument("--grounding", help="grounding JSON file (gr-to-3)")
    pt.add_argument("--kernel", help="kernel JSON file (mvl-to-3)")
    pt.add_argument("--schema", help="database JSON supplying the schema")
    pt.add_argument("--trace", action="store_true", help="emit the per-node rule trace")
    pt.add_argument("expr", help="expression file ('-' for stdin)")
    pt.set_defaults(fn=_cmd_translate)

    pa = sub.add_parser("analyze", help="nullability report and coincidence certificate")
    pa.add_argument("--json", action="store_true", help="JSON instead of the table")
    pa.add_argument("expr", help="expression file ('-' for stdin)")
    pa.add_argument("db", help="database JSON file supplying the schema")
    pa.set_defaults(fn=_cmd_analyze)

    ps = sub.add_parser("sql2ra", help="parse SQL and print the algebra expression")
    ps.add_argument("--schema", required=True, help="database JSON supplying the schema")
    ps.add_argument("sql", help="SQL file ('-' for stdin)")
    ps.set_defaults(fn=_cmd_sql2ra)

    pr = sub.add_parser("rewrite", help="rewrite SQL from one semantics into another")
    pr.add_argument("--from", dest="source", required=True)
    pr.add_argument("--to", dest="target", required=True)
    pr.add_argument("--dialect", default="generic", choices=["generic"])
    pr.add_argument("--schema", required=True, help="database JSON supplying the schema")
    pr.add_argument("sql", help="SQL file ('-' for stdin)")
    pr.set_defaults(fn=_cmd_rewrite)

    pf = sub.add_parser("fuzz", help="run a differential property family")
    pf.add_argument("--family", required=True, choices=sorted(harness.FAMILIES))
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--cases", type=int, default=500)
    pf.add_argument("--depth", type=int, default=4)
    pf.add_argument("--null-rate", type=float, default=0.3)
    pf.add_argument("--rows", type=int, default=6)
    pf.add_argument("--bundles", help="directory for counterexample bundles")
    pf.set_defaults(fn=_cmd_fuzz)

    pp = sub.add_parser("replay", help="re-check a counterexample bundle")
    pp.add_argument("bundle")
    pp.set_defaults(fn=_cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NullvlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
