"""Differential and property test driver.

Each family turns one of the equivalence results into an executable oracle
over a reproducible random corpus.  Failures are emitted as self-contained
bundles (expression text, database, family) that `replay` re-checks to the
same verdict; cap-exceeded fixpoints are skipped, never failed.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import analyze, ast, fuzz, translate
from .errors import EvalError, NullvlError, RecursionLimitError, SqlEmitError
from .evaluator import EvalConfig, eval_condition, evaluate
from .logic import (
    LogicKernel,
    empty_grounding,
    kernel_2vl,
    kernel_2vl_syntactic,
    kernel_3vl,
    kernel_4vl_example,
    kernel_grounded,
    nonnegative_leq_grounding,
    syntactic_equality_grounding,
)
from .parser import parse_condition, parse_expression
from .typecheck import typecheck
from .values import Bag, Database, bag_to_json, database_from_json, database_to_json, Schema

_GROUNDINGS = {
    "empty": empty_grounding,
    "syntactic": syntactic_equality_grounding,
    "leq-sign": nonnegative_leq_grounding,
}

_KERNELS = {
    "3vl": kernel_3vl,
    "2vl": kernel_2vl,
    "2vl-syn": kernel_2vl_syntactic,
    "4vl": kernel_4vl_example,
}


def kernel_by_name(name: str) -> LogicKernel:
    if name.startswith("grounded:"):
        return kernel_grounded(_GROUNDINGS[name.split(":", 1)[1]]())
    return _KERNELS[name]()


@dataclass
class CaseOutcome:
    status: str  # "pass" | "fail" | "skip"
    detail: str = ""
    size_ratio: Optional[Fraction] = None


@dataclass
class FamilySummary:
    family: str
    cases: int
    passed: int
    failed: int
    skipped: int
    max_size_ratio: Optional[Fraction] = None
    notes: dict = field(default_factory=dict)
    bundles: list = field(default_factory=list)  # failing case bundles

    def to_json(self) -> dict:
        out = {
            "family": self.family,
            "cases": self.cases,
            "passed": self.passed,
            "failed": self.failed,
            "skipped": self.skipped,
            "notes": dict(self.notes),
        }
        if self.max_size_ratio is not None:
            out["max_size_ratio"] = float(self.max_size_ratio)
        return out


def _db_json(db: Database) -> dict:
    return database_to_json(db)


def _bags_equal_detail(left: Bag, right: Bag, labels) -> str:
    return json.dumps(
        {"left": bag_to_json(left, labels), "right": bag_to_json(right, labels)}
    )


# ---------------------------------------------------------------------------
# Case checkers (pure functions of a self-contained case dict)


def _load_case_db(case: dict) -> Database:
    return database_from_json(case["db"])


def _checked_expr(case: dict, db: Database):
    expr = parse_expression(case["expression"])
    return typecheck(expr, db.schema).expr


def _check_capture_case(case: dict) -> CaseOutcome:
    db = _load_case_db(case)
    expr = _checked_expr(case, db)
    direction = case["direction"]
    if direction == "2to3":
        tr = translate.tr_to_3vl(expr, db.schema)
        source, target = kernel_2vl(), kernel_3vl()
    elif direction == "3to2":
        tr = translate.tr_from_3vl(expr, db.schema)
        source, target = kernel_3vl(), kernel_2vl()
    elif direction == "gr-to-3":
        grounding = _GROUNDINGS[case["grounding"]]()
        tr = translate.tr_grounded_to_3vl(expr, db.schema, grounding)
        source, target = kernel_grounded(grounding), kernel_3vl()
    elif direction == "3-to-gr":
        grounding = _GROUNDINGS[case["grounding"]]()
        tr = translate.tr_3vl_to_grounded(expr, db.schema)
        source, target = kernel_3vl(), kernel_grounded(grounding)
    elif direction == "mvl-to-3":
        kernel = kernel_by_name(case["kernel"])
        tr = translate.tr_mvl_to_3vl(expr, db.schema, kernel)
        source, target = kernel, kernel_3vl()
    else:
        raise NullvlError(f"unknown direction {direction!r}")
    verdict = translate.check_capture(
        expr, db, EvalConfig(kernel=source), EvalConfig(kernel=target), tr
    )
    if verdict.status == "inconclusive":
        return CaseOutcome("skip", verdict.detail)
    if verdict.equal:
        return CaseOutcome("pass", size_ratio=tr.size_ratio)
    labels = typecheck(parse_expression(case["expression"]), db.schema).sig.labels
    return CaseOutcome("fail", _bags_equal_detail(verdict.left, verdict.right, labels))


def _check_invariance_case(case: dict) -> CaseOutcome:
    db = _load_case_db(case)
    expr = _checked_expr(case, db)
    kernels = [kernel_3vl(), kernel_2vl(), kernel_2vl_syntactic(), kernel_grounded(empty_grounding())]
    outs = []
    try:
        for k in kernels:
            outs.append(evaluate(expr, db, cfg=EvalConfig(kernel=k)))
    except RecursionLimitError as exc:
        return CaseOutcome("skip", str(exc))
    if all(o == outs[0] for o in outs):
        return CaseOutcome("pass")
    return CaseOutcome("fail", "kernels disagree on a null-free database")


def _check_prop41_case(case: dict) -> CaseOutcome:
    db = _load_case_db(case)
    cfg = EvalConfig(kernel=kernel_2vl())
    try:
        for chk in case["checks"]:
            kind = chk["kind"]
            if kind == "bags-equal":
                left = evaluate(_typed(chk["left"], db), db, cfg=cfg)
                right = evaluate(_typed(chk["right"], db), db, cfg=cfg)
                if left != right:
                    return CaseOutcome("fail", f"{kind}: bags differ")
            elif kind in ("cond-false-iff-empty", "cond-true-iff-empty"):
                value = eval_condition(parse_condition(chk["cond"]), db, cfg=cfg)
                bag = evaluate(_typed(chk["expr"], db), db, cfg=cfg)
                wanted = "f" if kind == "cond-false-iff-empty" else "t"
                if (value == wanted) != bag.is_empty():
                    return CaseOutcome(
                        "fail", f"{kind}: condition {value}, selection empty={bag.is_empty()}"
                    )
            else:
                raise NullvlError(f"unknown check {kind!r}")
    except RecursionLimitError as exc:
        return CaseOutcome("skip", str(exc))
    return CaseOutcome("pass")


def _typed(text: str, db: Database):
    return typecheck(parse_expression(text), db.schema).expr


def _check_coincidence_case(case: dict) -> CaseOutcome:
    db = _load_case_db(case)
    expr = _checked_expr(case, db)
    report = analyze.coincidence_certificate(expr, db.schema)
    try:
        two = evaluate(expr, db, cfg=EvalConfig(kernel=kernel_2vl()))
        three = evaluate(expr, db, cfg=EvalConfig(kernel=kernel_3vl()))
    except RecursionLimitError as exc:
        return CaseOutcome("skip", str(exc))
    if report.certified:
        if two == three:
            return CaseOutcome("pass", "certified")
        return CaseOutcome("fail", "certified expression with divergent semantics")
    # sufficiency only: uncertified cases may coincide, record without failing
    return CaseOutcome("pass", "uncertified-equal" if two == three else "uncertified-divergent")


def _check_nullable_case(case: dict) -> CaseOutcome:
    db = _load_case_db(case)
    expr = _checked_expr(case, db)
    labels = typecheck(parse_expression(case["expression"]), db.schema).sig.labels
    nul = set(analyze.nullable(expr, db.schema))
    for kname in ("2vl", "3vl"):
        try:
            out = evaluate(expr, db, cfg=EvalConfig(kernel=kernel_by_name(kname)))
        except RecursionLimitError as exc:
            return CaseOutcome("skip", str(exc))
        for record in out.records():
            for name, v in zip(labels, record):
                if v is None and name not in nul:
                    return CaseOutcome(
                        "fail", f"NULL in {name!r} not predicted by the analysis"
                    )
    return CaseOutcome("pass")


def _check_roundtrip_case(case: dict) -> CaseOutcome:
    from . import sqlfront

    db = _load_case_db(case)
    expr = _checked_expr(case, db)
    try:
        sql = sqlfront.emit_sql(expr)
    except SqlEmitError as exc:
        return CaseOutcome("skip", str(exc))
    lowered = sqlfront.lower_to_algebra(sqlfront.parse_sql(sql), db.schema)
    lowered = typecheck(lowered, db.schema).expr
    cfg = EvalConfig(kernel=kernel_3vl())
    try:
        a = evaluate(expr, db, cfg=cfg)
        b = evaluate(lowered, db, cfg=cfg)
    except RecursionLimitError as exc:
        return CaseOutcome("skip", str(exc))
    if a == b:
        return CaseOutcome("pass")
    return CaseOutcome("fail", f"round-trip changed the result; sql: {sql}")


_CHECKERS: dict[str, Callable[[dict], CaseOutcome]] = {
    "capture-2vl-to-3vl": _check_capture_case,
    "capture-3vl-to-2vl": _check_capture_case,
    "grounded-syntactic": _check_capture_case,
    "grounded-leq": _check_capture_case,
    "capture-3vl-to-grounded": _check_capture_case,
    "mvl-4vl": _check_capture_case,
    "mvl-self": _check_capture_case,
    "null-free-invariance": _check_invariance_case,
    "prop-4.1": _check_prop41_case,
    "coincidence": _check_coincidence_case,
    "nullable-soundness": _check_nullable_case,
    "sql-roundtrip": _check_roundtrip_case,
}


# ---------------------------------------------------------------------------
# Case generators


def _base_case(schema: Schema, cfg: fuzz.FuzzConfig, rng, family: str, depth=None) -> dict:
    fcfg = cfg if depth is None else fuzz.FuzzConfig(
        seed=cfg.seed, max_depth=depth, null_rate=cfg.null_rate,
        rows_per_relation=cfg.rows_per_relation, cases=cfg.cases,
    )
    expr = fuzz.gen_expression(schema, fcfg, rng)
    expr = typecheck(expr, schema).expr
    db = fuzz.gen_database(schema, fcfg, rng)
    return {
        "family": family,
        "expression": ast.render_expression(expr),
        "db": _db_json(db),
    }


def _gen_case(family: str, schema: Schema, cfg: fuzz.FuzzConfig, rng) -> dict:
    if family == "capture-2vl-to-3vl":
        case = _base_case(schema, cfg, rng, family)
        case["direction"] = "2to3"
        return case
    if family == "capture-3vl-to-2vl":
        case = _base_case(schema, cfg, rng, family)
        case["direction"] = "3to2"
        return case
    if family == "grounded-syntactic":
        case = _base_case(schema, cfg, rng, family)
        case.update(direction="gr-to-3", grounding="syntactic")
        return case
    if family == "grounded-leq":
        case = _base_case(schema, cfg, rng, family)
        case.update(direction="gr-to-3", grounding="leq-sign")
        return case
    if family == "capture-3vl-to-grounded":
        case = _base_case(schema, cfg, rng, family)
        case.update(direction="3-to-gr", grounding="leq-sign")
        return case
    if family == "mvl-4vl":
        case = _base_case(schema, cfg, rng, family, depth=min(cfg.max_depth, 3))
        case.update(direction="mvl-to-3", kernel="4vl")
        return case
    if family == "mvl-self":
        case = _base_case(schema, cfg, rng, family, depth=min(cfg.max_depth, 3))
        case.update(direction="mvl-to-3", kernel="3vl")
        return case
    if family == "null-free-invariance":
        nf_cfg = fuzz.FuzzConfig(
            seed=cfg.seed, max_depth=cfg.max_depth, null_rate=0.0,
            rows_per_relation=cfg.rows_per_relation, cases=cfg.cases,
        )
        return _base_case(schema, nf_cfg, rng, family)
    if family in ("coincidence", "nullable-soundness", "sql-roundtrip"):
        return _base_case(schema, cfg, rng, family)
    if family == "prop-4.1":
        return _gen_prop41_case(schema, cfg, rng)
    raise NullvlError(f"unknown family {family!r}")


def _gen_prop41_case(schema: Schema, cfg: fuzz.FuzzConfig, rng) -> dict:
    gen = fuzz.ExpressionGenerator(schema, cfg, rng)
    expr, sig = gen.expr(cfg.max_depth - 1, {})
    expr = typecheck(expr, schema).expr
    scope = dict(zip(sig.labels, sig.types))
    theta = gen.condition(2, scope)
    expr_text = ast.render_expression(expr)
    checks = [
        {
            "kind": "bags-equal",
            "left": ast.render_expression(ast.Selection(theta, expr)),
            "right": ast.render_expression(
                ast.SetOp("except", expr, ast.Selection(ast.Not(theta), expr))
            ),
        }
    ]
    # constant tuples compared against the subquery result
    items = tuple(gen.term(t, {}) for t in sig.types)
    labels = tuple(ast.NameRef(n) for n in sig.labels)
    checks.append(
        {
            "kind": "cond-false-iff-empty",
            "cond": ast.render_condition(ast.In(items, expr)),
            "expr": ast.render_expression(
                ast.Selection(ast.Compare(items, "=", labels), expr)
            ),
        }
    )
    numeric = all(t == "n" for t in sig.types)
    op = rng.choice(ast.COMPARISONS if numeric else ("=", "!="))
    items2 = tuple(gen.term(t, {}) for t in sig.types)
    checks.append(
        {
            "kind": "cond-false-iff-empty",
            "cond": ast.render_condition(ast.Quant(items2, op, "any", expr)),
            "expr": ast.render_expression(
                ast.Selection(ast.Compare(items2, op, labels), expr)
            ),
        }
    )
    checks.append(
        {
            "kind": "cond-true-iff-empty",
            "cond": ast.render_condition(ast.Quant(items2, op, "all", expr)),
            "expr": ast.render_expression(
                ast.Selection(ast.Not(ast.Compare(items2, op, labels)), expr)
            ),
        }
    )
    db = fuzz.gen_database(schema, cfg, rng)
    return {
        "family": "prop-4.1",
        "expression": expr_text,
        "db": _db_json(db),
        "checks": checks,
    }


FAMILIES = tuple(_CHECKERS)


def run_differential(
    family: str,
    cfg: Optional[fuzz.FuzzConfig] = None,
    schema: Optional[Schema] = None,
    bundle_dir: Optional[str] = None,
) -> FamilySummary:
    """Run one property family over a fresh corpus; failures become bundles."""
    if family not in _CHECKERS:
        raise NullvlError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    cfg = cfg or fuzz.FuzzConfig()
    schema = schema or fuzz.default_schema()
    checker = _CHECKERS[family]
    summary = FamilySummary(family, 0, 0, 0, 0)
    ratios: list[Fraction] = []
    notes: dict[str, int] = {}
    produced = 0
    attempts = 0
    target = cfg.cases
    needs_certified = family == "coincidence"
    while produced < target and attempts < 40 * max(target, 1):
        rng = fuzz.case_rng(cfg.seed, attempts)
        attempts += 1
        case = _gen_case(family, schema, cfg, rng)
        if needs_certified:
            db = database_from_json(case["db"])
            expr = typecheck(parse_expression(case["expression"]), db.schema).expr
            if not analyze.coincidence_certificate(expr, db.schema).certified:
                notes["uncertified-generated"] = notes.get("uncertified-generated", 0) + 1
                continue
        produced += 1
        case["index"] = attempts - 1
        case["seed"] = cfg.seed
        outcome = checker(case)
        summary.cases += 1
        if outcome.status == "pass":
            summary.passed += 1
            if outcome.detail.startswith("uncertified"):
                notes[outcome.detail] = notes.get(outcome.detail, 0) + 1
            if outcome.size_ratio is not None:
                ratios.append(outcome.size_ratio)
        elif outcome.status == "skip":
            summary.skipped += 1
        else:
            summary.failed += 1
            bundle = dict(case)
            bundle["failure"] = outcome.detail
            summary.bundles.append(bundle)
            if bundle_dir:
                os.makedirs(bundle_dir, exist_ok=True)
                path = os.path.join(bundle_dir, f"{family}-{case['index']}.json")
                with open(path, "w", encoding="utf-8") as fh:
                    json.dump(bundle, fh, indent=1)
                notes.setdefault("bundle_files", 0)
                notes["bundle_files"] += 1
    if ratios:
        summary.max_size_ratio = max(ratios)
        summary.notes["mean_size_ratio"] = float(sum(ratios) / len(ratios))
    summary.notes.update(notes)
    return summary


def replay(bundle: dict) -> CaseOutcome:
    """Re-run a counterexample bundle; deterministic, no randomness involved."""
    family = bundle.get("family")
    if family not in _CHECKERS:
        raise NullvlError(f"bundle names unknown family {family!r}")
    return _CHECKERS[family](bundle)
