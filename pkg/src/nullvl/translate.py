"""Syntactic translations between condition semantics.

Each translator rewrites selection conditions through a pair of mappings:
one producing a condition that is true under the target semantics exactly
when the source condition is true, the other doing the same for "false".
Expressions translate by replacing every selection condition with its
"true" image; the output evaluates, under the target semantics, to the same
bag as the input under the source semantics, on every database.

The translations are purely syntactic and deterministic; no simplification
pass runs afterwards.  Fresh names introduced here carry the reserved
prefix ``__``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iter_product
from typing import Mapping, Optional

from . import ast
from .errors import EvalError, NullvlError, RecursionLimitError
from .evaluator import EvalConfig, evaluate
from .logic import (
    AND,
    OR,
    Grounding,
    LogicKernel,
    fold_counted,
    grounded_comparison_condition,
    reduce_count,
)
from .typecheck import RelSig, _labels
from .values import Bag, Database, Schema

COUNT_LABEL = "__cnt"
REDUCED_LABEL = "__red"


@dataclass(frozen=True)
class TranslationResult:
    output: ast.Expression
    size_ratio: Fraction
    trace: tuple[tuple[str, str], ...]  # (node path, rule that fired)

    def trace_json(self) -> list[dict]:
        return [{"path": path, "rule": rule} for path, rule in self.trace]


LabelCatalog = dict  # relation name -> tuple of labels


def _label_catalog(schema_or_catalog) -> LabelCatalog:
    if isinstance(schema_or_catalog, Schema):
        return {rel.name: rel.labels for rel in schema_or_catalog.relations.values()}
    return dict(schema_or_catalog)


def _labels_of(e: ast.Expression, catalog: LabelCatalog) -> tuple[str, ...]:
    sigs = {name: RelSig(labels, ("o",) * len(labels)) for name, labels in catalog.items()}
    return _labels(e, sigs)


def _not_null(term: ast.Term) -> ast.Condition:
    return ast.Not(ast.IsNull(term))


def _cols(labels: tuple[str, ...]) -> tuple[ast.Term, ...]:
    return tuple(ast.NameRef(n) for n in labels)


class _Translator:
    """Shared recursion over expressions; subclasses provide condition rules."""

    name = "base"

    def __init__(self, schema_or_catalog):
        self.catalog = _label_catalog(schema_or_catalog)
        self.trace: list[tuple[str, str]] = []
        self._fresh = 0

    # -- public -------------------------------------------------------------

    def run(self, e: ast.Expression) -> TranslationResult:
        out = self.expr(e, "")
        ratio = Fraction(ast.expression_size(out), ast.expression_size(e))
        return TranslationResult(out, ratio, tuple(self.trace))

    # -- helpers ------------------------------------------------------------

    def _note(self, path: str, rule: str):
        self.trace.append((path, rule))

    def _fresh_name(self, hint: str) -> str:
        self._fresh += 1
        return f"__{hint}{self._fresh}"

    def subquery(self, e: ast.Expression, path: str, avoid: set[str]):
        """Translate a condition subquery; rename its output labels when they
        collide with names the surrounding condition must keep visible."""
        out = self.expr(e, path)
        labels = _labels_of(out, self.catalog)
        if not (set(labels) & avoid):
            return out, labels
        fresh = tuple(self._fresh_name("c") for _ in labels)
        self._note(path, "rename-subquery-labels")
        renamed = ast.Projection(
            tuple(ast.ProjItem(ast.NameRef(n), f) for n, f in zip(labels, fresh)), out
        )
        return renamed, fresh

    def _avoid(self, items: tuple[ast.Term, ...]) -> set[str]:
        out: set[str] = set()
        for item in items:
            out |= ast.term_names(item)
        return out

    # -- expression recursion -------------------------------------------------

    def expr(self, e: ast.Expression, path: str) -> ast.Expression:
        if isinstance(e, ast.BaseRelation):
            return e
        if isinstance(e, ast.Projection):
            return ast.Projection(e.items, self.expr(e.source, path + "/src"))
        if isinstance(e, ast.Selection):
            cond = self.cond_true(e.cond, path + "/cond")
            return ast.Selection(cond, self.expr(e.source, path + "/src"))
        if isinstance(e, ast.Product):
            return ast.Product(self.expr(e.left, path + "/l"), self.expr(e.right, path + "/r"))
        if isinstance(e, ast.SetOp):
            return ast.SetOp(e.op, self.expr(e.left, path + "/l"), self.expr(e.right, path + "/r"))
        if isinstance(e, ast.Distinct):
            return ast.Distinct(self.expr(e.source, path + "/src"))
        if isinstance(e, ast.Group):
            return ast.Group(e.names, e.aggs, self.expr(e.source, path + "/src"))
        if isinstance(e, ast.Mu):
            seed = self.expr(e.seed, path + "/seed")
            saved = self.catalog.get(e.rel)
            self.catalog[e.rel] = _labels_of(seed, self.catalog)
            try:
                step = self.expr(e.step, path + "/step")
            finally:
                if saved is None:
                    del self.catalog[e.rel]
                else:
                    self.catalog[e.rel] = saved
            return ast.Mu(e.rel, e.distinct, seed, step)
        raise NullvlError(f"not an expression: {e!r}")

    # -- condition hooks ------------------------------------------------------

    def cond_true(self, c: ast.Condition, path: str) -> ast.Condition:
        raise NotImplementedError

    def cond_false(self, c: ast.Condition, path: str) -> ast.Condition:
        raise NotImplementedError


class _TwoValuedSourceTranslator(_Translator):
    """Composite-condition rules shared by every translator whose source
    semantics is two-valued (conflating, syntactic, grounded)."""

    def cond_true(self, c, path):
        if isinstance(c, ast.And):
            return ast.And(self.cond_true(c.left, path + ".l"), self.cond_true(c.right, path + ".r"))
        if isinstance(c, ast.Or):
            return ast.Or(self.cond_true(c.left, path + ".l"), self.cond_true(c.right, path + ".r"))
        if isinstance(c, ast.Not):
            self._note(path, "true-of-negation")
            return self.cond_false(c.cond, path + ".n")
        return self.atom_true(c, path)

    def cond_false(self, c, path):
        if isinstance(c, ast.And):
            return ast.Or(self.cond_false(c.left, path + ".l"), self.cond_false(c.right, path + ".r"))
        if isinstance(c, ast.Or):
            return ast.And(self.cond_false(c.left, path + ".l"), self.cond_false(c.right, path + ".r"))
        if isinstance(c, ast.Not):
            self._note(path, "false-of-negation")
            return self.cond_true(c.cond, path + ".n")
        return self.atom_false(c, path)

    def atom_true(self, c, path):
        raise NotImplementedError

    def atom_false(self, c, path):
        raise NotImplementedError


class _From2VL(_TwoValuedSourceTranslator):
    """Conflating two-valued conditions into three-valued equivalents."""

    name = "2vl-to-3vl"

    def atom_true(self, c, path):
        if isinstance(c, (ast.CTrue, ast.CFalse, ast.IsNull)):
            return c
        if isinstance(c, ast.Compare):
            if len(c.lhs) == 1:
                self._note(path, "compare-kept")
                return c
            return self.cond_true(ast.expand_tuple_comparison(c.lhs, c.op, c.rhs), path)
        if isinstance(c, ast.In):
            return ast.In(c.items, self.expr(c.query, path + "/q"))
        if isinstance(c, ast.Empty):
            return ast.Empty(self.expr(c.query, path + "/q"))
        if isinstance(c, ast.Quant):
            return ast.Quant(c.items, c.op, c.quant, self.expr(c.query, path + "/q"))
        raise NullvlError(f"not a condition: {c!r}")

    def atom_false(self, c, path):
        if isinstance(c, ast.CTrue):
            return ast.CFalse()
        if isinstance(c, ast.CFalse):
            return ast.CTrue()
        if isinstance(c, ast.IsNull):
            return ast.Not(c)
        if isinstance(c, ast.Compare):
            if len(c.lhs) == 1:
                self._note(path, "compare-null-guarded")
                l, r = c.lhs[0], c.rhs[0]
                return ast.or_all([ast.IsNull(l), ast.IsNull(r), ast.Not(c)])
            return self.cond_false(ast.expand_tuple_comparison(c.lhs, c.op, c.rhs), path)
        if isinstance(c, ast.In):
            # keep the membership shape, filtering null records out of the
            # subquery so the negated membership cannot come out unknown
            self._note(path, "in-null-filtered")
            query, labels = self.subquery(c.query, path + "/q", self._avoid(c.items))
            null_free = ast.and_all([_not_null(ast.NameRef(n)) for n in labels])
            kept = ast.Not(ast.In(c.items, ast.Selection(null_free, query)))
            return ast.or_all([ast.IsNull(t) for t in c.items] + [kept])
        if isinstance(c, ast.Empty):
            return ast.Not(ast.Empty(self.expr(c.query, path + "/q")))
        if isinstance(c, ast.Quant):
            query, labels = self.subquery(c.query, path + "/q", self._avoid(c.items))
            theta = self.cond_false(
                ast.Compare(c.items, c.op, _cols(labels)), path + ".cmp"
            )
            if c.quant == "any":
                self._note(path, "any-false-emptiness")
                return ast.Empty(ast.Selection(ast.Not(theta), query))
            self._note(path, "all-false-witness")
            return ast.Not(ast.Empty(ast.Selection(theta, query)))
        raise NullvlError(f"not a condition: {c!r}")


class _FromGrounded(_TwoValuedSourceTranslator):
    """Grounded two-valued conditions into three-valued equivalents.

    Atomic comparisons become one guarded disjunct per null pattern; the
    guard asserts nullness exactly on the pattern so the disjunction is
    two-valued whatever the grounding templates contain.
    """

    name = "grounded-to-3vl"

    def __init__(self, schema_or_catalog, grounding: Grounding):
        super().__init__(schema_or_catalog)
        self.grounding = grounding

    def _compare(self, c: ast.Compare, negate: bool, path: str) -> ast.Condition:
        if len(c.lhs) > 1:
            expanded = ast.expand_tuple_comparison(c.lhs, c.op, c.rhs)
            return self.cond_false(expanded, path) if negate else self.cond_true(expanded, path)
        self._note(path, "compare-pattern-cases")
        return grounded_comparison_condition(
            self.grounding, c.op, c.lhs[0], c.rhs[0], negate
        )

    def atom_true(self, c, path):
        if isinstance(c, (ast.CTrue, ast.CFalse, ast.IsNull)):
            return c
        if isinstance(c, ast.Compare):
            return self._compare(c, False, path)
        if isinstance(c, ast.In):
            return self.atom_true(ast.Quant(c.items, "=", "any", c.query), path)
        if isinstance(c, ast.Empty):
            return ast.Empty(self.expr(c.query, path + "/q"))
        if isinstance(c, ast.Quant):
            query, labels = self.subquery(c.query, path + "/q", self._avoid(c.items))
            theta = self.cond_true(ast.Compare(c.items, c.op, _cols(labels)), path + ".cmp")
            if c.quant == "any":
                return ast.Not(ast.Empty(ast.Selection(theta, query)))
            return ast.Empty(ast.Selection(ast.Not(theta), query))
        raise NullvlError(f"not a condition: {c!r}")

    def atom_false(self, c, path):
        if isinstance(c, ast.CTrue):
            return ast.CFalse()
        if isinstance(c, ast.CFalse):
            return ast.CTrue()
        if isinstance(c, ast.IsNull):
            return ast.Not(c)
        if isinstance(c, ast.Compare):
            return self._compare(c, True, path)
        if isinstance(c, ast.In):
            return self.atom_false(ast.Quant(c.items, "=", "any", c.query), path)
        if isinstance(c, ast.Empty):
            return ast.Not(ast.Empty(self.expr(c.query, path + "/q")))
        if isinstance(c, ast.Quant):
            query, labels = self.subquery(c.query, path + "/q", self._avoid(c.items))
            theta = self.cond_true(ast.Compare(c.items, c.op, _cols(labels)), path + ".cmp")
            if c.quant == "any":
                return ast.Empty(ast.Selection(theta, query))
            return ast.Not(ast.Empty(ast.Selection(ast.Not(theta), query)))
        raise NullvlError(f"not a condition: {c!r}")


class _From3VL(_TwoValuedSourceTranslator):
    """Three-valued conditions into conflating two-valued equivalents."""

    name = "3vl-to-2vl"

    def atom_true(self, c, path):
        if isinstance(c, (ast.CTrue, ast.CFalse, ast.IsNull)):
            return c
        if isinstance(c, ast.Compare):
            if len(c.lhs) == 1:
                self._note(path, "compare-kept")
                return c
            return self.cond_true(ast.expand_tuple_comparison(c.lhs, c.op, c.rhs), path)
        if isinstance(c, ast.In):
            return ast.In(c.items, self.expr(c.query, path + "/q"))
        if isinstance(c, ast.Empty):
            return ast.Empty(self.expr(c.query, path + "/q"))
        if isinstance(c, ast.Quant):
            return ast.Quant(c.items, c.op, c.quant, self.expr(c.query, path + "/q"))
        raise NullvlError(f"not a condition: {c!r}")

    def atom_false(self, c, path):
        if isinstance(c, (ast.CTrue, ast.CFalse, ast.IsNull)):
            return ast.Not(c)
        if isinstance(c, ast.Compare):
            if len(c.lhs) == 1:
                self._note(path, "compare-not-null-guarded")
                l, r = c.lhs[0], c.rhs[0]
                return ast.and_all([_not_null(l), _not_null(r), ast.Not(c)])
            return self.cond_false(ast.expand_tuple_comparison(c.lhs, c.op, c.rhs), path)
        if isinstance(c, ast.In):
            return self.atom_false(ast.Quant(c.items, "=", "any", c.query), path)
        if isinstance(c, ast.Empty):
            return ast.Not(ast.Empty(self.expr(c.query, path + "/q")))
        if isinstance(c, ast.Quant):
            query, labels = self.subquery(c.query, path + "/q", self._avoid(c.items))
            theta = self.cond_false(ast.Compare(c.items, c.op, _cols(labels)), path + ".cmp")
            if c.quant == "any":
                self._note(path, "any-false-emptiness")
                return ast.Empty(ast.Selection(ast.Not(theta), query))
            self._note(path, "all-false-witness")
            return ast.Not(ast.Empty(ast.Selection(theta, query)))
        raise NullvlError(f"not a condition: {c!r}")


class _From3VLToGrounded(_From3VL):
    """Three-valued conditions into grounded two-valued equivalents.

    Compared with the conflating target, every comparison needs explicit
    non-null guards (a grounding may make null comparisons true), and the
    quantified conditions go through selection emptiness on both polarities
    rather than keeping their shape.  The guards pin every comparison to the
    no-nulls case, where all groundings agree with the standard comparison,
    so one output is valid under every grounded two-valued target.
    """

    name = "3vl-to-grounded"

    def _guarded(self, c: ast.Compare, negate: bool) -> ast.Condition:
        l, r = c.lhs[0], c.rhs[0]
        core: ast.Condition = ast.Not(c) if negate else c
        return ast.and_all([_not_null(l), _not_null(r), core])

    def atom_true(self, c, path):
        if isinstance(c, ast.Compare):
            if len(c.lhs) > 1:
                return self.cond_true(ast.expand_tuple_comparison(c.lhs, c.op, c.rhs), path)
            self._note(path, "compare-not-null-guarded")
            return self._guarded(c, negate=False)
        if isinstance(c, ast.In):
            return self.atom_true(ast.Quant(c.items, "=", "any", c.query), path)
        if isinstance(c, ast.Quant):
            query, labels = self.subquery(c.query, path + "/q", self._avoid(c.items))
            theta = self.cond_true(ast.Compare(c.items, c.op, _cols(labels)), path + ".cmp")
            if c.quant == "any":
                return ast.Not(ast.Empty(ast.Selection(theta, query)))
            return ast.Empty(ast.Selection(ast.Not(theta), query))
        return super().atom_true(c, path)

    def atom_false(self, c, path):
        if isinstance(c, ast.Compare):
            if len(c.lhs) > 1:
                return self.cond_false(ast.expand_tuple_comparison(c.lhs, c.op, c.rhs), path)
            self._note(path, "compare-not-null-guarded")
            return self._guarded(c, negate=True)
        if isinstance(c, ast.In):
            return self.atom_false(ast.Quant(c.items, "=", "any", c.query), path)
        if isinstance(c, ast.Quant):
            query, labels = self.subquery(c.query, path + "/q", self._avoid(c.items))
            theta = self.cond_false(ast.Compare(c.items, c.op, _cols(labels)), path + ".cmp")
            if c.quant == "any":
                return ast.Empty(ast.Selection(ast.Not(theta), query))
            return ast.Not(ast.Empty(ast.Selection(theta, query)))
        return super().atom_false(c, path)


class _FromMVL(_Translator):
    """Many-valued conditions into three-valued equivalents.

    For each truth value the translated condition is true exactly when the
    source condition takes that value.  Quantified conditions cannot just
    recurse (the fold size depends on the data), so they count, per truth
    value, how many subquery records compare to it, reduce each count
    through its eventual periodicity with counting subqueries and modular
    arithmetic, and enumerate the finitely many reduced count profiles whose
    fold equals the wanted value.
    """

    name = "mvl-to-3vl"

    def __init__(self, schema_or_catalog, kernel: LogicKernel):
        super().__init__(schema_or_catalog)
        self.kernel = kernel

    def cond_true(self, c, path):
        return self.cond_value(c, self.kernel.true, path)

    def cond_value(self, c: ast.Condition, tau, path: str) -> ast.Condition:
        kernel = self.kernel
        if isinstance(c, ast.CTrue):
            return ast.CTrue() if tau == kernel.true else ast.CFalse()
        if isinstance(c, ast.CFalse):
            return ast.CTrue() if tau == kernel.false else ast.CFalse()
        if isinstance(c, ast.IsNull):
            if tau == kernel.true:
                return c
            if tau == kernel.false:
                return ast.Not(c)
            return ast.CFalse()
        if isinstance(c, ast.Compare):
            if len(c.lhs) > 1:
                return self.cond_value(
                    ast.expand_tuple_comparison(c.lhs, c.op, c.rhs), tau, path
                )
            self._note(path, f"compare-template:{tau}")
            return kernel.template(c.op, tau)(c.lhs[0], c.rhs[0])
        if isinstance(c, ast.Empty):
            query = self.expr(c.query, path + "/q")
            if tau == kernel.true:
                return ast.Empty(query)
            if tau == kernel.false:
                return ast.Not(ast.Empty(query))
            return ast.CFalse()
        if isinstance(c, ast.In):
            return self._counted(c.items, "=", c.query, OR, tau, path)
        if isinstance(c, ast.Quant):
            conn = OR if c.quant == "any" else AND
            return self._counted(c.items, c.op, c.query, conn, tau, path)
        if isinstance(c, (ast.And, ast.Or)):
            table = kernel.and_table if isinstance(c, ast.And) else kernel.or_table
            disjuncts = []
            for t1, t2 in iter_product(kernel.values, repeat=2):
                if table[(t1, t2)] != tau:
                    continue
                disjuncts.append(
                    ast.And(
                        self.cond_value(c.left, t1, path + ".l"),
                        self.cond_value(c.right, t2, path + ".r"),
                    )
                )
            self._note(path, f"connective-cases:{tau}")
            return ast.or_all(disjuncts)
        if isinstance(c, ast.Not):
            disjuncts = [
                self.cond_value(c.cond, t1, path + ".n")
                for t1 in kernel.values
                if kernel.not_table[t1] == tau
            ]
            self._note(path, f"negation-cases:{tau}")
            return ast.or_all(disjuncts)
        raise NullvlError(f"not a condition: {c!r}")

    def _counted(self, items, op, query, conn, tau, path) -> ast.Condition:
        kernel = self.kernel
        avoid = self._avoid(items) | {COUNT_LABEL, REDUCED_LABEL}
        base, labels = self.subquery(query, path + "/q", avoid)

        selections = []
        for value in kernel.values:
            per_row = self.cond_value(
                ast.Compare(items, op, _cols(labels)), value, path + f".cnt[{value}]"
            )
            selections.append(ast.Selection(per_row, base))

        periods = [kernel.periodicity(v, conn) for v in kernel.values]
        profiles = []
        for profile in iter_product(*(range(p) for (_l, p) in periods)):
            if all(m == 0 for m in profile):
                value = kernel.false if conn == OR else kernel.true
            else:
                value = fold_counted(kernel, conn, dict(zip(kernel.values, profile)))
            if value == tau:
                profiles.append(profile)

        self._note(path, f"count-profiles:{tau}:{len(profiles)}")
        disjuncts = []
        for profile in profiles:
            conjs = [
                self._count_matches(selections[i], m, periods[i])
                for i, m in enumerate(profile)
            ]
            disjuncts.append(ast.and_all(conjs))
        return ast.or_all(disjuncts)

    def _count_matches(self, selected: ast.Selection, m: int, lead_period) -> ast.Condition:
        lead, period = lead_period
        if m == 0:
            return ast.Empty(selected)
        counted = ast.Group(
            (), (ast.AggItem("count_star", None, COUNT_LABEL),), selected
        )
        if m < lead:
            return ast.Quant((ast.num(m),), "=", "any", counted)
        modulus = period - lead
        reduced = ast.Projection(
            (
                ast.ProjItem(
                    ast.FnApply(
                        "mod",
                        (
                            ast.FnApply("sub", (ast.NameRef(COUNT_LABEL), ast.num(lead))),
                            ast.num(modulus),
                        ),
                    ),
                    REDUCED_LABEL,
                ),
            ),
            ast.Selection(
                ast.Compare((ast.NameRef(COUNT_LABEL),), ">=", (ast.num(lead),)), counted
            ),
        )
        return ast.Quant((ast.num(m - lead),), "=", "any", reduced)


# ---------------------------------------------------------------------------
# Public entry points


def tr_to_3vl(expr: ast.Expression, schema_or_catalog) -> TranslationResult:
    """Rewrite a query written under the conflating two-valued semantics so it
    evaluates identically under the three-valued semantics."""
    return _From2VL(schema_or_catalog).run(expr)


def tr_cond_true(cond: ast.Condition, schema_or_catalog) -> ast.Condition:
    return _From2VL(schema_or_catalog).cond_true(cond, "")


def tr_cond_false(cond: ast.Condition, schema_or_catalog) -> ast.Condition:
    return _From2VL(schema_or_catalog).cond_false(cond, "")


def tr_from_3vl(expr: ast.Expression, schema_or_catalog) -> TranslationResult:
    """Rewrite a query written under the three-valued semantics so it
    evaluates identically under the conflating two-valued semantics."""
    return _From3VL(schema_or_catalog).run(expr)


def tr_grounded_to_3vl(
    expr: ast.Expression, schema_or_catalog, grounding: Grounding
) -> TranslationResult:
    return _FromGrounded(schema_or_catalog, grounding).run(expr)


def tr_3vl_to_grounded(expr: ast.Expression, schema_or_catalog) -> TranslationResult:
    return _From3VLToGrounded(schema_or_catalog).run(expr)


def tr_mvl_to_3vl(
    expr: ast.Expression, schema_or_catalog, kernel: LogicKernel
) -> TranslationResult:
    return _FromMVL(schema_or_catalog, kernel).run(expr)


# ---------------------------------------------------------------------------
# The capture oracle


@dataclass
class Verdict:
    status: str  # "equal" | "not-equal" | "inconclusive"
    left: Optional[Bag]
    right: Optional[Bag]
    size_ratio: Optional[Fraction]
    detail: str = ""

    @property
    def equal(self) -> bool:
        return self.status == "equal"


def check_capture(
    expr: ast.Expression,
    db: Database,
    source_cfg: EvalConfig,
    target_cfg: EvalConfig,
    translation: TranslationResult,
) -> Verdict:
    """Evaluate both sides of a capture equation and compare the bags."""
    try:
        left = evaluate(expr, db, cfg=source_cfg)
        right = evaluate(translation.output, db, cfg=target_cfg)
    except RecursionLimitError as exc:
        return Verdict("inconclusive", None, None, translation.size_ratio, str(exc))
    except EvalError as exc:
        return Verdict("inconclusive", None, None, translation.size_ratio, str(exc))
    status = "equal" if left == right else "not-equal"
    return Verdict(status, left, right, translation.size_ratio)
