"""Truth-value systems as pluggable kernels.

A kernel bundles a finite truth-value set, conjunction/disjunction/negation
tables (validated associative and commutative, Boolean on {t, f}), the rule
for atomic comparisons on possibly-null arguments, and per-(comparison,
truth value) condition templates witnessing that every outcome is statable
as an ordinary condition evaluated under the three-valued semantics.

The same module houses groundings (per-comparison decisions for each pattern
of null argument positions) and the eventual-periodicity machinery used to
fold connectives over counted multisets.
"""
from __future__ import annotations

import itertools
import json
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional

from . import ast
from .errors import KernelError
from .funcs import apply_function
from .values import NUM, Value, is_null

TruthValue = str

AND = "and"
OR = "or"


def standard_compare(op: str, a, b) -> bool:
    """The ordinary comparison on two non-null values of matching type."""
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if not isinstance(a, Fraction) or not isinstance(b, Fraction):
        raise KernelError(f"order comparison {op} on non-numerical values")
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    raise KernelError(f"unknown comparison {op!r}")


TemplateFn = Callable[[ast.Term, ast.Term], ast.Condition]


class LogicKernel:
    """A validated finite logic with comparison semantics."""

    def __init__(
        self,
        name: str,
        values: tuple[TruthValue, ...],
        true: TruthValue,
        false: TruthValue,
        and_table: Mapping[tuple[TruthValue, TruthValue], TruthValue],
        or_table: Mapping[tuple[TruthValue, TruthValue], TruthValue],
        not_table: Mapping[TruthValue, TruthValue],
        compare: Callable[[str, Value, Value], TruthValue],
        expressibility: Optional[Mapping[tuple[str, TruthValue], TemplateFn]] = None,
    ):
        self.name = name
        self.values = tuple(values)
        self.true = true
        self.false = false
        self.and_table = dict(and_table)
        self.or_table = dict(or_table)
        self.not_table = dict(not_table)
        self.compare = compare
        self.expressibility = dict(expressibility or {})
        self._periods: dict[tuple[TruthValue, str], tuple[int, int]] = {}
        validate_kernel(self)

    def table(self, conn: str) -> dict:
        return self.and_table if conn == AND else self.or_table

    def conj(self, a: TruthValue, b: TruthValue) -> TruthValue:
        return self.and_table[(a, b)]

    def disj(self, a: TruthValue, b: TruthValue) -> TruthValue:
        return self.or_table[(a, b)]

    def neg(self, a: TruthValue) -> TruthValue:
        return self.not_table[a]

    def fold(self, conn: str, items: Iterable[TruthValue]) -> TruthValue:
        """Fold a sequence under the connective; empty folds are the SQL
        conventions (empty disjunction false, empty conjunction true)."""
        table = self.table(conn)
        acc = None
        for v in items:
            acc = v if acc is None else table[(acc, v)]
        if acc is None:
            return self.false if conn == OR else self.true
        return acc

    def template(self, op: str, value: TruthValue) -> TemplateFn:
        try:
            return self.expressibility[(op, value)]
        except KeyError:
            raise KernelError(
                f"kernel {self.name}: no condition template for ({op}, {value})"
            )

    def periodicity(self, value: TruthValue, conn: str) -> tuple[int, int]:
        key = (value, conn)
        if key not in self._periods:
            self._periods[key] = periodicity(self, value, conn)
        return self._periods[key]

    def __repr__(self):
        return f"LogicKernel({self.name!r}, values={self.values})"


def validate_kernel(kernel: LogicKernel):
    """Exhaustive law check; raises KernelError with a witness on failure."""
    vals = kernel.values
    if kernel.true == kernel.false:
        raise KernelError("t and f must be distinct")
    for v in (kernel.true, kernel.false):
        if v not in vals:
            raise KernelError(f"designated value {v!r} missing from value set")
    if len(set(vals)) != len(vals):
        raise KernelError("duplicate truth values")
    for conn, table in ((AND, kernel.and_table), (OR, kernel.or_table)):
        for a, b in itertools.product(vals, repeat=2):
            if (a, b) not in table:
                raise KernelError(f"{conn} table missing cell ({a},{b})")
            if table[(a, b)] not in vals:
                raise KernelError(f"{conn} table leaves the value set at ({a},{b})")
        for a, b in itertools.product(vals, repeat=2):
            if table[(a, b)] != table[(b, a)]:
                raise KernelError(f"{conn} not commutative", witness=(a, b))
        for a, b, c in itertools.product(vals, repeat=3):
            if table[(table[(a, b)], c)] != table[(a, table[(b, c)])]:
                raise KernelError(f"{conn} not associative", witness=(a, b, c))
    for a in vals:
        if a not in kernel.not_table or kernel.not_table[a] not in vals:
            raise KernelError(f"negation table broken at {a!r}")
    t, f = kernel.true, kernel.false
    boolean_and = {(t, t): t, (t, f): f, (f, t): f, (f, f): f}
    boolean_or = {(t, t): t, (t, f): t, (f, t): t, (f, f): f}
    for (a, b), want in boolean_and.items():
        if kernel.and_table[(a, b)] != want:
            raise KernelError("and table not Boolean on {t,f}", witness=(a, b))
    for (a, b), want in boolean_or.items():
        if kernel.or_table[(a, b)] != want:
            raise KernelError("or table not Boolean on {t,f}", witness=(a, b))
    if kernel.not_table[t] != f or kernel.not_table[f] != t:
        raise KernelError("negation not Boolean on {t,f}")
    _check_non_null_comparisons(kernel)


_NUM_GRID = tuple(Fraction(x) for x in (-1, 0, 1, 2))
_ORD_GRID = ("a", "b")


def _check_non_null_comparisons(kernel: LogicKernel):
    for op in ast.COMPARISONS:
        pairs = itertools.product(_NUM_GRID, repeat=2)
        for a, b in pairs:
            got = kernel.compare(op, a, b)
            want = kernel.true if standard_compare(op, a, b) else kernel.false
            if got != want:
                raise KernelError(
                    f"kernel {kernel.name}: comparison {op} disagrees with the "
                    f"standard one on non-null arguments",
                    witness=(op, a, b, got),
                )
    for op in ("=", "!="):
        for a, b in itertools.product(_ORD_GRID, repeat=2):
            got = kernel.compare(op, a, b)
            want = kernel.true if standard_compare(op, a, b) else kernel.false
            if got != want:
                raise KernelError(
                    f"kernel {kernel.name}: comparison {op} disagrees on text atoms",
                    witness=(op, a, b, got),
                )


# ---------------------------------------------------------------------------
# Built-in kernels


def _bool_tables(t: str, f: str):
    and_t = {(t, t): t, (t, f): f, (f, t): f, (f, f): f}
    or_t = {(t, t): t, (t, f): t, (f, t): t, (f, f): f}
    not_t = {t: f, f: t}
    return and_t, or_t, not_t


def _kleene_tables():
    order = {"f": 0, "u": 1, "t": 2}
    rev = {v: k for k, v in order.items()}
    vals = ("t", "f", "u")
    and_t = {(a, b): rev[min(order[a], order[b])] for a in vals for b in vals}
    or_t = {(a, b): rev[max(order[a], order[b])] for a in vals for b in vals}
    not_t = {"t": "f", "f": "t", "u": "u"}
    return and_t, or_t, not_t


def _cmp(a: ast.Term, op: str, b: ast.Term) -> ast.Condition:
    return ast.Compare((a,), op, (b,))


def _templates_2vl(op: str):
    return {
        "t": lambda a, b, op=op: _cmp(a, op, b),
        "f": lambda a, b, op=op: ast.or_all(
            [ast.IsNull(a), ast.IsNull(b), ast.Not(_cmp(a, op, b))]
        ),
    }


def kernel_3vl() -> LogicKernel:
    """Three truth values with the standard truth tables; a comparison with a
    null argument is unknown, isnull is always two-valued."""
    and_t, or_t, not_t = _kleene_tables()

    def compare(op: str, a: Value, b: Value) -> TruthValue:
        if is_null(a) or is_null(b):
            return "u"
        return "t" if standard_compare(op, a, b) else "f"

    expr: dict[tuple[str, str], TemplateFn] = {}
    for op in ast.COMPARISONS:
        expr[(op, "t")] = lambda a, b, op=op: _cmp(a, op, b)
        expr[(op, "f")] = lambda a, b, op=op: ast.Not(_cmp(a, op, b))
        expr[(op, "u")] = lambda a, b: ast.Or(ast.IsNull(a), ast.IsNull(b))
    return LogicKernel("3vl", ("t", "f", "u"), "t", "f", and_t, or_t, not_t, compare, expr)


def kernel_2vl() -> LogicKernel:
    """Two truth values; any comparison with a null argument is false."""
    and_t, or_t, not_t = _bool_tables("t", "f")

    def compare(op: str, a: Value, b: Value) -> TruthValue:
        if is_null(a) or is_null(b):
            return "f"
        return "t" if standard_compare(op, a, b) else "f"

    expr: dict[tuple[str, str], TemplateFn] = {}
    for op in ast.COMPARISONS:
        expr.update({(op, v): fn for v, fn in _templates_2vl(op).items()})
    return LogicKernel("2vl", ("t", "f"), "t", "f", and_t, or_t, not_t, compare, expr)


def kernel_2vl_syntactic() -> LogicKernel:
    """Like the conflating two-valued kernel except NULL = NULL is true and,
    by negation, NULL != NULL is false."""
    and_t, or_t, not_t = _bool_tables("t", "f")

    def compare(op: str, a: Value, b: Value) -> TruthValue:
        if is_null(a) and is_null(b):
            if op == "=":
                return "t"
            return "f"
        if is_null(a) or is_null(b):
            return "f"
        return "t" if standard_compare(op, a, b) else "f"

    expr: dict[tuple[str, str], TemplateFn] = {}
    for op in ast.COMPARISONS:
        expr.update({(op, v): fn for v, fn in _templates_2vl(op).items()})
    both_null = lambda a, b: ast.And(ast.IsNull(a), ast.IsNull(b))
    expr[("=", "t")] = lambda a, b: ast.Or(_cmp(a, "=", b), both_null(a, b))
    expr[("=", "f")] = lambda a, b: ast.And(
        ast.Not(both_null(a, b)),
        ast.or_all([ast.IsNull(a), ast.IsNull(b), ast.Not(_cmp(a, "=", b))]),
    )
    expr[("!=", "f")] = lambda a, b: ast.or_all(
        [ast.IsNull(a), ast.IsNull(b), ast.Not(_cmp(a, "!=", b))]
    )
    return LogicKernel(
        "2vl-syn", ("t", "f"), "t", "f", and_t, or_t, not_t, compare, expr
    )


_4VL_AND = {}
_4VL_OR = {}
# knowledge-style completion around: true is neutral, false absorbs for
# conjunction (dually for disjunction); combining two varying values loses
# the information, hence u
for _a in ("t", "f", "u", "s"):
    for _b in ("t", "f", "u", "s"):
        if _a == "f" or _b == "f":
            _4VL_AND[(_a, _b)] = "f"
        elif _a == "t":
            _4VL_AND[(_a, _b)] = _b
        elif _b == "t":
            _4VL_AND[(_a, _b)] = _a
        else:
            _4VL_AND[(_a, _b)] = "u"
        if _a == "t" or _b == "t":
            _4VL_OR[(_a, _b)] = "t"
        elif _a == "f":
            _4VL_OR[(_a, _b)] = _b
        elif _b == "f":
            _4VL_OR[(_a, _b)] = _a
        else:
            _4VL_OR[(_a, _b)] = "u"


def kernel_4vl_example() -> LogicKernel:
    """Four values: t, f, u and s ("sometimes holds").  Comparisons with a
    null argument yield s; conjoining or disjoining two s values cannot be
    pinned down and gives u."""
    not_t = {"t": "f", "f": "t", "u": "u", "s": "s"}

    def compare(op: str, a: Value, b: Value) -> TruthValue:
        if is_null(a) or is_null(b):
            return "s"
        return "t" if standard_compare(op, a, b) else "f"

    expr: dict[tuple[str, str], TemplateFn] = {}
    for op in ast.COMPARISONS:
        expr[(op, "t")] = lambda a, b, op=op: ast.and_all(
            [ast.Not(ast.IsNull(a)), ast.Not(ast.IsNull(b)), _cmp(a, op, b)]
        )
        expr[(op, "f")] = lambda a, b, op=op: ast.and_all(
            [ast.Not(ast.IsNull(a)), ast.Not(ast.IsNull(b)), ast.Not(_cmp(a, op, b))]
        )
        expr[(op, "s")] = lambda a, b: ast.Or(ast.IsNull(a), ast.IsNull(b))
        expr[(op, "u")] = lambda a, b: ast.CFalse()
    return LogicKernel(
        "4vl", ("t", "f", "u", "s"), "t", "f", dict(_4VL_AND), dict(_4VL_OR), not_t, compare, expr
    )


def make_mvl_kernel(
    name: str,
    values: tuple[TruthValue, ...],
    true: TruthValue,
    false: TruthValue,
    and_table,
    or_table,
    not_table,
    compare,
    expressibility=None,
) -> LogicKernel:
    """Build and validate a custom many-valued kernel.

    Raises KernelError naming the broken law and a witnessing tuple when the
    tables are not associative/commutative or not Boolean on {t, f}.
    """
    return LogicKernel(
        name, values, true, false, and_table, or_table, not_table, compare, expressibility
    )


# ---------------------------------------------------------------------------
# Groundings


_PATTERNS = (frozenset({1}), frozenset({2}), frozenset({1, 2}))


class Grounding:
    """Per-comparison truth decisions for each non-empty null pattern.

    ``templates`` maps (comparison, pattern) to a condition over two term
    holes; the template may only mention the holes at non-null positions.
    A missing entry is the empty grounding (the comparison is false there).
    """

    def __init__(self, name: str, templates: Mapping[tuple[str, frozenset], ast.Condition]):
        self.name = name
        self.templates: dict[tuple[str, frozenset], ast.Condition] = {}
        for (op, pattern), cond in templates.items():
            pattern = frozenset(pattern)
            if op not in ast.COMPARISONS:
                raise KernelError(f"grounding {name}: unknown comparison {op!r}")
            if pattern not in _PATTERNS:
                raise KernelError(f"grounding {name}: bad null pattern {sorted(pattern)}")
            _validate_template(cond, pattern, f"grounding {name} ({op}, {sorted(pattern)})")
            self.templates[(op, pattern)] = cond

    def template(self, op: str, pattern: frozenset) -> Optional[ast.Condition]:
        return self.templates.get((op, frozenset(pattern)))

    def decide(self, op: str, left: Value, right: Value) -> bool:
        pattern = frozenset(
            i for i, v in ((1, left), (2, right)) if is_null(v)
        )
        if not pattern:
            return standard_compare(op, left, right)
        cond = self.templates.get((op, pattern))
        if cond is None:
            return False
        return eval_template(cond, (left, right))


def empty_grounding() -> Grounding:
    return Grounding("empty", {})


def syntactic_equality_grounding() -> Grounding:
    return Grounding("syntactic-eq", {("=", frozenset({1, 2})): ast.CTrue()})


def nonnegative_leq_grounding() -> Grounding:
    """NULL <= x holds for x >= 0, x <= NULL holds for x < 0, and
    NULL <= NULL holds."""
    return Grounding(
        "leq-sign",
        {
            ("<=", frozenset({1})): _cmp(ast.ArgHole(2), ">=", ast.num(0)),
            ("<=", frozenset({2})): _cmp(ast.ArgHole(1), "<", ast.num(0)),
            ("<=", frozenset({1, 2})): ast.CTrue(),
        },
    )


def _validate_template(cond: ast.Condition, null_positions: frozenset, what: str):
    holes = _collect_holes(cond, what)
    bad = holes & set(null_positions)
    if bad:
        raise KernelError(f"{what}: template mentions null position(s) {sorted(bad)}")
    if holes - {1, 2}:
        raise KernelError(f"{what}: template holes must be 1 or 2")


def _collect_holes(cond: ast.Condition, what: str) -> set[int]:
    out: set[int] = set()

    def walk_term(t: ast.Term):
        if isinstance(t, ast.ArgHole):
            out.add(t.index)
        elif isinstance(t, ast.FnApply):
            for a in t.args:
                walk_term(a)
        elif isinstance(t, ast.NameRef):
            raise KernelError(f"{what}: free name {t.name!r} in template")

    def walk(c: ast.Condition):
        if isinstance(c, (ast.In, ast.Empty, ast.Quant)):
            raise KernelError(f"{what}: subqueries are not allowed in templates")
        for t in ast.condition_terms(c):
            walk_term(t)
        for sub in ast.condition_children(c):
            walk(sub)

    walk(cond)
    return out


def substitute_holes_term(t: ast.Term, args: tuple[ast.Term, ...]) -> ast.Term:
    if isinstance(t, ast.ArgHole):
        return args[t.index - 1]
    if isinstance(t, ast.FnApply):
        return ast.FnApply(t.fn, tuple(substitute_holes_term(a, args) for a in t.args))
    return t


def substitute_holes(cond: ast.Condition, args: tuple[ast.Term, ...]) -> ast.Condition:
    if isinstance(cond, (ast.CTrue, ast.CFalse)):
        return cond
    if isinstance(cond, ast.IsNull):
        return ast.IsNull(substitute_holes_term(cond.term, args))
    if isinstance(cond, ast.Compare):
        return ast.Compare(
            tuple(substitute_holes_term(t, args) for t in cond.lhs),
            cond.op,
            tuple(substitute_holes_term(t, args) for t in cond.rhs),
        )
    if isinstance(cond, ast.And):
        return ast.And(substitute_holes(cond.left, args), substitute_holes(cond.right, args))
    if isinstance(cond, ast.Or):
        return ast.Or(substitute_holes(cond.left, args), substitute_holes(cond.right, args))
    if isinstance(cond, ast.Not):
        return ast.Not(substitute_holes(cond.cond, args))
    if isinstance(cond, (ast.In, ast.Empty, ast.Quant)):
        raise KernelError("subqueries are not allowed in templates")
    raise KernelError(f"not a template condition: {cond!r}")


def eval_template(cond: ast.Condition, values: tuple[Value, Value]) -> bool:
    """Evaluate a subquery-free template on concrete argument values.

    Connectives follow the three-valued tables; the result must come out
    two-valued, otherwise the template is invalid.
    """
    v = _eval_template_cond(cond, values)
    if v == "u":
        raise KernelError("template evaluated to unknown; it must be two-valued")
    return v == "t"


def _eval_template_term(t: ast.Term, values) -> Value:
    if isinstance(t, ast.ArgHole):
        return values[t.index - 1]
    if isinstance(t, ast.NumConst):
        return t.value
    if isinstance(t, ast.OrdConst):
        return t.value
    if isinstance(t, ast.NullConst):
        return None
    if isinstance(t, ast.FnApply):
        args = [_eval_template_term(a, values) for a in t.args]
        if any(is_null(a) for a in args):
            return None
        return apply_function(t.fn, args)
    raise KernelError(f"bad template term {t!r}")


_K3_AND, _K3_OR, _K3_NOT = _kleene_tables()


def _eval_template_cond(c: ast.Condition, values) -> TruthValue:
    if isinstance(c, ast.CTrue):
        return "t"
    if isinstance(c, ast.CFalse):
        return "f"
    if isinstance(c, ast.IsNull):
        return "t" if is_null(_eval_template_term(c.term, values)) else "f"
    if isinstance(c, ast.Compare):
        expanded = ast.expand_tuple_comparison(c.lhs, c.op, c.rhs)
        if isinstance(expanded, ast.Compare):
            a = _eval_template_term(expanded.lhs[0], values)
            b = _eval_template_term(expanded.rhs[0], values)
            if is_null(a) or is_null(b):
                return "u"
            return "t" if standard_compare(expanded.op, a, b) else "f"
        return _eval_template_cond(expanded, values)
    if isinstance(c, ast.And):
        return _K3_AND[(_eval_template_cond(c.left, values), _eval_template_cond(c.right, values))]
    if isinstance(c, ast.Or):
        return _K3_OR[(_eval_template_cond(c.left, values), _eval_template_cond(c.right, values))]
    if isinstance(c, ast.Not):
        return _K3_NOT[_eval_template_cond(c.cond, values)]
    raise KernelError(f"bad template condition {c!r}")


def kernel_grounded(grounding: Grounding) -> LogicKernel:
    """Two-valued kernel whose null comparisons follow the given grounding."""
    and_t, or_t, not_t = _bool_tables("t", "f")

    def compare(op: str, a: Value, b: Value) -> TruthValue:
        return "t" if grounding.decide(op, a, b) else "f"

    expr: dict[tuple[str, str], TemplateFn] = {}
    for op in ast.COMPARISONS:
        expr[(op, "t")] = _grounded_template(grounding, op, negate=False)
        expr[(op, "f")] = _grounded_template(grounding, op, negate=True)
    return LogicKernel(
        f"grounded:{grounding.name}", ("t", "f"), "t", "f", and_t, or_t, not_t, compare, expr
    )


def null_pattern_guard(a: ast.Term, b: ast.Term, pattern: frozenset) -> ast.Condition:
    """isnull exactly at the pattern positions, not-null everywhere else."""
    conjs = []
    for idx, term in ((1, a), (2, b)):
        if idx in pattern:
            conjs.append(ast.IsNull(term))
        else:
            conjs.append(ast.Not(ast.IsNull(term)))
    return ast.and_all(conjs)


def grounded_comparison_condition(
    grounding: Grounding, op: str, a: ast.Term, b: ast.Term, negate: bool
) -> ast.Condition:
    """The grounded comparison (or its complement) as a condition that never
    evaluates to unknown: one guarded disjunct per null pattern."""
    disjuncts = []
    for pattern in (frozenset(), frozenset({1}), frozenset({2}), frozenset({1, 2})):
        guard = null_pattern_guard(a, b, pattern)
        if not pattern:
            body: ast.Condition = _cmp(a, op, b)
        else:
            template = grounding.template(op, pattern)
            if template is None:
                body = ast.CFalse()
            else:
                body = substitute_holes(template, (a, b))
        if negate:
            body = ast.Not(body)
        disjuncts.append(ast.And(guard, body))
    return ast.or_all(disjuncts)


def _grounded_template(grounding: Grounding, op: str, negate: bool) -> TemplateFn:
    def build(a: ast.Term, b: ast.Term) -> ast.Condition:
        return grounded_comparison_condition(grounding, op, a, b, negate)

    return build


# ---------------------------------------------------------------------------
# Eventual periodicity of iterated folds


def periodicity(kernel: LogicKernel, value: TruthValue, conn: str) -> tuple[int, int]:
    """Smallest (lead, period bound) with fold(value, lead) = fold(value, p)
    and all shorter folds pairwise distinct.  Exists by pigeonhole; the
    search is capped at |values| + 2 iterations."""
    table = kernel.table(conn)
    seen: dict[TruthValue, int] = {}
    acc = value
    j = 1
    while True:
        if acc in seen:
            return seen[acc], j
        seen[acc] = j
        if j > len(kernel.values) + 2:
            raise KernelError("periodicity search exceeded the pigeonhole bound")
        acc = table[(acc, value)]
        j += 1


def reduce_count(n: int, lead: int, period: int) -> int:
    """Fold-length reduction: counts below the lead stay; others wrap into
    [lead, period)."""
    if n < lead:
        return n
    return lead + (n - lead) % (period - lead)


def fold_counted(kernel: LogicKernel, conn: str, counts: Mapping[TruthValue, int]) -> TruthValue:
    """Fold the connective over a counted multiset of truth values.

    Each count is first reduced through its eventual periodicity, so the
    call is cheap even for counts in the millions; associativity and
    commutativity make the value order irrelevant.
    """
    total = sum(counts.values())
    if total <= 0:
        raise KernelError("fold over an empty multiset")
    table = kernel.table(conn)
    acc: Optional[TruthValue] = None
    for value in kernel.values:
        n = counts.get(value, 0)
        if n < 0:
            raise KernelError("negative multiplicity")
        lead, period = kernel.periodicity(value, conn)
        n = reduce_count(n, lead, period)
        for _ in range(n):
            acc = value if acc is None else table[(acc, value)]
    assert acc is not None
    return acc


def fold_direct(kernel: LogicKernel, conn: str, items: Iterable[TruthValue]) -> TruthValue:
    return kernel.fold(conn, items)


# ---------------------------------------------------------------------------
# JSON definition files


def _table_from_rows(values, rows, what) -> dict:
    if len(rows) != len(values) or any(len(r) != len(values) for r in rows):
        raise KernelError(f"{what}: table must be {len(values)}x{len(values)}, row-major")
    return {
        (values[i], values[j]): rows[i][j]
        for i in range(len(values))
        for j in range(len(values))
    }


def kernel_from_json(obj: Mapping) -> LogicKernel:
    from .parser import parse_condition

    values = tuple(obj["values"])
    true, false = obj["true"], obj["false"]
    and_t = _table_from_rows(values, obj["and"], "and")
    or_t = _table_from_rows(values, obj["or"], "or")
    nots = obj["not"]
    if len(nots) != len(values):
        raise KernelError("not: one entry per value required")
    not_t = {values[i]: nots[i] for i in range(len(values))}

    null_cmp = {}
    for op, by_pattern in obj.get("null_comparison", {}).items():
        if op not in ast.COMPARISONS:
            raise KernelError(f"null_comparison: unknown comparison {op!r}")
        for pattern_text, value in by_pattern.items():
            pattern = frozenset(int(ch) for ch in pattern_text)
            if pattern not in _PATTERNS:
                raise KernelError(f"null_comparison: bad pattern {pattern_text!r}")
            if value not in values:
                raise KernelError(f"null_comparison: unknown value {value!r}")
            null_cmp[(op, pattern)] = value
    for op in ast.COMPARISONS:
        for pattern in _PATTERNS:
            if (op, pattern) not in null_cmp:
                raise KernelError(
                    f"null_comparison must cover every comparison and null pattern; "
                    f"missing ({op}, {''.join(str(i) for i in sorted(pattern))})"
                )

    def compare(op: str, a: Value, b: Value) -> TruthValue:
        pattern = frozenset(i for i, v in ((1, a), (2, b)) if is_null(v))
        if not pattern:
            return true if standard_compare(op, a, b) else false
        return null_cmp[(op, pattern)]

    expr: dict[tuple[str, str], TemplateFn] = {}
    for key, text in obj.get("expressibility", {}).items():
        op, _, value = key.partition("|")
        if op not in ast.COMPARISONS or value not in values:
            raise KernelError(f"expressibility: bad key {key!r}")
        template = parse_condition(text)
        _collect_holes(template, f"expressibility {key}")
        expr[(op, value)] = (
            lambda a, b, template=template: substitute_holes(template, (a, b))
        )
    name = obj.get("name", "custom-mvl")
    return make_mvl_kernel(name, values, true, false, and_t, or_t, not_t, compare, expr)


def load_kernel(path: str) -> LogicKernel:
    with open(path, "r", encoding="utf-8") as fh:
        return kernel_from_json(json.load(fh))


def grounding_from_json(obj: Mapping) -> Grounding:
    from .parser import parse_condition

    templates = {}
    for op, by_pattern in obj.get("templates", {}).items():
        for pattern_text, text in by_pattern.items():
            pattern = frozenset(int(ch) for ch in pattern_text)
            templates[(op, pattern)] = parse_condition(text)
    return Grounding(obj.get("name", "custom"), templates)


def load_grounding(path: str) -> Grounding:
    with open(path, "r", encoding="utf-8") as fh:
        return grounding_from_json(json.load(fh))
