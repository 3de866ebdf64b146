"""Abstract syntax for algebra expressions, selection conditions and terms.

All nodes are immutable and hashable; structural equality is the equality
used by the snapshot tests.  The canonical text renderer here is the inverse
of `nullvl.parser.parse_expression`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .values import format_number

COMPARISONS = ("=", "!=", "<", ">", "<=", ">=")
ORDER_COMPARISONS = ("<", ">", "<=", ">=")

NUMERIC_FUNCTIONS = ("add", "sub", "mult", "div", "mod", "neg")
AGGREGATES = ("count", "count_star", "sum", "avg", "min", "max")


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class NumConst:
    value: Fraction


@dataclass(frozen=True)
class OrdConst:
    value: str


@dataclass(frozen=True)
class NullConst:
    pass


@dataclass(frozen=True)
class NameRef:
    name: str


@dataclass(frozen=True)
class FnApply:
    fn: str
    args: tuple["Term", ...]


@dataclass(frozen=True)
class ArgHole:
    """Placeholder inside condition templates; substituted before evaluation."""

    index: int  # 1-based


Term = Union[NumConst, OrdConst, NullConst, NameRef, FnApply, ArgHole]


def num(value) -> NumConst:
    return NumConst(Fraction(value))


def col(name: str) -> NameRef:
    return NameRef(name)


# ---------------------------------------------------------------------------
# Conditions


@dataclass(frozen=True)
class CTrue:
    pass


@dataclass(frozen=True)
class CFalse:
    pass


@dataclass(frozen=True)
class IsNull:
    term: Term


@dataclass(frozen=True)
class Compare:
    lhs: tuple[Term, ...]
    op: str
    rhs: tuple[Term, ...]


@dataclass(frozen=True)
class In:
    items: tuple[Term, ...]
    query: "Expression"


@dataclass(frozen=True)
class Empty:
    query: "Expression"


@dataclass(frozen=True)
class Quant:
    """ANY / ALL comparison against a subquery result."""

    items: tuple[Term, ...]
    op: str
    quant: str  # "any" | "all"
    query: "Expression"


@dataclass(frozen=True)
class And:
    left: "Condition"
    right: "Condition"


@dataclass(frozen=True)
class Or:
    left: "Condition"
    right: "Condition"


@dataclass(frozen=True)
class Not:
    cond: "Condition"


Condition = Union[CTrue, CFalse, IsNull, Compare, In, Empty, Quant, And, Or, Not]


def and_all(conds: list) -> Condition:
    if not conds:
        return CTrue()
    out = conds[0]
    for c in conds[1:]:
        out = And(out, c)
    return out


def or_all(conds: list) -> Condition:
    if not conds:
        return CFalse()
    out = conds[0]
    for c in conds[1:]:
        out = Or(out, c)
    return out


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class BaseRelation:
    name: str


@dataclass(frozen=True)
class ProjItem:
    term: Term
    rename: str | None = None


@dataclass(frozen=True)
class Projection:
    items: tuple[ProjItem, ...]
    source: "Expression"


@dataclass(frozen=True)
class Selection:
    cond: Condition
    source: "Expression"


@dataclass(frozen=True)
class Product:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class SetOp:
    op: str  # "union" | "intersect" | "except" (ALL/bag semantics)
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Distinct:
    source: "Expression"


@dataclass(frozen=True)
class AggItem:
    fn: str  # one of AGGREGATES
    column: str | None  # None only for count_star
    rename: str | None = None


@dataclass(frozen=True)
class Group:
    names: tuple[str, ...]
    aggs: tuple[AggItem, ...]
    source: "Expression"


@dataclass(frozen=True)
class Mu:
    """Fixpoint iteration over a fresh relation name.

    ``distinct`` selects the deduplicating iteration (single-copy union);
    otherwise multiplicities accumulate.  ``step`` may reference ``rel``,
    ``seed`` may not.
    """

    rel: str
    distinct: bool
    seed: "Expression"
    step: "Expression"


Expression = Union[
    BaseRelation, Projection, Selection, Product, SetOp, Distinct, Group, Mu
]


def project(items, source) -> Projection:
    norm = []
    for it in items:
        if isinstance(it, ProjItem):
            norm.append(it)
        elif isinstance(it, tuple):
            norm.append(ProjItem(it[0], it[1]))
        elif isinstance(it, str):
            norm.append(ProjItem(NameRef(it), None))
        else:
            norm.append(ProjItem(it, None))
    return Projection(tuple(norm), source)


# ---------------------------------------------------------------------------
# Canonical term names (the one-to-one Name function)


def term_name(t: Term) -> str:
    if isinstance(t, NameRef):
        return t.name
    if isinstance(t, NumConst):
        return format_number(t.value)
    if isinstance(t, OrdConst):
        return f"'{t.value}'"
    if isinstance(t, NullConst):
        return "null"
    if isinstance(t, FnApply):
        return f"{t.fn}({','.join(term_name(a) for a in t.args)})"
    if isinstance(t, ArgHole):
        return f"?{t.index}"
    raise TypeError(f"not a term: {t!r}")


def agg_name(agg: AggItem) -> str:
    if agg.rename is not None:
        return agg.rename
    if agg.fn == "count_star":
        return "count(*)"
    return f"{agg.fn}({agg.column})"


def proj_item_name(item: ProjItem) -> str:
    return item.rename if item.rename is not None else term_name(item.term)


# ---------------------------------------------------------------------------
# Size of the parse tree

def expression_size(node) -> int:
    """Node count of the parse tree, terms and conditions included."""
    if isinstance(node, (NumConst, OrdConst, NullConst, NameRef, ArgHole)):
        return 1
    if isinstance(node, FnApply):
        return 1 + sum(expression_size(a) for a in node.args)
    if isinstance(node, (CTrue, CFalse)):
        return 1
    if isinstance(node, IsNull):
        return 1 + expression_size(node.term)
    if isinstance(node, Compare):
        return 1 + sum(expression_size(t) for t in node.lhs + node.rhs)
    if isinstance(node, In):
        return 1 + sum(expression_size(t) for t in node.items) + expression_size(node.query)
    if isinstance(node, Empty):
        return 1 + expression_size(node.query)
    if isinstance(node, Quant):
        return 1 + sum(expression_size(t) for t in node.items) + expression_size(node.query)
    if isinstance(node, (And, Or)):
        return 1 + expression_size(node.left) + expression_size(node.right)
    if isinstance(node, Not):
        return 1 + expression_size(node.cond)
    if isinstance(node, BaseRelation):
        return 1
    if isinstance(node, Projection):
        return 1 + sum(expression_size(i.term) for i in node.items) + expression_size(node.source)
    if isinstance(node, Selection):
        return 1 + expression_size(node.cond) + expression_size(node.source)
    if isinstance(node, (Product, SetOp)):
        return 1 + expression_size(node.left) + expression_size(node.right)
    if isinstance(node, Distinct):
        return 1 + expression_size(node.source)
    if isinstance(node, Group):
        return 1 + len(node.aggs) + expression_size(node.source)
    if isinstance(node, Mu):
        return 1 + expression_size(node.seed) + expression_size(node.step)
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Tuple comparisons spelled out as Boolean combinations


def expand_tuple_comparison(lhs: tuple, op: str, rhs: tuple) -> Condition:
    """Expand a tuple comparison into atomic comparisons.

    Equality is the conjunction of position-wise equalities, inequality the
    disjunction of position-wise inequalities.  Order comparisons expand
    position by position: a disjunct per index, each a prefix of equalities
    conjoined with the comparison at the following position.
    """
    if len(lhs) != len(rhs):
        raise ValueError(f"tuple length mismatch: {len(lhs)} vs {len(rhs)}")
    if op not in COMPARISONS:
        raise ValueError(f"unknown comparison {op!r}")
    n = len(lhs)
    if n == 0:
        raise ValueError("empty tuple comparison")
    if n == 1:
        return Compare((lhs[0],), op, (rhs[0],))
    if op == "=":
        return and_all([Compare((l,), "=", (r,)) for l, r in zip(lhs, rhs)])
    if op == "!=":
        return or_all([Compare((l,), "!=", (r,)) for l, r in zip(lhs, rhs)])
    disjuncts = []
    for i in range(n):
        prefix = [Compare((lhs[j],), "=", (rhs[j],)) for j in range(i)]
        disjuncts.append(and_all(prefix + [Compare((lhs[i],), op, (rhs[i],))]))
    return or_all(disjuncts)


# ---------------------------------------------------------------------------
# Canonical text rendering (inverse of the parser)

_SYMBOL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.$]*\Z|[-+]?[0-9][0-9./]*\Z")


def _name_text(name: str) -> str:
    if _SYMBOL_RE.match(name) and not name.startswith(("+", "-")):
        return name
    return _quote(name)


def _quote(text: str) -> str:
    body = text.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{body}"'


def render_term(t: Term) -> str:
    if isinstance(t, NameRef):
        return f"(col {_name_text(t.name)})"
    if isinstance(t, NumConst):
        return f"(num {format_number(t.value)})"
    if isinstance(t, OrdConst):
        return f"(ord {_quote(t.value)})"
    if isinstance(t, NullConst):
        return "(null)"
    if isinstance(t, FnApply):
        args = " ".join(render_term(a) for a in t.args)
        return f"(fn {t.fn} {args})"
    if isinstance(t, ArgHole):
        return f"(arg {t.index})"
    raise TypeError(f"not a term: {t!r}")


def _render_tuple(items: tuple[Term, ...]) -> str:
    if len(items) == 1:
        return render_term(items[0])
    return "(tuple " + " ".join(render_term(t) for t in items) + ")"


def render_condition(c: Condition) -> str:
    if isinstance(c, CTrue):
        return "(true)"
    if isinstance(c, CFalse):
        return "(false)"
    if isinstance(c, IsNull):
        return f"(isnull {render_term(c.term)})"
    if isinstance(c, Compare):
        return f"(cmp {c.op} {_render_tuple(c.lhs)} {_render_tuple(c.rhs)})"
    if isinstance(c, In):
        return f"(in {_render_tuple(c.items)} {render_expression(c.query)})"
    if isinstance(c, Empty):
        return f"(empty {render_expression(c.query)})"
    if isinstance(c, Quant):
        return (
            f"({c.quant} {c.op} {_render_tuple(c.items)} {render_expression(c.query)})"
        )
    if isinstance(c, And):
        return f"(and {render_condition(c.left)} {render_condition(c.right)})"
    if isinstance(c, Or):
        return f"(or {render_condition(c.left)} {render_condition(c.right)})"
    if isinstance(c, Not):
        return f"(not {render_condition(c.cond)})"
    raise TypeError(f"not a condition: {c!r}")


def _render_agg(agg: AggItem) -> str:
    if agg.fn == "count_star":
        body = "(count-star)"
    else:
        body = f"({agg.fn} {_name_text(agg.column)})"
    if agg.rename is not None:
        return f"(as {_name_text(agg.rename)} {body})"
    return body


def render_expression(e: Expression) -> str:
    if isinstance(e, BaseRelation):
        return f"(base {_name_text(e.name)})"
    if isinstance(e, Projection):
        items = []
        for it in e.items:
            if it.rename is not None:
                items.append(f"(as {_name_text(it.rename)} {render_term(it.term)})")
            else:
                items.append(render_term(it.term))
        return f"(project ({' '.join(items)}) {render_expression(e.source)})"
    if isinstance(e, Selection):
        return f"(select {render_condition(e.cond)} {render_expression(e.source)})"
    if isinstance(e, Product):
        return f"(product {render_expression(e.left)} {render_expression(e.right)})"
    if isinstance(e, SetOp):
        kw = {"union": "union-all", "intersect": "intersect-all", "except": "except-all"}[e.op]
        return f"({kw} {render_expression(e.left)} {render_expression(e.right)})"
    if isinstance(e, Distinct):
        return f"(distinct {render_expression(e.source)})"
    if isinstance(e, Group):
        names = " ".join(_name_text(n) for n in e.names)
        aggs = " ".join(_render_agg(a) for a in e.aggs)
        return f"(group ({names}) ({aggs}) {render_expression(e.source)})"
    if isinstance(e, Mu):
        kind = "union" if e.distinct else "union-all"
        return (
            f"(mu {_name_text(e.rel)} {kind} "
            f"{render_expression(e.seed)} {render_expression(e.step)})"
        )
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Traversal helpers


def child_expressions(e: Expression) -> list[Expression]:
    if isinstance(e, BaseRelation):
        return []
    if isinstance(e, (Projection, Selection, Distinct, Group)):
        return [e.source]
    if isinstance(e, (Product, SetOp)):
        return [e.left, e.right]
    if isinstance(e, Mu):
        return [e.seed, e.step]
    raise TypeError(f"not an expression: {e!r}")


def condition_subqueries(c: Condition) -> list[Expression]:
    if isinstance(c, (In, Empty, Quant)):
        return [c.query]
    return []


def condition_children(c: Condition) -> list[Condition]:
    if isinstance(c, (And, Or)):
        return [c.left, c.right]
    if isinstance(c, Not):
        return [c.cond]
    return []


def condition_terms(c: Condition) -> list[Term]:
    if isinstance(c, IsNull):
        return [c.term]
    if isinstance(c, Compare):
        return list(c.lhs + c.rhs)
    if isinstance(c, (In, Quant)):
        return list(c.items)
    return []


def term_names(t: Term) -> set[str]:
    if isinstance(t, NameRef):
        return {t.name}
    if isinstance(t, FnApply):
        out: set[str] = set()
        for a in t.args:
            out |= term_names(a)
        return out
    return set()


def term_contains_null(t: Term) -> bool:
    if isinstance(t, NullConst):
        return True
    if isinstance(t, FnApply):
        return any(term_contains_null(a) for a in t.args)
    return False


def term_can_yield_null(t: Term, nullable_names: set[str]) -> bool:
    """Whether the term can evaluate to NULL given possibly-null names.

    div/mod count as null sources because division by zero yields NULL.
    """
    if isinstance(t, NullConst):
        return True
    if isinstance(t, NameRef):
        return t.name in nullable_names
    if isinstance(t, FnApply):
        if t.fn in ("div", "mod"):
            return True
        return any(term_can_yield_null(a, nullable_names) for a in t.args)
    return False


def expression_references(e: Expression, rel: str) -> bool:
    """Whether the expression mentions a base relation by name, anywhere."""
    if isinstance(e, BaseRelation):
        return e.name == rel
    if isinstance(e, Mu) and e.rel == rel:
        # inner binding shadows; the seed still lives in the outer scope
        return expression_references(e.seed, rel)
    for sub in child_expressions(e):
        if expression_references(sub, rel):
            return True
    if isinstance(e, Selection):
        if _condition_references(e.cond, rel):
            return True
    return False


def _condition_references(c: Condition, rel: str) -> bool:
    for q in condition_subqueries(c):
        if expression_references(q, rel):
            return True
    for sub in condition_children(c):
        if _condition_references(sub, rel):
            return True
    return False
