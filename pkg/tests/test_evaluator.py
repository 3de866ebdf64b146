import random
from fractions import Fraction

import pytest

from nullvl import ast
from nullvl.ast import col, num
from nullvl.errors import RecursionLimitError
from nullvl.evaluator import (
    EvalConfig,
    _compare_value_tuples,
    eval_condition,
    eval_term,
    evaluate,
)
from nullvl.fuzz import ExpressionGenerator, FuzzConfig, default_schema, gen_database
from nullvl.logic import AND, OR, kernel_2vl, kernel_2vl_syntactic, kernel_3vl, kernel_grounded, empty_grounding
from nullvl.typecheck import typecheck
from nullvl.values import NUM, ORD, Bag, Column, Database, Relation, Schema

from sample_queries import bag, q1, q2, q3, q4, rs_db, rs_schema, row


def test_term_arithmetic():
    assert eval_term(ast.FnApply("add", (num(2), num(3))), {}) == Fraction(5)


def test_term_null_propagates_through_functions():
    assert eval_term(ast.FnApply("add", (ast.NullConst(), num(2))), {}) is None


def test_term_environment_lookup():
    assert eval_term(col("A"), {"A": Fraction(7)}) == Fraction(7)


def test_term_division_by_zero_is_null():
    assert eval_term(ast.FnApply("div", (num(1), num(0))), {}) is None
    assert eval_term(ast.FnApply("mod", (num(7), num(0))), {}) is None
    assert eval_term(ast.FnApply("div", (num(1), num(3))), {}) == Fraction(1, 3)
    assert eval_term(ast.FnApply("mod", (num(7), num(3))), {}) == Fraction(1)


def test_membership_in_null_set(cfg3, cfg2):
    db = rs_db([1], [None])
    cond = ast.In((num(1),), ast.BaseRelation("S"))
    assert eval_condition(cond, db, cfg=cfg3) == "u"
    assert eval_condition(cond, db, cfg=cfg2) == "f"


def test_all_over_empty_result_is_true(cfg3, cfg2, cfg_syn):
    db = rs_db([1], [])
    cond = ast.Quant((num(1),), "<", "all", ast.BaseRelation("S"))
    for cfg in (cfg3, cfg2, cfg_syn):
        assert eval_condition(cond, db, cfg=cfg) == "t"
    any_cond = ast.Quant((num(1),), "<", "any", ast.BaseRelation("S"))
    assert eval_condition(any_cond, db, cfg=cfg3) == "f"


def test_intro_queries_under_both_semantics(cfg3, cfg2):
    db = rs_db([1, None], [None])
    assert evaluate(q1(), db, cfg=cfg3) == Bag([])
    assert evaluate(q2(), db, cfg=cfg3) == bag(1, None)
    assert evaluate(q1(), db, cfg=cfg2) == bag(1, None)
    db_single = rs_db([None], [])
    assert evaluate(q3(), db_single, cfg=cfg3) == Bag([])
    assert evaluate(q4(), db_single, cfg=cfg3) == bag(None)


def test_projection_multiplicities(cfg3):
    schema = Schema([Relation("T", (Column("A", NUM, False), Column("B", NUM, False)))])
    db = Database(schema, {"T": Bag([(row(2, 3), 2), (row(1, 6), 3)])})
    p = ast.Projection(
        (ast.ProjItem(ast.FnApply("mult", (col("A"), col("B"))), None),),
        ast.BaseRelation("T"),
    )
    assert evaluate(p, db, cfg=cfg3) == Bag([(row(6), 5)])


def grouped_schema():
    return Schema([Relation("G", (Column("A", ORD), Column("B", NUM)))])


def test_group_by_with_count_and_sum(cfg3):
    db = Database(grouped_schema(), {"G": bag(("a", 1), ("a", 2))})
    g = ast.Group(
        ("A",),
        (ast.AggItem("count", "B", "C"), ast.AggItem("sum", "B", None)),
        ast.BaseRelation("G"),
    )
    assert evaluate(g, db, cfg=cfg3) == bag(("a", 2, 3))


def test_aggregates_strip_nulls_but_count_star_does_not(cfg3):
    db = Database(grouped_schema(), {"G": bag(("a", 1), ("a", None), ("a", 2))})
    g = ast.Group(
        (),
        (
            ast.AggItem("sum", "B", "s"),
            ast.AggItem("count", "B", "c"),
            ast.AggItem("count_star", None, "n"),
        ),
        ast.BaseRelation("G"),
    )
    assert evaluate(g, db, cfg=cfg3) == bag((3, 2, 3))


def test_null_keys_form_a_single_group(cfg3):
    db = Database(grouped_schema(), {"G": bag((None, 1), (None, 2), ("a", 5))})
    g = ast.Group(("A",), (ast.AggItem("count_star", None, "n"),), ast.BaseRelation("G"))
    assert evaluate(g, db, cfg=cfg3) == bag((None, 2), ("a", 1))


def test_aggregates_over_all_null_column(cfg3):
    db = Database(grouped_schema(), {"G": bag(("a", None), ("a", None))})
    g = ast.Group(
        ("A",),
        (
            ast.AggItem("sum", "B", "s"),
            ast.AggItem("min", "B", "m"),
            ast.AggItem("avg", "B", "v"),
            ast.AggItem("count", "B", "c"),
        ),
        ast.BaseRelation("G"),
    )
    assert evaluate(g, db, cfg=cfg3) == bag(("a", None, None, None, 0))


def test_group_over_empty_input_has_no_groups(cfg3):
    db = Database(grouped_schema(), {"G": Bag([])})
    g = ast.Group((), (ast.AggItem("count_star", None, "n"),), ast.BaseRelation("G"))
    assert evaluate(g, db, cfg=cfg3) == Bag([])


def test_avg_is_exact(cfg3):
    db = Database(grouped_schema(), {"G": bag(("a", 1), ("a", 2))})
    g = ast.Group((), (ast.AggItem("avg", "B", "v"),), ast.BaseRelation("G"))
    assert evaluate(g, db, cfg=cfg3) == Bag([row(Fraction(3, 2))])


def _mu_counter(distinct: bool, bound: int) -> ast.Mu:
    seed = ast.Distinct(ast.Projection((ast.ProjItem(col("R.A"), "w"),), ast.BaseRelation("R")))
    step = ast.Projection(
        (ast.ProjItem(ast.FnApply("add", (col("w"), num(1))), "w"),),
        ast.Selection(ast.Compare((col("w"),), "<", (num(bound),)), ast.BaseRelation("W")),
    )
    return ast.Mu("W", distinct, seed, step)


def test_mu_fixpoint_counts_up(cfg3):
    db = rs_db([1], [])
    assert evaluate(_mu_counter(True, 3), db, cfg=cfg3) == bag(1, 2, 3)


def test_mu_empty_seed_stops_immediately(cfg3):
    db = rs_db([], [])
    assert evaluate(_mu_counter(True, 3), db, cfg=cfg3) == Bag([])


def test_mu_cap_exceeded_raises(cfg3):
    # accumulate the same record forever under the bag union
    seed = ast.Projection((ast.ProjItem(col("R.A"), "w"),), ast.BaseRelation("R"))
    step = ast.Projection((ast.ProjItem(col("w"), "w"),), ast.BaseRelation("W"))
    loop = ast.Mu("W", False, seed, step)
    db = rs_db([1], [])
    with pytest.raises(RecursionLimitError):
        evaluate(loop, db, cfg=EvalConfig(kernel=kernel_3vl(), recursion_cap=50))


def test_selection_filters_within_multiplicity(cfg3):
    schema = rs_schema()
    db = Database(schema, {"R": Bag([(row(1), 3)]), "S": Bag([])})
    sel = ast.Selection(ast.Compare((col("R.A"),), "=", (num(1),)), ast.BaseRelation("R"))
    out = evaluate(sel, db, cfg=cfg3)
    assert out.multiplicity(row(1)) == 3


def test_distinct_idempotent_and_union_commutative(cfg3):
    db = rs_db([1, 1, None], [2, None])
    e1 = ast.Distinct(ast.Distinct(ast.BaseRelation("R")))
    e2 = ast.Distinct(ast.BaseRelation("R"))
    assert evaluate(e1, db, cfg=cfg3) == evaluate(e2, db, cfg=cfg3)
    u1 = ast.SetOp("union", ast.BaseRelation("R"), ast.BaseRelation("S"))
    u2 = ast.SetOp("union", ast.BaseRelation("S"), ast.BaseRelation("R"))
    assert evaluate(u1, db, cfg=cfg3) == evaluate(u2, db, cfg=cfg3)


def test_bag_set_operations_treat_null_syntactically(cfg3):
    db = rs_db([None, None, 1], [None, 1, 1])
    inter = ast.SetOp("intersect", ast.BaseRelation("R"), ast.BaseRelation("S"))
    assert evaluate(inter, db, cfg=cfg3) == bag(None, 1)
    diff = ast.SetOp("except", ast.BaseRelation("R"), ast.BaseRelation("S"))
    assert evaluate(diff, db, cfg=cfg3) == bag(None)


def test_correlated_subquery_shadowing(cfg3):
    # the inner relation's column shadows an outer binding of the same name
    schema = Schema(
        [
            Relation("O", (Column("X", NUM),)),
            Relation("I", (Column("X", NUM),)),
        ]
    )
    db = Database(schema, {"O": bag(1, 2), "I": bag(2)})
    inner = ast.Selection(ast.Compare((col("X"),), "=", (num(2),)), ast.BaseRelation("I"))
    outer = ast.Selection(ast.Not(ast.Empty(inner)), ast.BaseRelation("O"))
    assert evaluate(outer, db, cfg=cfg3) == bag(1, 2)


def test_kernel_independence_on_null_free_databases():
    schema = default_schema()
    kernels = [kernel_3vl(), kernel_2vl(), kernel_2vl_syntactic(), kernel_grounded(empty_grounding())]
    cfgf = FuzzConfig(seed=11, max_depth=4, null_rate=0.0)
    for i in range(60):
        rng = random.Random(1000 + i)
        gen = ExpressionGenerator(schema, cfgf, rng)
        expr = typecheck(gen.expression(), schema).expr
        db = gen_database(schema, cfgf, rng)
        assert db.is_null_free()
        try:
            outs = [evaluate(expr, db, cfg=EvalConfig(kernel=k)) for k in kernels]
        except RecursionLimitError:
            continue
        assert all(o == outs[0] for o in outs)


def test_results_respect_the_type_word(cfg3):
    schema = default_schema()
    cfgf = FuzzConfig(seed=21, max_depth=4)
    for i in range(60):
        rng = random.Random(2000 + i)
        gen = ExpressionGenerator(schema, cfgf, rng)
        checked = typecheck(gen.expression(), schema)
        db = gen_database(schema, cfgf, rng)
        try:
            out = evaluate(checked.expr, db, cfg=cfg3)
        except RecursionLimitError:
            continue
        for record in out.records():
            for v, t in zip(record, checked.sig.types):
                if v is None:
                    continue
                assert (t == NUM) == isinstance(v, Fraction)


def test_tuple_comparison_matches_expanded_form():
    kernels = [kernel_3vl(), kernel_2vl(), kernel_2vl_syntactic()]
    values = [None, Fraction(0), Fraction(1), Fraction(2)]
    rng = random.Random(5)
    schema = rs_schema()
    db = Database(schema, {"R": Bag([]), "S": Bag([])})
    for _ in range(300):
        kernel = rng.choice(kernels)
        op = rng.choice(ast.COMPARISONS)
        n = rng.choice((1, 2, 3))
        lvals = [rng.choice(values) for _ in range(n)]
        rvals = [rng.choice(values) for _ in range(n)]
        direct = _compare_value_tuples(kernel, lvals, op, rvals)
        lhs = tuple(num(v) if v is not None else ast.NullConst() for v in lvals)
        rhs = tuple(num(v) if v is not None else ast.NullConst() for v in rvals)
        expanded = ast.expand_tuple_comparison(lhs, op, rhs)
        via_ast = eval_condition(expanded, db, cfg=EvalConfig(kernel=kernel))
        assert direct == via_ast, (op, lvals, rvals, kernel.name)


def test_quantifier_folds_respect_multiplicity(cfg4):
    # two copies of the same null row: s and s folds to u, not s
    db = rs_db([1], [None, None])
    cond = ast.Quant((col("R.A"),), "=", "all", ast.BaseRelation("S"))
    sel = ast.Selection(cond, ast.BaseRelation("R"))
    assert evaluate(sel, db, cfg=cfg4) == Bag([])
    assert (
        eval_condition(ast.Quant((num(1),), "=", "all", ast.BaseRelation("S")), db, cfg=cfg4)
        == "u"
    )


def test_unbound_name_is_an_internal_error():
    from nullvl.errors import EvalError

    with pytest.raises(EvalError, match="unbound name"):
        eval_term(col("nowhere"), {})


def test_result_emission_and_canonical_ordering(cfg3):
    from nullvl.values import bag_to_json

    out = bag(("b",), (None,), (2,), (1,))
    text = out.canonical_text().splitlines()
    assert text == ["(null) x1", "(1) x1", "(2) x1", "('b') x1"]
    payload = bag_to_json(out, ("X",))
    assert payload["columns"] == ["X"]
    assert payload["rows"][0] == {"values": [None], "multiplicity": 1}
    assert payload["rows"][1] == {"values": ["1"], "multiplicity": 1}


def test_public_group_and_fixpoint_entry_points(cfg3):
    db = rs_db([1], [])
    out = evaluate(_mu_counter(True, 2), db, cfg=cfg3)
    from nullvl.evaluator import eval_group, eval_mu

    mu = _mu_counter(True, 2)
    assert eval_mu(mu.rel, mu.distinct, mu.seed, mu.step, db, cfg=cfg3) == out
    g = eval_group(
        (), (ast.AggItem("count_star", None, "n"),), ast.BaseRelation("R"), db, cfg=cfg3
    )
    assert g == bag(1)


def test_selection_never_invents_records(cfg3, cfg2):
    schema = default_schema()
    cfgf = FuzzConfig(seed=61, max_depth=4)
    for i in range(60):
        rng = random.Random(6100 + i)
        gen = ExpressionGenerator(schema, cfgf, rng)
        src, sig = gen.expr(3, {})
        src = typecheck(src, schema).expr
        cond = gen.condition(2, dict(zip(sig.labels, sig.types)))
        sel = typecheck(ast.Selection(cond, src), schema).expr
        db = gen_database(schema, cfgf, rng)
        for cfg in (cfg3, cfg2):
            try:
                base = evaluate(sel.source, db, cfg=cfg)
                kept = evaluate(sel, db, cfg=cfg)
            except RecursionLimitError:
                continue
            for record, k in kept.items():
                assert base.multiplicity(record) >= k
