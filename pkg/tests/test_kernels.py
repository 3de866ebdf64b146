import itertools
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nullvl import ast
from nullvl.errors import KernelError
from nullvl.logic import (
    AND,
    OR,
    Grounding,
    empty_grounding,
    fold_counted,
    grounding_from_json,
    kernel_2vl,
    kernel_2vl_syntactic,
    kernel_3vl,
    kernel_4vl_example,
    kernel_from_json,
    kernel_grounded,
    make_mvl_kernel,
    nonnegative_leq_grounding,
    periodicity,
    reduce_count,
    syntactic_equality_grounding,
)

ALL_KERNELS = [kernel_3vl, kernel_2vl, kernel_2vl_syntactic, kernel_4vl_example]

_GRID = [None, Fraction(-1), Fraction(0), Fraction(1), Fraction(2)]


def test_three_valued_tables():
    k = kernel_3vl()
    assert k.conj("u", "f") == "f"
    assert k.disj("u", "t") == "t"
    assert k.neg("u") == "u"
    assert k.conj("u", "t") == "u"
    assert k.disj("u", "f") == "u"


def test_two_valued_null_comparisons():
    k = kernel_2vl()
    assert k.compare("=", None, None) == "f"
    assert k.compare("=", Fraction(1), None) == "f"
    assert k.compare("<=", Fraction(3), Fraction(5)) == "t"
    assert k.compare("!=", None, Fraction(1)) == "f"


def test_syntactic_equality_kernel():
    k = kernel_2vl_syntactic()
    assert k.compare("=", None, None) == "t"
    assert k.compare("=", None, Fraction(1)) == "f"
    assert k.compare("<", None, None) == "f"
    assert k.compare("!=", None, None) == "f"


def test_grounded_sign_rule_for_null_leq():
    k = kernel_grounded(nonnegative_leq_grounding())
    assert k.compare("<=", None, Fraction(5)) == "t"
    assert k.compare("<=", None, Fraction(-1)) == "f"
    assert k.compare("<=", Fraction(-2), None) == "t"
    assert k.compare("<=", Fraction(2), None) == "f"
    assert k.compare("<=", None, None) == "t"


def test_empty_grounding_matches_conflating_kernel_on_grid():
    kg = kernel_grounded(empty_grounding())
    k2 = kernel_2vl()
    for op in ast.COMPARISONS:
        for a, b in itertools.product(_GRID, repeat=2):
            assert kg.compare(op, a, b) == k2.compare(op, a, b), (op, a, b)


def test_syntactic_grounding_matches_syntactic_kernel_on_grid():
    kg = kernel_grounded(syntactic_equality_grounding())
    ks = kernel_2vl_syntactic()
    for op in ast.COMPARISONS:
        for a, b in itertools.product(_GRID, repeat=2):
            assert kg.compare(op, a, b) == ks.compare(op, a, b), (op, a, b)


_4VL_AND_GOLDEN = {
    ("t", "t"): "t", ("t", "f"): "f", ("t", "u"): "u", ("t", "s"): "s",
    ("f", "t"): "f", ("f", "f"): "f", ("f", "u"): "f", ("f", "s"): "f",
    ("u", "t"): "u", ("u", "f"): "f", ("u", "u"): "u", ("u", "s"): "u",
    ("s", "t"): "s", ("s", "f"): "f", ("s", "u"): "u", ("s", "s"): "u",
}
_4VL_OR_GOLDEN = {
    ("t", "t"): "t", ("t", "f"): "t", ("t", "u"): "t", ("t", "s"): "t",
    ("f", "t"): "t", ("f", "f"): "f", ("f", "u"): "u", ("f", "s"): "s",
    ("u", "t"): "t", ("u", "f"): "u", ("u", "u"): "u", ("u", "s"): "u",
    ("s", "t"): "t", ("s", "f"): "s", ("s", "u"): "u", ("s", "s"): "u",
}


def test_four_valued_table_snapshot():
    k = kernel_4vl_example()
    assert k.and_table == _4VL_AND_GOLDEN
    assert k.or_table == _4VL_OR_GOLDEN
    assert k.conj("s", "s") == "u"
    assert k.conj("t", "s") == "s"
    assert k.compare("=", None, Fraction(1)) == "s"


def test_four_valued_restricts_to_boolean():
    k = kernel_4vl_example()
    for a, b in itertools.product(("t", "f"), repeat=2):
        assert k.conj(a, b) == ("t" if a == b == "t" else "f")
        assert k.disj(a, b) == ("f" if a == b == "f" else "t")


@pytest.mark.parametrize("make", ALL_KERNELS)
def test_tables_associative_and_commutative(make):
    k = make()
    for table in (k.and_table, k.or_table):
        for a, b in itertools.product(k.values, repeat=2):
            assert table[(a, b)] == table[(b, a)]
        for a, b, c in itertools.product(k.values, repeat=3):
            assert table[(table[(a, b)], c)] == table[(a, table[(b, c)])]


def test_broken_commutativity_rejected_with_witness():
    k = kernel_3vl()
    and_t = dict(k.and_table)
    and_t[("u", "f")] = "u"  # now u&f != f&u
    with pytest.raises(KernelError) as err:
        make_mvl_kernel("broken", k.values, "t", "f", and_t, k.or_table, k.not_table, k.compare)
    a, b = err.value.witness[:2]
    assert and_t[(a, b)] != and_t[(b, a)]


def test_broken_associativity_rejected_with_witness():
    k = kernel_3vl()
    or_t = dict(k.or_table)
    or_t[("t", "u")] = "f"  # commutative but not associative
    or_t[("u", "t")] = "f"
    with pytest.raises(KernelError) as err:
        make_mvl_kernel("broken", k.values, "t", "f", k.and_table, or_t, k.not_table, k.compare)
    w = err.value.witness
    if len(w) == 3:
        a, b, c = w
        assert or_t[(or_t[(a, b)], c)] != or_t[(a, or_t[(b, c)])]
    else:
        a, b = w
        assert or_t[(a, b)] != or_t[(b, a)]


def test_non_boolean_restriction_rejected():
    k = kernel_3vl()
    and_t = dict(k.and_table)
    and_t[("t", "t")] = "u"
    with pytest.raises(KernelError):
        make_mvl_kernel("broken", k.values, "t", "f", and_t, k.or_table, k.not_table, k.compare)


def test_accepts_valid_tables():
    k3 = kernel_3vl()
    rebuilt = make_mvl_kernel(
        "copy", k3.values, "t", "f", k3.and_table, k3.or_table, k3.not_table, k3.compare
    )
    assert rebuilt.values == k3.values
    kernel_4vl_example()  # weak idempotency is not required, just the laws


def test_periodicity_of_idempotent_values():
    kb = kernel_2vl()
    assert periodicity(kb, "t", OR) == (1, 2)
    k3 = kernel_3vl()
    assert periodicity(k3, "u", AND) == (1, 2)


def test_periodicity_of_the_varying_value():
    k4 = kernel_4vl_example()
    # brute-force folds: s, s&s=u, u&s=u -> lead 2, first repeat at 3
    assert k4.fold(AND, ["s", "s"]) == "u"
    assert periodicity(k4, "s", AND) == (2, 3)
    assert periodicity(k4, "s", OR) == (2, 3)


@pytest.mark.parametrize("make", ALL_KERNELS)
def test_periodicity_defining_equation_to_four_periods(make):
    k = make()
    for value in k.values:
        for conn in (AND, OR):
            lead, period = k.periodicity(value, conn)
            assert 0 < lead < period
            for j in range(1, 4 * period + 1):
                direct = k.fold(conn, [value] * j)
                reduced = k.fold(conn, [value] * reduce_count(j, lead, period))
                assert direct == reduced, (value, conn, j)


def test_fold_counted_singleton():
    assert fold_counted(kernel_2vl(), OR, {"t": 1}) == "t"


def test_fold_counted_mixed_counts():
    assert fold_counted(kernel_3vl(), OR, {"u": 3, "f": 2}) == "u"


def test_fold_counted_rejects_empty():
    with pytest.raises(KernelError):
        fold_counted(kernel_3vl(), OR, {})


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**6), big=st.booleans())
def test_fold_counted_matches_direct_fold(seed, big):
    rng = random.Random(seed)
    kernel = rng.choice(ALL_KERNELS)()
    conn = rng.choice((AND, OR))
    hi = 10**6 if big else 12
    counts = {v: rng.randint(0, hi) for v in kernel.values}
    if sum(counts.values()) == 0:
        counts[kernel.true] = 1
    reduced = {
        v: reduce_count(n, *kernel.periodicity(v, conn)) for v, n in counts.items()
    }
    direct = kernel.fold(
        conn, (v for v in kernel.values for _ in range(reduced[v]))
    )
    assert fold_counted(kernel, conn, counts) == direct
    if not big:
        exact = kernel.fold(conn, (v for v in kernel.values for _ in range(counts[v])))
        assert fold_counted(kernel, conn, counts) == exact


def test_kernel_json_roundtrip():
    k3 = kernel_3vl()
    obj = {
        "name": "json-3vl",
        "values": list(k3.values),
        "true": "t",
        "false": "f",
        "and": [[k3.and_table[(a, b)] for b in k3.values] for a in k3.values],
        "or": [[k3.or_table[(a, b)] for b in k3.values] for a in k3.values],
        "not": [k3.not_table[a] for a in k3.values],
        "null_comparison": {
            op: {"1": "u", "2": "u", "12": "u"} for op in ast.COMPARISONS
        },
        "expressibility": {
            f"{op}|t": f"(cmp {op} (arg 1) (arg 2))" for op in ast.COMPARISONS
        },
    }
    loaded = kernel_from_json(json.loads(json.dumps(obj)))
    for op in ast.COMPARISONS:
        for a, b in itertools.product(_GRID, repeat=2):
            assert loaded.compare(op, a, b) == k3.compare(op, a, b)
    template = loaded.template("=", "t")(ast.num(1), ast.num(2))
    assert template == ast.Compare((ast.num(1),), "=", (ast.num(2),))


def test_grounding_json_and_validation():
    g = grounding_from_json(
        {
            "name": "leq",
            "templates": {"<=": {"1": "(cmp >= (arg 2) (num 0))"}},
        }
    )
    assert g.decide("<=", None, Fraction(3)) is True
    assert g.decide("<=", None, Fraction(-3)) is False
    with pytest.raises(KernelError, match="null position"):
        Grounding("bad", {("<=", frozenset({1})): ast.Compare((ast.ArgHole(1),), ">=", (ast.num(0),))})
    with pytest.raises(KernelError, match="subqueries"):
        Grounding(
            "bad",
            {("<=", frozenset({1})): ast.Empty(ast.BaseRelation("R"))},
        )


def test_two_valued_comparison_stays_two_valued_and_unknown_tracks_nulls():
    k2, k3 = kernel_2vl(), kernel_3vl()
    for op in ast.COMPARISONS:
        for a in _GRID:
            for b in _GRID:
                assert k2.compare(op, a, b) in ("t", "f")
                three = k3.compare(op, a, b)
                assert (three == "u") == (a is None or b is None)


def test_kernel_json_requires_total_null_comparisons():
    k3 = kernel_3vl()
    obj = {
        "values": list(k3.values), "true": "t", "false": "f",
        "and": [[k3.and_table[(a, b)] for b in k3.values] for a in k3.values],
        "or": [[k3.or_table[(a, b)] for b in k3.values] for a in k3.values],
        "not": [k3.not_table[a] for a in k3.values],
        "null_comparison": {"=": {"1": "u", "2": "u", "12": "u"}},
    }
    with pytest.raises(KernelError, match="must cover every comparison"):
        kernel_from_json(obj)
