"""Values, records, bags, schemas and databases.

Cells are either NULL (``None``), exact rationals (`fractions.Fraction`,
type ``n``) or text atoms (`str`, type ``o``).  Rationals keep every
comparison and aggregate bit-deterministic; AVG is exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Union

from .errors import SchemaError

NULL = None
Value = Optional[Union[Fraction, str]]
Record = tuple  # tuple[Value, ...]

NUM = "n"
ORD = "o"


def is_null(v: Value) -> bool:
    return v is None


def value_type(v: Value) -> Optional[str]:
    """Type letter of a non-null value; None for NULL (member of both types)."""
    if v is None:
        return None
    return NUM if isinstance(v, Fraction) else ORD


def parse_number(text: str) -> Fraction:
    """Parse an exact decimal or rational literal ("7", "-0.25", "1/3")."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exact numeric literal: {text!r}") from exc


def format_number(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def value_sort_key(v: Value):
    """Canonical ordering: nulls first, numbers before text atoms."""
    if v is None:
        return (0, 0)
    if isinstance(v, Fraction):
        return (1, v)
    return (2, v)


def record_sort_key(record: Record):
    return tuple(value_sort_key(v) for v in record)


class Bag:
    """A multiset of same-arity records.

    NULL compares syntactically inside a bag: two records are the same
    record iff they agree position-wise, with NULL equal only to NULL.
    """

    __slots__ = ("_counts",)

    def __init__(self, items: Iterable = ()):
        counts: dict[Record, int] = {}
        for item in items:
            if isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], int) and (
                isinstance(item[0], tuple)
            ):
                record, k = item
            else:
                record, k = tuple(item), 1
            if k <= 0:
                raise ValueError("multiplicities must be positive")
            record = tuple(record)
            counts[record] = counts.get(record, 0) + k
        self._counts = counts

    @classmethod
    def from_counts(cls, counts: Mapping[Record, int]) -> "Bag":
        bag = cls()
        bag._counts = {r: k for r, k in counts.items() if k > 0}
        return bag

    def counts(self) -> dict[Record, int]:
        return dict(self._counts)

    def items(self) -> Iterator[tuple[Record, int]]:
        return iter(self._counts.items())

    def records(self) -> Iterator[Record]:
        """Distinct records, one each."""
        return iter(self._counts)

    def occurrences(self) -> Iterator[Record]:
        """Every record repeated by its multiplicity."""
        for record, k in self._counts.items():
            for _ in range(k):
                yield record

    def multiplicity(self, record: Record) -> int:
        return self._counts.get(tuple(record), 0)

    def is_empty(self) -> bool:
        return not self._counts

    def total(self) -> int:
        return sum(self._counts.values())

    def distinct_count(self) -> int:
        return len(self._counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, Bag) and self._counts == other._counts

    def __hash__(self):
        raise TypeError("bags are unhashable")

    def __len__(self) -> int:
        return self.total()

    def __repr__(self) -> str:
        return f"Bag({self._counts!r})"

    def union(self, other: "Bag") -> "Bag":
        merged = dict(self._counts)
        for r, k in other._counts.items():
            merged[r] = merged.get(r, 0) + k
        return Bag.from_counts(merged)

    def intersect(self, other: "Bag") -> "Bag":
        out = {}
        for r, k in self._counts.items():
            m = min(k, other._counts.get(r, 0))
            if m > 0:
                out[r] = m
        return Bag.from_counts(out)

    def difference(self, other: "Bag") -> "Bag":
        out = {}
        for r, k in self._counts.items():
            m = k - other._counts.get(r, 0)
            if m > 0:
                out[r] = m
        return Bag.from_counts(out)

    def distinct(self) -> "Bag":
        return Bag.from_counts({r: 1 for r in self._counts})

    def sorted_items(self) -> list[tuple[Record, int]]:
        return sorted(self._counts.items(), key=lambda it: record_sort_key(it[0]))

    def canonical_text(self) -> str:
        """Deterministic text form: nulls first, numbers before text atoms."""
        lines = []
        for record, k in self.sorted_items():
            cells = ", ".join(format_value(v) for v in record)
            lines.append(f"({cells}) x{k}")
        return "\n".join(lines)


def format_value(v: Value) -> str:
    if v is None:
        return "null"
    if isinstance(v, Fraction):
        return format_number(v)
    return repr(v)


@dataclass(frozen=True)
class Column:
    name: str
    type: str  # NUM or ORD
    nullable: bool = True
    key: bool = False

    def __post_init__(self):
        if self.type not in (NUM, ORD):
            raise SchemaError(f"column {self.name}: unknown type {self.type!r}")
        # key columns are implicitly NOT NULL
        if self.key and self.nullable:
            object.__setattr__(self, "nullable", False)


@dataclass(frozen=True)
class Relation:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"relation {self.name}: duplicate column names {names}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def types(self) -> tuple[str, ...]:
        return tuple(c.type for c in self.columns)

    @property
    def nullable_labels(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.nullable)


class Schema:
    """Named relations with per-column type, nullability and key flags."""

    def __init__(self, relations: Iterable[Relation]):
        self.relations: dict[str, Relation] = {}
        for rel in relations:
            if rel.name in self.relations:
                raise SchemaError(f"duplicate relation {rel.name}")
            self.relations[rel.name] = rel

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def __getitem__(self, name: str) -> Relation:
        return self.relations[name]

    def names(self) -> list[str]:
        return list(self.relations)


@dataclass
class Database:
    schema: Schema
    tables: dict[str, Bag]

    def table(self, name: str) -> Bag:
        return self.tables[name]

    def is_null_free(self) -> bool:
        return all(
            not any(is_null(v) for v in record)
            for bag in self.tables.values()
            for record in bag.records()
        )


def parse_cell(raw, col_type: str) -> Value:
    if raw is None:
        return None
    if col_type == NUM:
        if isinstance(raw, bool):
            raise SchemaError(f"boolean cell {raw!r} in numeric column")
        if isinstance(raw, int):
            return Fraction(raw)
        if isinstance(raw, str):
            return parse_number(raw)
        raise SchemaError(f"bad numeric cell {raw!r}")
    if isinstance(raw, str):
        return raw
    raise SchemaError(f"bad text cell {raw!r} (text columns hold JSON strings)")


def dump_cell(v: Value):
    if v is None:
        return None
    if isinstance(v, Fraction):
        return format_number(v)
    return v


def schema_from_json(obj: Mapping) -> Schema:
    relations = []
    for rel_name, rel_obj in obj.items():
        cols = []
        for col in rel_obj["columns"]:
            cols.append(
                Column(
                    name=col["name"],
                    type=NUM if col.get("type", "ord") == "num" else ORD,
                    nullable=bool(col.get("nullable", True)),
                    key=bool(col.get("key", False)),
                )
            )
        relations.append(Relation(rel_name, tuple(cols)))
    return Schema(relations)


def schema_to_json(schema: Schema) -> dict:
    out = {}
    for rel in schema.relations.values():
        out[rel.name] = {
            "columns": [
                {
                    "name": c.name,
                    "type": "num" if c.type == NUM else "ord",
                    "nullable": c.nullable,
                    "key": c.key,
                }
                for c in rel.columns
            ]
        }
    return out


def database_from_json(obj: Mapping) -> Database:
    """Load and validate a {"schema": ..., "data": ...} document."""
    schema = schema_from_json(obj["schema"])
    tables: dict[str, Bag] = {}
    data = obj.get("data", {})
    for rel_name in data:
        if rel_name not in schema:
            raise SchemaError(f"data for undeclared relation {rel_name}")
    for rel in schema.relations.values():
        rows = data.get(rel.name, [])
        records = []
        for row in rows:
            if len(row) != len(rel.columns):
                raise SchemaError(
                    f"{rel.name}: row of arity {len(row)}, expected {len(rel.columns)}"
                )
            record = tuple(parse_cell(raw, col.type) for raw, col in zip(row, rel.columns))
            for v, col in zip(record, rel.columns):
                if v is None and not col.nullable:
                    raise SchemaError(f"{rel.name}.{col.name}: NULL in non-nullable column")
            records.append(record)
        tables[rel.name] = Bag(records)
    return Database(schema, tables)


def database_to_json(db: Database) -> dict:
    data = {}
    for name, bag in db.tables.items():
        rows = []
        for record, k in bag.sorted_items():
            for _ in range(k):
                rows.append([dump_cell(v) for v in record])
        data[name] = rows
    return {"schema": schema_to_json(db.schema), "data": data}


def load_database(path: str) -> Database:
    with open(path, "r", encoding="utf-8") as fh:
        return database_from_json(json.load(fh))


def bag_to_json(bag: Bag, labels: tuple[str, ...]) -> dict:
    """Result emission: rows with an explicit multiplicity field."""
    rows = [
        {"values": [dump_cell(v) for v in record], "multiplicity": k}
        for record, k in bag.sorted_items()
    ]
    return {"columns": list(labels), "rows": rows}
