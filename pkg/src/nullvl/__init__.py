"""Interpreter, translators and static analysis for queries over data with
nulls, under two-valued, three-valued and arbitrary finite many-valued
condition semantics."""

__version__ = "0.1.0"
