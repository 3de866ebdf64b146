import json

from nullvl.cli import main

DB = {
    "schema": {
        "R": {"columns": [{"name": "R.A", "type": "num", "nullable": True}]},
        "S": {"columns": [{"name": "S.A", "type": "num", "nullable": True}]},
    },
    "data": {"R": [["1"], [None]], "S": [[None]]},
}

Q1_EXPR = "(select (not (in (col R.A) (base S))) (base R))"
Q1_SQL = "SELECT R.A FROM R WHERE R.A NOT IN (SELECT S.A FROM S)"


def _write(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content if isinstance(content, str) else json.dumps(content))
    return str(path)


def test_eval_subcommand(tmp_path, capsys):
    db = _write(tmp_path, "db.json", DB)
    expr = _write(tmp_path, "q.ra", Q1_EXPR)
    assert main(["eval", "--semantics", "3vl", expr, db]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["columns"] == ["R.A"] and out["rows"] == []
    assert main(["eval", "--semantics", "2vl", "--canonical", expr, db]) == 0
    assert capsys.readouterr().out.strip().splitlines() == ["(null) x1", "(1) x1"]


def test_eval_with_custom_kernel_file(tmp_path, capsys):
    kernel = {
        "values": ["t", "f"],
        "true": "t",
        "false": "f",
        "and": [["t", "f"], ["f", "f"]],
        "or": [["t", "t"], ["t", "f"]],
        "not": ["f", "t"],
        "null_comparison": {
            op: {"1": "f", "2": "f", "12": "f"}
            for op in ("=", "!=", "<", ">", "<=", ">=")
        },
    }
    db = _write(tmp_path, "db.json", DB)
    expr = _write(tmp_path, "q.ra", Q1_EXPR)
    kpath = _write(tmp_path, "kernel.json", kernel)
    assert main(["eval", "--semantics", f"mvl:{kpath}", expr, db]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["rows"]) == 2  # behaves like the conflating two-valued kernel


def test_translate_and_rewrite(tmp_path, capsys):
    db = _write(tmp_path, "db.json", DB)
    expr = _write(tmp_path, "q.ra", Q1_EXPR)
    assert main(["translate", "--direction", "2to3", "--schema", db, expr]) == 0
    out = capsys.readouterr().out
    assert "(isnull (col R.A))" in out
    sql = _write(tmp_path, "q.sql", Q1_SQL)
    assert main(["rewrite", "--from", "2vl", "--to", "3vl", "--schema", db, sql]) == 0
    out = capsys.readouterr().out
    assert "IS NULL" in out and "IS NOT NULL" in out


def test_sql2ra_and_analyze(tmp_path, capsys):
    db = _write(tmp_path, "db.json", DB)
    sql = _write(tmp_path, "q.sql", Q1_SQL)
    assert main(["sql2ra", "--schema", db, sql]) == 0
    assert capsys.readouterr().out.strip() == Q1_EXPR
    expr = _write(tmp_path, "q.ra", Q1_EXPR)
    assert main(["analyze", "--json", expr, db]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["certified"] is False


def test_fuzz_and_replay(tmp_path, capsys):
    assert main(["fuzz", "--family", "capture-2vl-to-3vl", "--cases", "10", "--seed", "5"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["failed"] == 0 and summary["cases"] == 10

    bundle = {
        "family": "prop-4.1",
        "expression": "(base R)",
        "db": DB,
        "checks": [
            {"kind": "bags-equal", "left": "(base R)", "right": "(select (false) (base R))"}
        ],
    }
    bpath = _write(tmp_path, "bundle.json", bundle)
    assert main(["replay", bpath]) == 1
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["status"] == "fail"


def test_parse_errors_exit_two(tmp_path, capsys):
    db = _write(tmp_path, "db.json", DB)
    expr = _write(tmp_path, "broken.ra", "(select (empt")
    assert main(["eval", expr, db]) == 2
    assert "error:" in capsys.readouterr().err
    missing = str(tmp_path / "missing.ra")
    assert main(["eval", missing, db]) == 2
    capsys.readouterr()


def test_translate_trace_emission(tmp_path, capsys):
    db = _write(tmp_path, "db.json", DB)
    expr = _write(tmp_path, "q.ra", Q1_EXPR)
    assert main(["translate", "--direction", "2to3", "--schema", db, "--trace", expr]) == 0
    captured = capsys.readouterr()
    trace = json.loads(captured.err)
    assert trace["size_ratio"] > 1
    assert any(entry["rule"] == "in-null-filtered" for entry in trace["trace"])
