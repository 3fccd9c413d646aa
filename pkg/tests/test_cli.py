import ast
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nscq.bilevel import build_combined_program
from nscq.cli import AnalysisReport, compare, data_path, main, reformulate, reproduce, run_check_cq
from nscq.cq import SamplingPlan
from nscq.expr import const, evaluate, exp, ln, max_, min_, abs_, power, var
from nscq.problemfile import (ProblemFileError, dumps, expression_to_tree, load, loads, tree_to_expression)

DATA = ["sawtooth.json", "cubic_bilevel.json", "exponential_bilevel.json"]
NAMES = ["a", "b", "c"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# problem files -------------------------------------------------------------------

@pytest.mark.parametrize("name", DATA)
def test_data_files_round_trip(name):
    text = data_path(name).read_text()
    pf = loads(text)
    assert dumps(pf) == text
    assert dumps(loads(dumps(pf))) == text


def expressions(depth):
    leaf = st.one_of(st.sampled_from([var(n) for n in NAMES]),
                     st.floats(-3, 3, allow_nan=False).map(const))
    if depth == 0:
        return leaf
    sub = expressions(depth - 1)
    return st.one_of(
        leaf,
        st.tuples(sub, sub).map(lambda t: t[0] + t[1]),
        st.tuples(sub, sub).map(lambda t: t[0] * t[1]),
        st.tuples(sub, sub).map(lambda t: t[0] - t[1]),
        st.tuples(sub, st.integers(2, 4)).map(lambda t: power(t[0], t[1])),
        st.tuples(sub, sub).map(lambda t: max_(t[0], t[1])),
        st.tuples(sub, sub).map(lambda t: min_(t[0], t[1])),
        sub.map(abs_),
        sub.map(lambda e: exp(0.1 * e)),
        sub.map(lambda e: ln(1 + power(e, 2))),
    )


@settings(max_examples=200, deadline=None)
@given(expressions(4), st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3))
def test_expression_tree_round_trip(e, p):
    tree = expression_to_tree(e)
    back = tree_to_expression(json.loads(json.dumps(tree)))
    assert expression_to_tree(back) == tree
    assert evaluate(back, NAMES, p) == evaluate(e, NAMES, p)


@pytest.mark.parametrize("tree, fragment", [
    ({"op": "sin", "args": [{"op": "var", "name": "x1"}]}, "unknown operation"),
    ({"op": "add", "args": [{"op": "var", "name": "x1"}]}, "takes 2"),
    ({"op": "const", "value": "one"}, "finite numeric"),
    ({"op": "pow", "value": 1, "args": [{"op": "var", "name": "x1"}]}, "integer"),
    ({"args": []}, "'op'"),
])
def test_malformed_expression_reports_location(tmp_path, capsys, tree, fragment):
    doc = json.loads(data_path("sawtooth.json").read_text())
    doc["constraints"]["h"] = [tree]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ProblemFileError) as err:
        load(path)
    assert err.value.location.startswith("$.constraints.h[0]")
    code, _, msg = run(capsys, "check-cq", path)
    assert code == 2
    assert "$.constraints.h[0]" in msg and fragment in msg


def test_bad_json_reports_line_and_column(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "variables": ["x1",]\n}\n')
    code, _, msg = run(capsys, "check-cq", path)
    assert code == 2
    assert "line 2, column" in msg


@pytest.mark.parametrize("argv", [
    ["check-cq"],
    ["frobnicate"],
    ["check-cq", "PROBLEM", "--radii", "a,b"],
    ["error-bound", "PROBLEM", "--norm", "l3"],
])
def test_usage_errors_exit_2(capsys, argv):
    argv = [str(data_path("sawtooth.json")) if a == "PROBLEM" else a for a in argv]
    code, _, _ = run(capsys, *argv)
    assert code == 2


@pytest.mark.parametrize("point", ["1,2", "nowhere"])
def test_bad_point_exits_2(capsys, point):
    code, _, msg = run(capsys, "check-cq", data_path("sawtooth.json"), "--point", point)
    assert code == 2
    assert "nscq: error" in msg


def test_missing_file_exits_2(tmp_path, capsys):
    code, _, _ = run(capsys, "check-cq", tmp_path / "absent.json")
    assert code == 2


# commands ------------------------------------------------------------------------

def test_check_cq_on_sawtooth(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, text, _ = run(capsys, "check-cq", data_path("sawtooth.json"), "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    res = doc["results"]
    assert res["nnamcq"]["verdict"] == "fails"
    assert res["rcrcq"]["verdict"] == "violated-with-witness"
    assert res["rcpld"]["verdict"] == "no-violation-found"
    assert res["implication_issues"] == []
    assert "status: ok" in text


def _numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from _numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _numbers(v)
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        yield float(obj)


@pytest.mark.parametrize("argv", [
    ["check-cq", data_path("sawtooth.json")],
    ["check-stationarity", data_path("cubic_bilevel.json"), "--point", "optimal"],
    ["error-bound", data_path("cubic_bilevel.json"), "--point", "optimal", "--points-per-radius", "20"],
])
def test_text_numbers_appear_in_machine_report(tmp_path, capsys, argv):
    out = tmp_path / "report.json"
    code, text, _ = run(capsys, *argv, "--out", out)
    assert code == 0
    machine = set(_numbers(json.loads(out.read_text())))
    seen = 0
    for line in text.splitlines()[1:]:
        _, _, val = line.strip().partition(": ")
        try:
            lit = ast.literal_eval(val)
        except (ValueError, SyntaxError):
            continue
        for num in _numbers(lit if isinstance(lit, (list, dict)) else [lit]):
            assert num in machine, line
            seen += 1
    assert seen > 0


def test_report_replaces_nonfinite_values():
    rep = AnalysisReport({"command": "x"}, {"a": float("inf"), "b": [float("nan"), 1.0]})
    doc = json.loads(rep.to_json())
    assert doc["results"] == {"a": "inf", "b": ["nan", 1.0]}


@pytest.mark.parametrize("name", ["cubic_bilevel.json", "exponential_bilevel.json"])
def test_reformulated_file_gives_same_verdicts(name):
    pf = load(data_path(name))
    out, _ = reformulate(pf)
    again = loads(dumps(out))
    plan = SamplingPlan(points_per_radius=4)
    cp = build_combined_program(pf.bilevel, pf.bilevel.grid_points)
    for anchor, point in again.anchors:
        via_file, _ = run_check_cq(again.system(), np.asarray(point), plan)
        direct, _ = run_check_cq(cp.system, np.asarray(point), plan)
        for key in ("nnamcq", "fullrank", "lcq", "rcpld", "rcrcq"):
            assert via_file[key]["verdict"] == direct[key]["verdict"], (anchor, key)


def test_reformulate_command_emits_loadable_file(tmp_path, capsys):
    out = tmp_path / "cp.json"
    code, text, _ = run(capsys, "reformulate-bilevel", data_path("cubic_bilevel.json"), "--out", out)
    assert code == 0
    pf = load(out)
    assert pf.variables == ["x", "y", "u1", "u2"]
    assert dumps(pf) == out.read_text()


# example reproduction ------------------------------------------------------------

@pytest.mark.parametrize("example", ["4.1", "5.1", "5.2"])
def test_examples_reproduce(example):
    out = reproduce(example)
    assert out["match"], out["differences"]


def test_reproduction_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "reproduce-example", "4.1", "--out", a)[0] == 0
    assert run(capsys, "reproduce-example", "4.1", "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("expected, actual, n", [
    ({"a": 1.0}, {"a": 1.0 + 1e-9}, 0),
    ({"a": 1.0}, {"a": 1.1}, 1),
    ({"a": [1, 2]}, {"a": [1]}, 1),
    ({"a": "x", "b": 1}, {"a": "y"}, 2),
    ({"a": True}, {"a": 1}, 1),
])
def test_compare(expected, actual, n):
    assert len(compare(expected, actual, 1e-6)) == n
