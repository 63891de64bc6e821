import json
import os

import pytest

from genrh.cli import bundled_specs, load_spec, main, parse_spec, run_solve, verify
from genrh.errors import MissingReport, ParseError

SWEEPS = {"stretch_family.spec", "linear_family.spec"}

BASE = """\
name: tiny
problem: A
domain: {kind: disk, M: 64}
grid: {nr: 12, nt: 64}
boundary:
  l: "1"
  gamma: "cos(theta)"
conditions:
  boundary:
    - {at: "1", value: "0"}
exact:
  w: "z"
acceptance:
  boundary_residual: 1.0e-6
  exact_error: 1.0e-8
"""


def write(tmp_path, text, name="tiny.spec"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_bundled_specs_listed():
    names = bundled_specs()
    assert "disk_rh_cos.spec" in names and len(names) >= 7


def test_unknown_key_names_the_key():
    with pytest.raises(ParseError) as info:
        parse_spec(BASE + "colour: red\n")
    assert "colour" in str(info.value)
    assert info.value.line == 16


def test_unknown_nested_key():
    with pytest.raises(ParseError, match="gama"):
        parse_spec(BASE.replace("gamma:", "gama:"))


@pytest.mark.parametrize("bad,needle", [
    ('"cos(theta"', "cannot parse"),
    ('"q + 1"', "unknown name"),
    ('"__import__(1)"', "unsupported construct"),
    ('"foo(theta)"', "unsupported construct"),
    ('"z.real"', "unsupported construct"),
])
def test_expression_errors(bad, needle):
    with pytest.raises(ParseError, match=needle) as info:
        parse_spec(BASE.replace('"cos(theta)"', bad))
    assert info.value.line == 7


def test_caret_is_power():
    spec = parse_spec(BASE.replace('"cos(theta)"', '"re(z^2)"'))
    assert spec.expr("boundary", "gamma")(2.0).real[()] == 4.0


def test_declared_index_mismatch_warns(tmp_path):
    spec = parse_spec(BASE.replace("problem: A", "problem: A\nindex: 2"))
    report, _ = run_solve(spec, str(tmp_path))
    assert any("index" in w for w in report["warnings"])
    assert report["passed"]


def test_solve_bundled_example(tmp_path, capsys):
    assert main(["solve", "disk_rh_cos.spec", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "disk_rh_cos.json", encoding="utf-8") as fh:
        rep = json.load(fh)
    fl = rep["flags"]["boundary_residual"]
    assert fl["pass"] and fl["value"] <= 1e-6
    assert os.path.exists(tmp_path / "disk_rh_cos.timings.json")


def test_verify_pass_and_fail(tmp_path, capsys):
    main(["solve", write(tmp_path, BASE), "--out", str(tmp_path)])
    good = str(tmp_path / "tiny.json")
    ok, lines = verify([good])
    assert ok and lines[-1] == "PASS (2 criteria)"
    with open(good, encoding="utf-8") as fh:
        rep = json.load(fh)
    rep["flags"]["exact_error"]["value"] = 1.0
    rep["flags"]["exact_error"]["pass"] = False
    bad = str(tmp_path / "bad.json")
    with open(bad, "w", encoding="utf-8") as fh:
        json.dump(rep, fh)
    capsys.readouterr()
    assert main(["verify", good, bad]) == 1
    out = capsys.readouterr().out
    assert "FAIL tiny:exact_error" in out and out.strip().splitlines()[-1].startswith("FAIL (1 of 4")


def test_verify_tampered_flag(tmp_path):
    main(["solve", write(tmp_path, BASE), "--out", str(tmp_path)])
    p = str(tmp_path / "tiny.json")
    with open(p, encoding="utf-8") as fh:
        rep = json.load(fh)
    rep["flags"]["exact_error"]["value"] = 0.5   # still marked as passing
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(rep, fh)
    ok, _ = verify([p])
    assert not ok


def test_verify_needs_reports(tmp_path):
    with pytest.raises(MissingReport):
        verify([])
    with pytest.raises(MissingReport):
        verify([str(tmp_path / "nope.json")])
    assert main(["verify"]) == 2


def test_parse_error_exit_code(tmp_path, capsys):
    assert main(["solve", write(tmp_path, BASE + "colour: red\n")]) == 2
    assert "colour" in capsys.readouterr().err


def test_round_trip_of_bundled_specs():
    for name in bundled_specs():
        spec = load_spec(name)
        again = parse_spec(spec.to_yaml())
        assert again.data == spec.data
        assert parse_spec(again.to_yaml()).data == spec.data


def test_determinism_of_small_spec(tmp_path):
    path = write(tmp_path, BASE)
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        main(["solve", path, "--out", str(out)])
        blobs.append((out / "tiny.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_resolution_scale(tmp_path):
    spec = load_spec("disk_rh_cos.spec")
    report, _ = run_solve(spec, str(tmp_path), k=0.5)
    assert report["resolution_scale"] == 0.5 and report["passed"]
