from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from sixlab import exactla as la
from sixlab.cli import WorkspaceConfig, load_workspace, main


@pytest.fixture
def run():
    runner = CliRunner()

    def go(*args):
        return runner.invoke(main, list(args), catch_exceptions=False)

    return go


def test_compute_pseudo_circle(run):
    r = run("compute", "Γ(obj:constK)", "--space", "pseudo-circle")
    assert r.exit_code == 0
    assert "H = {0:1, 1:1}" in r.output
    r = run("compute", "Γ(x^!(obj:constK))", "--space", "pseudo-circle")
    assert r.exit_code == 0 and "H = {1:1}" in r.output


def test_compute_backends_agree(run):
    a = run("compute", "Γ(x^!(obj:constK))", "--space", "pseudo-circle", "--backend", "trcat")
    assert a.exit_code == 0 and "H = {1:1}" in a.output


def test_compute_json_and_resolution(run, tmp_path):
    out = tmp_path / "r.json"
    r = run("compute", "Γ(obj:constK)", "--space", "sierpinski", "--emit-resolution", "--json", str(out))
    assert r.exit_code == 0
    doc = json.loads(out.read_text())
    assert doc["H"] == {"0": 1} and doc["prime"] == la.DEFAULT_PRIME
    assert set(doc["resolution"]) == {"input", "output", "iota"}


def test_compute_two_term(run):
    r = run("compute", "row:alpha_!-to-alpha_* @ o", "--input", "k_pt")
    assert r.exit_code == 0
    assert "formally invertible: False" in r.output and "2-isomorphism: False" in r.output
    r = run("compute", "row:alpha_!-to-alpha_* @ c", "--input", "k_pt")
    assert "formally invertible: True" in r.output and "2-isomorphism: True" in r.output


def test_compute_on_empty_space(run, tmp_path):
    ws = tmp_path / "ws.json"
    ws.write_text(json.dumps({"spaces": {"E": {"points": 0, "leq": []}}}))
    r = run("compute", "Γ(obj:constK)", "--workspace", str(ws), "--space", "E", "--json", "-")
    assert r.exit_code == 0, r.output
    assert "H = {}" in r.output
    doc = json.loads(r.output[r.output.index("{\n"):])
    assert doc["total_dim"] == 0 and doc["stalks"] == {"*": {}}


@pytest.mark.parametrize("formula", ["Γ(", "zz_*(-)", "inv(row:id-aa @ s_sierpinski)", "row:nope"])
def test_compute_errors_exit_2(run, formula):
    r = run("compute", formula)
    assert r.exit_code == 2
    assert "error:" in r.output


def test_bad_field_exits_2(run):
    r = run("compute", "Γ(obj:constK)", "--field", "12")
    assert r.exit_code == 2


def test_describe(run):
    r = run("describe", "sierpinski")
    assert r.exit_code == 0 and "sierpinski: 2 points, 1 relation" in r.output
    r = run("describe", "resolution", "of", "constK", "on", "sierpinski")
    assert r.exit_code == 0 and "length-1 resolution" in r.output
    r = run("describe", "c")
    assert "closed immersion" in r.output
    r = run("describe", "unknown-thing")
    assert r.exit_code == 2


def test_verify_instances_zero_warns(run):
    r = CliRunner().invoke(main, ["verify", "structure", "--instances", "0"])
    assert r.exit_code == 0
    assert "vacuous" in r.stderr


def test_verify_json_is_deterministic(run, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        r = run("verify", "fml", "--instances", "5", "--seed", "3", "--json", str(p))
        assert r.exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["verdict"] == "pass" and doc["seed"] == 3 and "time" not in a.read_text()


def test_check_row_and_diagram(run):
    r = run("check-row", "proj-fml", "--instances", "2")
    assert r.exit_code == 0 and "projection-fml: pass" in r.output
    assert run("check-row", "nope").exit_code == 2
    r = run("check-diagram", "ulotimes-symm", "--instances", "2")
    assert r.exit_code == 0


def test_workspace_file(tmp_path):
    doc = {
        "field": 101, "seed": 4,
        "spaces": {"V": {"points": 3, "leq": [[0, 2], [1, 2]], "names": ["p", "q", "r"]}},
        "maps": {"w": {"source": "V", "target": "sierpinski", "assign": ["c", "c", "o"]}},
        "immersions": {"top": {"site": "V", "subset": ["r"]}},
    }
    path = tmp_path / "ws.json"
    path.write_text(json.dumps(doc))
    cfg = load_workspace(str(path), la.DEFAULT_PRIME, 0, None, "V")
    assert isinstance(cfg, WorkspaceConfig) and cfg.prime == 101 and cfg.seed == 4
    ws = cfg.workspace()
    assert ws.immersions["top"].is_open and "p" in ws.immersions
    assert ws.maps["w"].assign == (0, 0, 1)
