import json
from pathlib import Path

import pytest
from gmpy2 import mpq
from click.testing import CliRunner

from deforma.cli import ChartSpec, InputError, main, parse_operand
from deforma.core.jets import Jet, VarSet

ROOT = Path(__file__).resolve().parents[1]
SPECS = ROOT / "specs"
GOLDEN = Path(__file__).parent / "golden"


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def terms_of(series):
    return {t["power"]: t["value"]["terms"] for t in series["terms"]}


def test_wick_star_mul(tmp_path):
    out = tmp_path / "r.json"
    r = run("star-mul", "z̄", "z", "--spec", SPECS / "flat1.json", "--json", out)
    assert r.exit_code == 0
    rep = json.loads(out.read_text())
    assert rep["schema"] == 1
    assert terms_of(rep["outputs"]["product"]) == {0: [[[1, 1], "1"]], 1: [[[0, 0], "1"]]}


@pytest.mark.parametrize("name,args", [
    ("star_mul_flat.json", ["star-mul", "z̄", "z", "--spec", SPECS / "flat1.json"]),
    ("trace_density_flat.json", ["trace-density", "--spec", SPECS / "flat1.json"]),
])
def test_golden_reports(tmp_path, name, args):
    out = tmp_path / name
    assert run(*args, "--json", out).exit_code == 0
    assert out.read_text() == (GOLDEN / name).read_text()


def test_report_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run("verify", "hochschild", "--spec", SPECS / "fubini_study.json", "--json", p).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_covar_flat_witness(tmp_path):
    out = tmp_path / "r.json"
    r = run("verify", "covar", "--spec", SPECS / "flat1.json", "--json", out)
    assert r.exit_code == 0
    check = json.loads(out.read_text())["verification"][0]
    assert check["passed"] and check["witnesses"]
    assert "Q_zb.Q_z" in check["witnesses"][0]


def test_degenerate_chart_is_input_error(tmp_path):
    out = tmp_path / "r.json"
    r = run("verify", "all", "--spec", SPECS / "degenerate.json", "--json", out)
    assert r.exit_code == 2
    assert json.loads(out.read_text())["error"]["kind"] == "degenerate-chart"


def test_depth_error_reports_required_degree(tmp_path):
    out = tmp_path / "r.json"
    r = run("verify", "kp", "--spec", SPECS / "flat1.json", "--degree", 3, "--json", out)
    assert r.exit_code == 2
    err = json.loads(out.read_text())["error"]
    assert err["kind"] == "depth" and "5" in err["locus"]


def test_verification_failure_exit_code(tmp_path, monkeypatch):
    from deforma import verify
    from deforma.toeplitz import CheckReport

    def broken(chart, K=3, rng=None):
        rep = CheckReport("kp")
        rep.record(False, "forced", "detail")
        return rep

    monkeypatch.setitem(verify.SUITES, "kp", broken)
    out = tmp_path / "r.json"
    r = run("verify", "kp", "--spec", SPECS / "flat1.json", "--json", out)
    assert r.exit_code == 1
    assert json.loads(out.read_text())["verification"][0]["first_failure"]["case"] == "forced"


@pytest.mark.parametrize("doc,locus", [
    ('{"m": 1, "potential": [{"powers": [1, 1], "re": "0.5"}], "jet_degree": 6, "nu_order": 3}',
     "potential[0].re"),
    ('{"m": 1, "potential": [{"powers": [1], "re": "1"}], "jet_degree": 6, "nu_order": 3}',
     "potential[0].powers"),
    ('{"m": 1, "potential": [{"powers": [1, 1]}], "nu_order": 3}', "jet_degree"),
    ('{"m": 1,\n "potential": [}', "line 2"),
])
def test_parse_error_locus(doc, locus):
    with pytest.raises(InputError) as e:
        ChartSpec.parse(doc)
    assert locus in e.value.locus


def test_bad_operand_is_input_error():
    r = run("star-mul", "z*q", "z", "--spec", SPECS / "flat1.json")
    assert r.exit_code == 2


def test_operand_parser():
    vs = VarSet("tangent", 1)
    z, zb, eta, etab = (Jet.var(vs, i) for i in range(4))
    assert parse_operand("z̄*η + 1/2*z^2", vs) == zb * eta + (z * z).scale(mpq(1, 2))
    assert parse_operand("-(eta - etab)^2", vs) == -((eta - etab) ** 2)


def test_toeplitz_command(tmp_path):
    r = run("toeplitz", "z̄", "z", "--spec", SPECS / "flat1.json")
    assert r.exit_code == 0 and "PASS" in r.output
