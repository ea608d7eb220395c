import json

import pytest

from perkins_sep.cli import main
from perkins_sep.io import Instance, write_json
from perkins_sep.measures import DiscreteMeasure, example_pair
from perkins_sep.rules import rule_from_json


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "alpha,code,fragment",
    [
        (0.3, 0, "atom-stop only"),
        (0.55, 0, "v-line"),
        (0.7, 0, "v-line and h-line"),
        (0.9, 2, "not in convex order"),
    ],
)
def test_example_cases(alpha, code, fragment, capsys):
    got, out, _ = run(["example", "--alpha", alpha], capsys)
    assert got == code
    assert fragment in out.splitlines()[0]


def test_example_writes_artifacts(tmp_path, capsys):
    assert run(["example", "--alpha", 0.7, "--out-dir", tmp_path], capsys)[0] == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"instance.json", "result.json", "report.json", "barrier.svg", "cdf.csv", "joint.csv"}
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["audit_violations"] == 0
    assert report["feasible_band"]["v_line_only"] == pytest.approx(0.625)
    svg = (tmp_path / "barrier.svg").read_text()
    assert "#8a2be2" in svg and "#ff69b4" in svg


def test_example_alpha_out_of_range(capsys):
    assert run(["example", "--alpha", 1.5], capsys)[0] == 1


def write_instance(path, alpha=0.6, **opts):
    lam, mu = example_pair(alpha)
    doc = Instance(lam, mu).to_json()
    doc["options"].update(opts)
    write_json(path, doc)
    return path


def test_calibrate_roundtrip(tmp_path, capsys):
    inst = write_instance(tmp_path / "inst.json")
    out = tmp_path / "res.json"
    assert run(["calibrate", inst, "--out", out], capsys)[0] == 0
    doc = json.loads(out.read_text())
    assert doc["residual_tv"] <= 1e-10
    rule = rule_from_json(doc["rule"])
    assert rule.atom_stop.atoms == [(0.0, 0.5)]


def test_calibrate_rejects_bad_order(tmp_path, capsys):
    inst = write_instance(tmp_path / "inst.json", alpha=0.8)
    code, _, err = run(["calibrate", inst], capsys)
    assert code == 2 and "error" in err


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert run(["calibrate", bad], capsys)[0] == 1
    missing = tmp_path / "missing.json"
    assert run(["calibrate", missing], capsys)[0] == 1


def test_unknown_option_is_parse_error(tmp_path, capsys):
    inst = write_instance(tmp_path / "inst.json")
    doc = json.loads(inst.read_text())
    doc["options"]["bogus"] = 1
    inst.write_text(json.dumps(doc))
    assert run(["calibrate", inst], capsys)[0] == 1


def test_verify_calibrated_rule(tmp_path, capsys):
    inst = write_instance(tmp_path / "inst.json")
    res = tmp_path / "res.json"
    run(["calibrate", inst, "--out", res], capsys)
    code, out, _ = run(["verify", inst, res], capsys)
    assert code == 0
    assert {line.split(":")[0] for line in out.splitlines()} == {
        "tv_residual",
        "duration_gap",
        "audit_violations",
        "self_union_violations",
    }
    assert all(line.endswith("PASS") for line in out.splitlines())


def test_verify_wrong_rule_fails(tmp_path, capsys):
    inst = write_instance(tmp_path / "inst.json")
    rule = tmp_path / "rule.json"
    write_json(rule, {
        "variant": "perkins",
        "barrier": {"v_lines": [{"max": 2.0, "depth": -2.0}], "h_lines": [{"min": -2.0, "right": 2.0}]},
    })
    code, out, _ = run(["verify", inst, rule], capsys)
    assert code == 4 and "FAIL" in out


def test_verify_non_terminating(tmp_path, capsys):
    inst = write_instance(tmp_path / "inst.json")
    rule = tmp_path / "rule.json"
    write_json(rule, {"variant": "perkins", "barrier": {"v_lines": [], "h_lines": []}})
    assert run(["verify", inst, rule], capsys)[0] == 3


def test_verify_root_rule_flags_interior_stops(tmp_path, capsys):
    lam = DiscreteMeasure.dirac(0.0)
    mu = DiscreteMeasure((-1.0, 0.0, 1.0), (0.25, 0.5, 0.25))
    inst = tmp_path / "inst.json"
    write_json(inst, Instance(lam, mu, mc_paths=4000, seed=1, dt_root_rost=1e-3).to_json())
    rule = tmp_path / "root.json"
    barrier = {"kind": "root", "levels": [-1.0, 0.0, 1.0], "thresholds": [0.0, 0.5, 0.0]}
    write_json(rule, {"variant": "root", "barrier": barrier})
    code, out, _ = run(["verify", inst, rule], capsys)
    assert code == 4
    assert "audit_violations" in out and "FAIL" in out


def test_compare_single_rule_and_warnings(tmp_path, capsys):
    lam = DiscreteMeasure.dirac(0.0)
    mu = DiscreteMeasure((-2.0, -1.0, 1.0, 3.0), (0.2, 0.3, 0.4, 0.1))
    inst = tmp_path / "inst.json"
    write_json(inst, Instance(lam, mu).to_json())
    out = tmp_path / "cmp.json"
    code, _, err = run(["compare", inst, "--rules", "perkins,hp", "--out", out], capsys)
    assert code == 0 and "hp" in err
    doc = json.loads(out.read_text())
    assert doc["rules"] == ["perkins"]
    assert doc["max_dominance"] == [["Equal"]]


def test_compare_unknown_rule(tmp_path, capsys):
    inst = write_instance(tmp_path / "inst.json")
    assert run(["compare", inst, "--rules", "perkins,nope"], capsys)[0] == 1


def test_compare_is_byte_identical(tmp_path, capsys):
    lam = DiscreteMeasure.dirac(0.0)
    mu = DiscreteMeasure((-2.0, -1.0, 1.0, 3.0), (0.2, 0.3, 0.4, 0.1))
    inst = tmp_path / "inst.json"
    write_json(inst, Instance(lam, mu).to_json())
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["compare", inst, "--out", a], capsys)
    run(["compare", inst, "--out", b], capsys)
    assert a.read_bytes() == b.read_bytes()
