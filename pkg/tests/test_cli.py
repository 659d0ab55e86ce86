import csv
import json

import pytest

from holderpsh.cli import fmt, main, parse_points, UsageError


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("half")
    assert main(["build", "--spec", "fixture:half_space", "--out", str(out)]) == 0
    return out


def test_build_outputs(built):
    bundle = json.loads((built / "bundle.json").read_text())
    assert bundle["config"]["seed"] == 0
    sch = bundle["charts"][0]["schedule"]
    assert sch["tau_prime"] > 0
    assert set(bundle["constants"]) <= set(bundle["provenance"])
    rows = _rows(built / "schedule_local.csv")
    assert rows and all(float(r["margin"]) > 0 for r in rows)
    assert all(r["seed"] == "0" for r in rows)


def test_build_is_byte_identical(built, tmp_path):
    assert main(["build", "--spec", "fixture:half_space", "--out", str(tmp_path)]) == 0
    for name in ("bundle.json", "schedule_local.csv", "schedule_global.csv"):
        assert (tmp_path / name).read_bytes() == (built / name).read_bytes()


def test_eval_points_flags_outside(built, tmp_path):
    code = main(["eval", "--bundle", str(built / "bundle.json"), "--out", str(tmp_path),
                 "--points", "0.3,-0.2;5,5"])
    assert code == 0
    rows = _rows(tmp_path / "eval.csv")
    assert len(rows) == 2
    assert rows[0]["flag"] == "" and float(rows[0]["w"]) < 0
    assert rows[1]["flag"] == "outside_domain" and rows[1]["w"] == ""


def test_eval_sweep_lower_upper(built, tmp_path):
    assert main(["eval", "--bundle", str(built / "bundle.json"), "--out", str(tmp_path), "--sweep"]) == 0
    rows = _rows(tmp_path / "eval.csv")
    assert len(rows) == 60
    for r in rows:
        assert float(r["lower"]) <= float(r["w"]) <= float(r["upper"])


@pytest.mark.parametrize("extra", [[], ["--sweep", "--points", "0,-1"], ["--points", "1;2"]])
def test_eval_usage_errors(built, tmp_path, extra):
    assert main(["eval", "--bundle", str(built / "bundle.json"), "--out", str(tmp_path)] + extra) == 2


def test_eval_without_bundle(tmp_path):
    assert main(["eval", "--out", str(tmp_path), "--sweep"]) == 2


def test_verify_catches_tampered_lambda_prime(built, tmp_path):
    bundle = json.loads((built / "bundle.json").read_text())
    bundle["global_schedule"]["lambda_prime"] *= 1.5
    p = tmp_path / "bundle.json"
    p.write_text(json.dumps(bundle))
    assert main(["verify", "--bundle", str(p), "--out", str(tmp_path)]) == 1
    rows = {r["check"]: r for r in _rows(tmp_path / "verify.csv")}
    assert rows["crossing_global"]["passed"] == "false"


def test_audit_passes_and_covering_failure(tmp_path):
    assert main(["audit-geometry", "--spec", "fixture:half_space", "--out", str(tmp_path)]) == 0
    assert "[PASS] covering" in (tmp_path / "audit_report.txt").read_text()
    spec = tmp_path / "gap.yaml"
    spec.write_text(
        "name: gap\nboundary_window: 0.5\ncharts:\n"
        "  - center: [0.0, 0.0]\n    radius: 1.0\n    graph: {kind: flat}\n    inner_radius: 0.2\n"
    )
    out = tmp_path / "gap"
    assert main(["audit-geometry", "--spec", str(spec), "--out", str(out)]) == 1
    rows = {r["check"]: r for r in _rows(out / "audit.csv")}
    assert rows["covering"]["passed"] == "false"
    # build refuses a failing audit unless forced
    assert main(["build", "--spec", str(spec), "--out", str(out)]) == 1
    assert not (out / "bundle.json").exists()


def test_spec_errors_exit_two(tmp_path, capsys):
    spec = tmp_path / "bad.yaml"
    spec.write_text("charts:\n  - center: [0.0, 0.0]\n    radius: 1.0\n    graph: {kind: spiral}\n    inner_radius: 0.2\n")
    assert main(["build", "--spec", str(spec), "--out", str(tmp_path)]) == 2
    assert "line 4" in capsys.readouterr().err
    assert main(["build", "--spec", "fixture:half_space", "--samples", "0", "--out", str(tmp_path)]) == 2
    assert main(["build", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_build_global_failure_exits_one(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("n_max: 3\n")
    assert main(["build", "--spec", "fixture:half_space", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "NoFeasibleLambda" in capsys.readouterr().err
    bundle = json.loads((tmp_path / "bundle.json").read_text())
    assert bundle["global_schedule"] is None and bundle["global_error"].startswith("NoFeasibleLambda")


def test_report_writes_tables_and_figures(built, tmp_path):
    assert main(["report", "--bundle", str(built / "bundle.json"), "--out", str(tmp_path)]) == 0
    for name in ("sweep.csv", "schedule_local.csv", "schedule_global.csv", "sweep.png", "margins.png"):
        assert (tmp_path / name).stat().st_size > 0


def test_formatting_helpers():
    assert fmt(0.1) == "0.1" and fmt(True) == "true" and fmt(None) == ""
    assert fmt(complex(1.5, -2.0)) == "1.5-2.0j"
    assert fmt({"b": 1, "a": 0.5}) == "a=0.5;b=1"
    assert parse_points("0.1,-0.2; 1,2").tolist() == [0.1 - 0.2j, 1 + 2j]
    with pytest.raises(UsageError):
        parse_points(";")
