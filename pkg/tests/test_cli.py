import csv
import json
import math
import os
import random

import numpy as np
import pytest
from click.testing import CliRunner

from graphfix.cli import main
from graphfix.problems import problem_to_dict, random_ladder_problem
from graphfix.serialize import format_float, json_dumps
from graphfix.verifier import enumerate_coincidence_points


@pytest.fixture()
def runner():
    return CliRunner()


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_verify_builtin_all_true(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "verify", "example-3-3"])
    assert res.exit_code == 0, res.output
    report = _read_json(tmp_path / "report.json")
    assert report["hypotheses"]["all_ok"] is True
    assert report["manifest"]["subcommand"] == "verify"
    assert "seed" in report["manifest"]


def test_verify_kamran_flags_violating_pair(runner, tmp_path):
    res = runner.invoke(
        main, ["--out", str(tmp_path), "verify", "example-3-3", "--kamran", "--M", "0"]
    )
    assert res.exit_code == 1
    report = _read_json(tmp_path / "report.json")
    assert report["hypotheses"]["all_ok"] is True
    assert report["kamran"]["holds"] is False
    pairs = {(w["v"], w["w"]) for w in report["kamran"]["witnesses"]}
    assert ("0", "1") in pairs


def test_verify_identity_builtin(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "verify", "identity"])
    assert res.exit_code == 0


def test_verify_kamran_counterexample_builtin(runner, tmp_path):
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "verify", "kamran-counterexample", "--kamran"],
    )
    assert res.exit_code == 1


def test_verify_malformed_file(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("not json at all")
    res = runner.invoke(main, ["--out", str(tmp_path), "verify", str(bad)])
    assert res.exit_code == 2


def test_verify_unknown_name(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "verify", "no-such-problem"])
    assert res.exit_code == 2


def test_iterate_ternary_orbit(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "iterate", "example-3-3"])
    assert res.exit_code == 0, res.output
    outcome = _read_json(tmp_path / "outcome.json")
    assert outcome["status"] == "converged"
    assert outcome["w_star"] == "0"
    assert outcome["common_fixed_point"] == "0"
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["w_label"] == "1/3"
    ds = [float(r["d_n"]) for r in rows[1:]]
    for a, b in zip(ds, ds[1:]):
        assert b <= math.sqrt(1.0 / 3.0) * a * (1 + 1e-12) + 1e-15
    assert all(r["edge_ok"] == "true" for r in rows)


def test_iterate_budget_zero(runner, tmp_path):
    res = runner.invoke(
        main, ["--out", str(tmp_path), "iterate", "example-3-3", "--max-iter", "0"]
    )
    assert res.exit_code == 3


def test_iterate_problem_file_matches_oracle(runner, tmp_path):
    rng = random.Random(8)
    problem = random_ladder_problem(rng)
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(problem_to_dict(problem)))
    res = runner.invoke(main, ["--out", str(tmp_path), "iterate", str(path)])
    assert res.exit_code == 0, res.output
    outcome = _read_json(tmp_path / "outcome.json")
    cs = enumerate_coincidence_points(problem.space, problem.f, problem.F)
    assert outcome["w_star"] in cs.coincidence


def test_iterate_start_override(runner, tmp_path):
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "iterate", "example-3-3",
         "--w0", "1/9", "--p0", "1/81"],
    )
    assert res.exit_code == 0
    outcome = _read_json(tmp_path / "outcome.json")
    assert outcome["w_star"] == "0"


def test_bernstein_square_limit(runner, tmp_path):
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "bernstein", "--n", "5", "--q", "0.9",
         "--phi", "square"],
    )
    assert res.exit_code == 0, res.output
    with open(tmp_path / "bernstein.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 101
    for r in rows:
        assert abs(float(r["limit"]) - float(r["a"])) <= 1e-8
    summary = _read_json(tmp_path / "summary.json")
    assert summary["converged"] is True
    assert 0.0 < summary["b_nq"] < 1.0


def test_bernstein_phi_file(runner, tmp_path):
    samples = [[a, a * a] for a in np.linspace(0.0, 1.0, 201)]
    phi_path = tmp_path / "phi.json"
    phi_path.write_text(json.dumps(samples))
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "bernstein", "--n", "4", "--q", "1.1",
         "--phi", "file", "--phi-file", str(phi_path)],
    )
    assert res.exit_code == 0, res.output


def test_fbvp_sin_forcing(runner, tmp_path):
    res = runner.invoke(
        main, ["--out", str(tmp_path), "fbvp", "--beta", "2", "--forcing", "sin-pi"]
    )
    assert res.exit_code == 0, res.output
    with open(tmp_path / "solution.csv") as fh:
        rows = list(csv.DictReader(fh))
    err = max(
        abs(float(r["u_star"]) - math.sin(math.pi * float(r["b"]))) for r in rows
    )
    assert err <= 1e-5
    report = _read_json(tmp_path / "report.json")
    assert report["converged"] is True
    assert report["iterations"] == 1


def test_fbvp_linear_w(runner, tmp_path):
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "fbvp", "--beta", "1.5", "--forcing", "linear-w"],
    )
    assert res.exit_code == 0
    report = _read_json(tmp_path / "report.json")
    assert report["residual"] <= 1e-8


def test_fbvp_forcing_file_expression(runner, tmp_path):
    forcing = tmp_path / "forcing.json"
    forcing.write_text(json.dumps({"expr": "0.25*sin(w) + b", "gauge_sup": 0.25}))
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "fbvp", "--beta", "1.5", "--forcing", "file",
         "--forcing-file", str(forcing)],
    )
    assert res.exit_code == 0, res.output
    report = _read_json(tmp_path / "report.json")
    assert report["residual"] <= 1e-8


def test_fbvp_forcing_file_rejects_unknown_names(runner, tmp_path):
    forcing = tmp_path / "forcing.json"
    forcing.write_text(json.dumps({"expr": "__import__('os')"}))
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "fbvp", "--beta", "1.5", "--forcing", "file",
         "--forcing-file", str(forcing)],
    )
    assert res.exit_code == 2


def test_sweep_fans_out(runner, tmp_path):
    spec = [
        {"subcommand": "verify", "input": "identity", "params": {}},
        {"subcommand": "bernstein",
         "params": {"n": 3, "q": 1.0, "phi": "square"}},
    ]
    spec_path = tmp_path / "sweep.json"
    spec_path.write_text(json.dumps(spec))
    res = runner.invoke(
        main, ["--out", str(tmp_path), "sweep", str(spec_path), "--jobs", "2"]
    )
    assert res.exit_code == 0, res.output
    summary = _read_json(tmp_path / "sweep.json")
    assert [r["exit_code"] for r in summary["runs"]] == [0, 0]
    assert os.path.exists(tmp_path / "run-000" / "report.json")
    assert os.path.exists(tmp_path / "run-001" / "summary.json")


def test_json_format_for_tables(runner, tmp_path):
    res = runner.invoke(
        main,
        ["--out", str(tmp_path), "--format", "json", "iterate", "example-3-3"],
    )
    assert res.exit_code == 0
    trace = _read_json(tmp_path / "trace.json")
    assert trace[0]["w_label"] == "1/3"
    assert trace[1]["d_n"] == 2.0 / 27.0


def test_full_precision_serialization(runner, tmp_path):
    assert format_float(1.0 / 3.0) == "0.33333333333333331"
    assert float(format_float(0.1)) == 0.1
    text = json_dumps({"x": 2.0 / 27.0, "flag": True, "none": float("nan")})
    assert "0.07407407407407407" in text
    assert float("0.07407407407407407") == 2.0 / 27.0
    assert '"flag": true' in text and '"none": null' in text
    res = runner.invoke(
        main, ["--out", str(tmp_path), "verify", "example-3-3", "--kamran"]
    )
    raw = (tmp_path / "report.json").read_text()
    assert "0.33333333333333331" in raw  # H(F0, F1) at full precision
    # round-trips exactly
    parsed = _read_json(tmp_path / "report.json")
    pairs = {(w["v"], w["w"]): w for w in parsed["kamran"]["witnesses"]}
    assert pairs[("0", "1")]["H"] == 1.0 / 3.0


def test_seed_recorded_in_manifest(runner, tmp_path):
    res = runner.invoke(
        main, ["--out", str(tmp_path), "--seed", "77", "verify", "identity"]
    )
    assert res.exit_code == 0
    report = _read_json(tmp_path / "report.json")
    assert report["manifest"]["seed"] == 77
