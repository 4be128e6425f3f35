"""End-to-end command-line tests driven through the in-process entry point."""

from __future__ import annotations

import csv
import json

import pytest

from uniformizer.cli import run


@pytest.fixture(scope="module")
def dom_file(tmp_path_factory):
    """A half-strip domain JSON written through the CLI itself."""
    path = tmp_path_factory.mktemp("cli") / "strip.json"
    code = run(
        ["example", "--name", "half_strip", "--h", "0.25", "--H", "16", "--out", str(path)]
    )
    assert code == 0
    return str(path)


def test_example_output(dom_file, capsys, tmp_path):
    with open(dom_file) as fh:
        payload = json.load(fh)
    assert len(payload["vertices"]) == 585
    nu_path = tmp_path / "nu.json"
    code = run(
        [
            "example", "--name", "half_strip", "--h", "0.25", "--H", "16",
            "--out", str(tmp_path / "again.json"), "--nu", str(nu_path),
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "585 vertices" in out
    nu = json.loads(nu_path.read_text())
    assert nu["theta"] == 1.0
    assert len(nu["nu"]) == 9


def test_example_missing_level(tmp_path, capsys):
    code = run(
        [
            "example", "--name", "cantor_slit", "--h", "0.25", "--H", "8",
            "--out", str(tmp_path / "x.json"),
        ]
    )
    err = capsys.readouterr().err
    assert code == 2
    assert "error:" in err and "--level" in err


def test_validate_phi_exit_codes(capsys):
    assert run(["validate-phi", "--phi", "power:2"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "pass" in out
    assert run(["validate-phi", "--phi", "power:1"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_transform_infinity_toggle(dom_file, tmp_path):
    with_inf = tmp_path / "with.json"
    without = tmp_path / "without.json"
    assert run(["transform", "--domain", dom_file, "--phi", "power:2", "--out", str(with_inf)]) == 0
    assert (
        run(
            [
                "transform", "--domain", dom_file, "--phi", "power:2",
                "--no-infinity", "--out", str(without),
            ]
        )
        == 0
    )
    body_with = json.loads(with_inf.read_text())
    body_without = json.loads(without.read_text())
    # the extra vertex rides in its own block; the base vertex list is shared
    assert body_with["infinity"]["id"] == "infinity"
    assert all(e["length"] > 0 for e in body_with["infinity"]["edges"])
    assert "infinity" not in body_without
    assert body_with["vertices"] == body_without["vertices"]


def test_solve_writes_values(dom_file, tmp_path):
    out = tmp_path / "solve.json"
    code = run(
        ["solve", "--domain", dom_file, "--p", "2", "--data", "coord:y", "--out", str(out)]
    )
    assert code == 0
    body = json.loads(out.read_text())
    assert set(body) >= {"values", "energy", "iterations", "residual", "flags", "config"}
    assert body["values"]["v4_0"] == 0.0
    assert "at_infinity" not in body
    assert body["residual"] < 1e-6


def test_capacity_value(dom_file, capsys):
    code = run(
        [
            "capacity", "--domain", dom_file, "--p", "2",
            "--E", "v4_0,v4_1", "--F", "v4_8,v4_9",
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert out.startswith("capacity: ")
    assert float(out.split()[1]) == pytest.approx(0.35333532999822276, rel=1e-9)


def test_modulus_value_and_budget(dom_file, tmp_path):
    out = tmp_path / "mod.json"
    code = run(
        [
            "modulus", "--domain", dom_file, "--p", "2",
            "--E", "v4_0", "--F", "v4_8", "--max-paths", "40", "--out", str(out),
        ]
    )
    assert code == 0
    body = json.loads(out.read_text())
    assert body["value"] == pytest.approx(0.1415912155593788, rel=1e-9)
    assert body["paths_used"] == 40
    assert any("path-budget" in f for f in body["flags"])


def test_capacity_unknown_vertex(dom_file, capsys):
    code = run(["capacity", "--domain", dom_file, "--E", "zz", "--F", "v4_8"])
    err = capsys.readouterr().err
    assert code == 2
    assert err.startswith("error:")


def test_classify_smoke(dom_file, tmp_path, capsys):
    out = tmp_path / "cls.json"
    code = run(
        ["classify", "--domain", dom_file, "--phi", "power:2", "--p", "2", "--out", str(out)]
    )
    stdout = capsys.readouterr().out
    assert code == 0
    assert "Parabolic" in stdout
    body = json.loads(out.read_text())
    assert body["report"]["verdict"] == "Parabolic"
    assert len(body["report"]["shells"]) == 4


def test_verify_exit_codes_and_csv(dom_file, tmp_path, capsys):
    out = tmp_path / "rows.csv"
    ok = run(
        [
            "verify", "--check", "doubling", "--domain", dom_file,
            "--radii", "0.5,1.0", "--bound", "20", "--out", str(out),
        ]
    )
    assert ok == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["check", "params", "value", "pass"]
    assert rows[1][0] == "doubling" and rows[1][3] == "True"
    capsys.readouterr()
    bad = run(
        [
            "verify", "--check", "doubling", "--domain", dom_file,
            "--radii", "0.5,1.0", "--bound", "1.5",
        ]
    )
    assert bad == 1
    assert "pass=False" in capsys.readouterr().out


def test_report_merge(dom_file, tmp_path):
    good = tmp_path / "good.json"
    bad = tmp_path / "bad.json"
    merged = tmp_path / "merged.json"
    run(
        [
            "verify", "--check", "doubling", "--domain", dom_file,
            "--radii", "0.5,1.0", "--bound", "20", "--out", str(good),
        ]
    )
    run(
        [
            "verify", "--check", "doubling", "--domain", dom_file,
            "--radii", "0.5,1.0", "--bound", "1.5", "--out", str(bad),
        ]
    )
    assert run(["report", "--inputs", str(good), "--out", str(merged)]) == 0
    assert json.loads(merged.read_text())["pass"] is True
    assert run(["report", "--inputs", str(good), str(bad), "--out", str(merged)]) == 1
    body = json.loads(merged.read_text())
    assert body["pass"] is False
    assert len(body["runs"]) == 2


def test_report_determinism_modulo_timestamp(dom_file, tmp_path):
    out = tmp_path / "cap.json"
    argv = [
        "capacity", "--domain", dom_file, "--p", "2",
        "--E", "v4_0,v4_1", "--F", "v4_8,v4_9", "--out", str(out),
    ]
    assert run(argv) == 0
    first = json.loads(out.read_text())
    assert run(argv) == 0
    second = json.loads(out.read_text())
    first.pop("timestamp")
    second.pop("timestamp")
    assert first == second
    assert first["config_hash"] == second["config_hash"]
