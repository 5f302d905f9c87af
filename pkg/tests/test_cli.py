from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from detevans.cli import (EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_NO_CONNECTION, EXIT_OK,
                          EXIT_UNSTABLE, build_parser, main, resolve)
from detevans.model import ModelParams
from detevans.sweep import NO_CONNECTION, RunRecord, persist, read_records

COMMON_FLAGS = ("--q", "--D", "--EA", "--uig", "--uplus", "--tol", "--n0", "--indent",
                "--radius-margin", "--config", "--out")


def _run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_profile_tame(tmp_path, capsys):
    code, out, _ = _run(["profile", "--q", "0.499", "--D", "1", "--EA", "1", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    k = float(next(line for line in out.splitlines() if line.startswith("k_found")).split()[1])
    assert abs(k - 8.177) <= 0.05 * 8.177
    assert "validation passed" in out
    with open(tmp_path / "profile.csv") as fh:
        assert next(csv.reader(fh)) == ["xi", "u", "z", "y"]
    assert json.loads((tmp_path / "profile.json").read_text())["k_found"] == pytest.approx(k, rel=1e-9)


@pytest.mark.parametrize("argv, fragment", [
    (["profile", "--q", "0.6"], "physical range"),
    (["profile", "--q", "0", "--D", "1", "--EA", "1"], "degenerate"),
    (["profile", "--D", "-1"], "D must be positive"),
    (["profile", "--uig", "0.99"], "ignition threshold"),
    (["evans", "--radius", "0"], "radius"),
    (["evans", "--n0", "3"], "n0"),
    (["sweep", "--q-values", "0.4,0.4"], "duplicates"),
    (["sweep", "--jobs", "0"], "jobs"),
])
def test_invalid_input_exits_one(argv, fragment, tmp_path, capsys):
    code, _, err = _run(argv + ["--out", str(tmp_path)], capsys)
    assert code == EXIT_INVALID
    assert fragment in err


def test_evans_tame_is_stable(tmp_path, capsys):
    code, out, _ = _run(["evans", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert "winding 0, verdict Stable" in out
    assert any(line.startswith("L ") and " R " in line for line in out.splitlines())
    assert (tmp_path / "contour.csv").exists()


def test_evans_synthetic_zero_is_unstable(tmp_path, capsys):
    code, out, _ = _run(["evans", "--synthetic-zero", "0.5", "--out", str(tmp_path)], capsys)
    assert code == EXIT_UNSTABLE
    assert "verdict Unstable(1)" in out


def test_evans_reuses_saved_profile(tmp_path, capsys):
    assert main(["profile", "--profile-out", str(tmp_path / "p.json"), "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    code, out, _ = _run(["evans", "--profile-in", str(tmp_path / "p.json"), "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK and "verdict Stable" in out
    code, _, err = _run(["evans", "--profile-in", str(tmp_path / "missing.json")], capsys)
    assert code == EXIT_INVALID and "cannot read profile" in err


def test_help_lists_every_flag(capsys):
    for command, extra in (("profile", ("--profile-out",)),
                           ("evans", ("--profile-in", "--profile-out", "--radius", "--synthetic-zero")),
                           ("sweep", ("--grid", "--q-values", "--EA-values", "--D-values",
                                      "--resume", "--jobs"))):
        assert main([command, "--help"]) == EXIT_OK
        text = capsys.readouterr().out
        for flag in COMMON_FLAGS + extra:
            assert flag in text, (command, flag)
    assert main(["report", "--help"]) == EXIT_OK
    assert "--out" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["profile", "--bogus", "1"], ["nonsense"], [], ["profile", "--q", "abc"]])
def test_unknown_or_malformed_arguments_rejected(argv, capsys):
    assert main(argv) == EXIT_INVALID
    assert capsys.readouterr().err


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[model]\nq = 0.45\nD = 2\n[contour]\nn0 = 60\n[output]\nout = from_config\n")
    parser = build_parser()
    c = resolve(parser.parse_args(["evans", "--config", str(cfg), "--D", "3"]))
    assert c.params.q == 0.45 and c.params.D == 3.0 and c.params.E_A == 1.0
    assert c.evans.n0 == 60
    assert str(c.out_dir) == "from_config"
    monkeypatch.setenv("DETEVANS_OUT", str(tmp_path / "env"))
    c = resolve(parser.parse_args(["profile"]))
    assert c.out_dir == tmp_path / "env"
    c = resolve(parser.parse_args(["profile", "--out", "flag_dir"]))
    assert str(c.out_dir) == "flag_dir"
    monkeypatch.delenv("DETEVANS_OUT")
    assert str(resolve(parser.parse_args(["profile"])).out_dir) == "detevans_out"


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[model]\nqq = 0.4\n")
    code, _, err = _run(["profile", "--config", str(cfg)], capsys)
    assert code == EXIT_INVALID and "unknown config entry" in err


def test_no_connection_exit_code(tmp_path, capsys, monkeypatch):
    from detevans import cli
    from detevans.profile import NoConnection

    def fail(*_args, **_kwargs):
        raise NoConnection("forced")

    monkeypatch.setattr(cli, "solve_profile", fail)
    code, _, err = _run(["profile", "--out", str(tmp_path)], capsys)
    assert code == EXIT_NO_CONNECTION and "no connection" in err


def test_single_point_sweep_matches_profile_and_evans(tmp_path, capsys):
    out = tmp_path / "single"
    code, _, _ = _run(["sweep", "--grid", "single", "--q", "0.45", "--out", str(out)], capsys)
    assert code == EXIT_OK
    (rec,) = read_records(out)
    code, text, _ = _run(["evans", "--q", "0.45", "--out", str(tmp_path / "e")], capsys)
    assert code == EXIT_OK
    k = float(next(line for line in text.splitlines() if line.startswith("k_found")).split()[1])
    assert abs(rec.k_found / k - 1) < 1e-6
    assert f"winding {rec.winding}, verdict {rec.verdict.label}" in text


def test_sweep_resume_and_report(tmp_path, capsys):
    out = tmp_path / "grid"
    argv = ["sweep", "--q-values", "0.499,0.45", "--EA-values", "1", "--D-values", "1,2",
            "--out", str(out)]
    assert main(argv) == EXIT_OK
    first = (out / "summary.csv").read_bytes()
    capsys.readouterr()
    code, text, _ = _run(argv + ["--resume"], capsys)
    assert code == EXIT_OK
    # completed points are not recomputed, so no progress lines are printed
    assert "q=" not in text
    assert (out / "summary.csv").read_bytes() == first
    code, text, _ = _run(["report", "--out", str(out)], capsys)
    assert code == EXIT_OK and text.count("Stable") == 4


def test_report_replays_exit_codes(tmp_path, capsys):
    failed = RunRecord(ModelParams(q=0.3), NO_CONNECTION)
    persist([failed], tmp_path / "a")
    assert main(["report", "--out", str(tmp_path / "a")]) == EXIT_OK
    rec = json.loads((tmp_path / "a" / "records.jsonl").read_text())
    rec.update(profile_status="Converged", winding=0,
               verdict={"kind": "Inconclusive", "winding": 0, "certified": False})
    (tmp_path / "b").mkdir()
    (tmp_path / "b" / "records.jsonl").write_text(json.dumps(rec) + "\n")
    assert main(["report", "--out", str(tmp_path / "b")]) == EXIT_INCONCLUSIVE
    assert main(["report", "--out", str(tmp_path / "empty")]) == EXIT_INVALID
    capsys.readouterr()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "detevans", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for command in ("profile", "evans", "sweep", "report"):
        assert command in res.stdout
