import json
import subprocess
import sys

import pytest

from tactile_dome.cli import main, parse_depths, UsageError


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """Case 8 on a coarse grid, simulated, trained and evaluated once."""
    d = tmp_path_factory.mktemp("run")
    assert run("simulate", "--case", 8, "--grid", 6, "--test-count", 12, "--out", d) == 0
    assert run("train", d / "train.csv", "--out", d) == 0
    assert run("evaluate", d / "test.csv", "--model", d / "model.json", "--out", d) == 0
    return d


def test_parse_depths():
    assert parse_depths("0:3:0.5") == (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    assert parse_depths("1:1:1") == (1.0,)
    for bad in ("0:3:0", "0:3:-1", "0:3", "3:0:1", "0:4:1", "a:b:c"):
        with pytest.raises(UsageError):
            parse_depths(bad)


def test_gen_config_deterministic(tmp_path):
    assert run("gen-config", "--case", 8, "--out", tmp_path / "a") == 0
    assert run("gen-config", "--case", 8, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "config_case8.json").read_bytes()
    assert a == (tmp_path / "b" / "config_case8.json").read_bytes()
    cfg = json.loads(a)
    assert cfg["case"] == 8 and cfg["layout"] == "ring" and cfg["mounting_angle_deg"] == 35
    assert len(cfg["sensors"]) == 5


def test_bad_case_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run("gen-config", "--case", 11, "--out", tmp_path)
    assert info.value.code == 2
    assert "--case" in capsys.readouterr().err


def test_zero_depth_step(tmp_path, capsys):
    assert run("simulate", "--case", 8, "--depths", "0:3:0", "--out", tmp_path) == 2
    assert "step" in capsys.readouterr().err
    assert not (tmp_path / "train.csv").exists()


def test_simulate_defaults(tmp_path):
    assert run("simulate", "--case", 8, "--out", tmp_path) == 0
    train = (tmp_path / "train.csv").read_text().splitlines()
    test = (tmp_path / "test.csv").read_text().splitlines()
    assert train[0] == "A,B,depth_mm,contact,r1,r2,r3,r4,r5"
    rows = [r.split(",") for r in train[1:]]
    # per location: one non-touch row, then one row per depth in 0, 0.5, ..., 3
    assert len(rows) == 256 * (1 + 7)
    assert sum(r[3] == "0" for r in rows) == 256
    assert len({tuple(r.split(",")[:2]) for r in test[1:]}) == 100
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["files"]["train.csv"]["provenance"] == "surrogate"
    assert manifest["run_config"]["seeds"] == {"test_locations": 0, "shuffle": 0, "noise": 0}


def test_simulate_from_config_file(tmp_path):
    assert run("gen-config", "--case", 3, "--out", tmp_path) == 0
    out = tmp_path / "sim"
    assert run("simulate", "--config", tmp_path / "config_case3.json", "--grid", 4,
               "--test-count", 3, "--out", out) == 0
    assert json.loads((out / "manifest.json").read_text())["files"]["test.csv"]["case"] == 3


def test_outputs(small_run):
    model = json.loads((small_run / "model.json").read_text())
    assert model["meta"]["case"] == 8 and model["meta"]["provenance"] == "surrogate"
    search = json.loads((small_run / "search_report.json").read_text())
    assert len(search["grid"]) == 400 and search["k"] == 5
    report = json.loads((small_run / "report.json").read_text())
    assert report["summary"]["count"] == 12
    assert report["baseline"] is not None
    arrows = (small_run / "arrows.csv").read_text().splitlines()
    assert arrows[0] == "true_A,true_B,pred_A,pred_B,error_mm" and len(arrows) == 13


def test_corrupt_csv(small_run, tmp_path, capsys):
    lines = (small_run / "test.csv").read_text().splitlines()
    lines[5] = lines[5].replace(",", ",oops", 1)
    (tmp_path / "test.csv").write_text("\n".join(lines) + "\n")
    assert run("evaluate", tmp_path / "test.csv", "--model", small_run / "model.json",
               "--out", tmp_path) == 1
    assert ":6:" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


def test_empty_test_file(small_run, tmp_path, capsys):
    (tmp_path / "test.csv").write_text("A,B,depth_mm,contact,r1,r2,r3,r4,r5\n")
    assert run("evaluate", tmp_path / "test.csv", "--model", small_run / "model.json",
               "--out", tmp_path) == 1
    assert "empty dataset" in capsys.readouterr().err


def test_dome_mismatch(small_run, tmp_path, capsys):
    (tmp_path / "test.csv").write_text((small_run / "test.csv").read_text())
    assert run("evaluate", tmp_path / "test.csv", "--model", small_run / "model.json",
               "--radius-mm", 30, "--out", tmp_path) == 1
    assert "dome mismatch" in capsys.readouterr().err


def test_compare(small_run, tmp_path):
    other = json.loads((small_run / "report.json").read_text())
    other["case"] = 3
    other["summary"]["median_mm"] += 1.0
    (tmp_path / "r3.json").write_text(json.dumps(other))
    assert run("compare", small_run / "report.json", tmp_path / "r3.json", "--out", tmp_path) == 0
    lines = (tmp_path / "comparison.csv").read_text().splitlines()
    assert lines[1].startswith("8,surrogate,") and lines[2].startswith("3,surrogate,")
    assert run("compare", small_run / "report.json", "--out", tmp_path) == 2
    assert run("compare", small_run / "report.json", small_run / "report.json",
               "--out", tmp_path) == 1


def test_sweep(tmp_path):
    assert run("sweep", "--case", 1, "--steps", 11, "--out", tmp_path) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "s,r1,r2,r3,r4,r5" and len(lines) == 12


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "tactile_dome", "gen-config", "--case", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "config_case1.json").exists()
