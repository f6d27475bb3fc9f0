import csv
import glob
import json
import math
import os
import re
import shutil
import subprocess
import sys

import numpy as np
import pytest

from extremal_steering.cli import main, parse_spec, SpecError

SPECS = os.path.join(os.path.dirname(__file__), os.pardir, "specs")
# case A has no converged solution and is exercised separately
ROUND_TRIP = sorted(os.path.basename(p)[:-5] for p in glob.glob(os.path.join(SPECS, "*.json"))
                    if not p.endswith("vdp_origin.json"))


def spec_path(name):
    return os.path.join(SPECS, name + ".json")


def run(argv):
    """``main`` with argparse exits turned into return codes."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    """Steer every round-trip spec once; maps name to (exit code, out dir)."""
    root = tmp_path_factory.mktemp("steer")
    out = {}
    for name in ROUND_TRIP:
        d = str(root / name)
        out[name] = (main(["steer", spec_path(name), "--out", d]), d)
    return out


# --- steer -----------------------------------------------------------------------


def test_dubins2d_three_pi_has_cscc(solved):
    code, d = solved["dubins2d_3pi"]
    assert code == 0
    with open(os.path.join(d, "summary.json")) as fh:
        records = json.load(fh)["records"]
    assert "CSCC" in [r["structure"] for r in records]
    for r in records:
        assert abs(r["total_length"] - 3 * math.pi) <= 1e-10
        assert math.isfinite(r["residual_norm"])


def test_vdp_origin_case_has_no_converged_solution(tmp_path, capsys):
    # the target is not reachable in time 4 from (2, 2); see the closest-approach test
    code = main(["steer", spec_path("vdp_origin"), "--out", str(tmp_path)])
    assert code == 2
    with open(tmp_path / "summary.json") as fh:
        assert json.load(fh)["records"] == []
    assert "no solution converged" in capsys.readouterr().err


def test_missing_t_is_rejected(tmp_path, capsys):
    spec = {"system": "vdp", "chi_i": "default", "chi_f": [0.0, 0.0]}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(spec))
    assert main(["steer", str(p), "--out", str(tmp_path / "out")]) == 1
    assert "T" in capsys.readouterr().err


@pytest.mark.parametrize("patch,field", [
    ({"system": "boat"}, "system"),
    ({"T": -1.0}, "T"),
    ({"chi_f": [0.0]}, "chi_f"),
    ({"chi_f": ["free", "free"]}, "chi_f"),
    ({"solver": {"starts": 0}}, "solver.starts"),
    ({"solver": {"colour": 1}}, "solver.colour"),
])
def test_spec_errors_name_the_field(patch, field):
    spec = {"system": "vdp", "chi_f": [0.0, 0.0], "T": 4.0}
    spec.update(patch)
    with pytest.raises(SpecError, match=re.escape(field)):
        parse_spec(spec)


def test_unreadable_spec(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["steer", str(p), "--out", str(tmp_path)]) == 1


def test_free_sentinel_round_trips_through_summary(solved):
    _, d = solved["vdp_free_x2_origin"]
    with open(os.path.join(d, "summary.json")) as fh:
        assert json.load(fh)["spec"]["chi_f"] == [0.0, "free"]


def test_trajectory_times_strictly_increase(solved):
    for name, (code, d) in solved.items():
        assert code == 0, name
        files = glob.glob(os.path.join(d, "trajectory_*.csv"))
        assert files, name
        for f in files:
            header, data = read_csv(f)
            assert header[0] in ("t", "s")
            assert np.all(np.diff(data[:, 0]) > 0), f


def test_svg_resolves_arcs(solved):
    _, d = solved["dubins2d_3pi"]
    with open(os.path.join(d, "summary.json")) as fh:
        records = json.load(fh)["records"]
    with open(os.path.join(d, "plot.svg")) as fh:
        svg = fh.read()
    polylines = re.findall(r'points="([^"]*)"', svg)
    assert len(polylines) == len(records)
    for rec, pts in zip(records, polylines):
        n_seg = len(pts.split()) - 1
        turned = sum(p["length"] for w in rec["words"] for p in w if p["kind"] != "S")
        assert n_seg >= 64 * turned


# --- verify ----------------------------------------------------------------------


def test_round_trip_verifies(solved, capsys):
    for name, (_, d) in solved.items():
        assert main(["verify", os.path.join(d, "summary.json")]) == 0, name
    assert "FAIL" not in capsys.readouterr().out


def test_edited_tau_fails_verification(solved, tmp_path, capsys):
    _, d = solved["vdp_offset"]
    with open(os.path.join(d, "summary.json")) as fh:
        summary = json.load(fh)
    summary["records"][0]["tau"] += 0.05
    p = tmp_path / "summary.json"
    p.write_text(json.dumps(summary))
    assert main(["verify", str(p)]) == 3
    assert "record(s): 0" in capsys.readouterr().err


def test_empty_summary_has_nothing_to_verify(tmp_path, capsys):
    spec = {"system": "dubins2d", "chi_f": [1.0, 0.0, 0.0], "T": 1.0}
    p = tmp_path / "summary.json"
    p.write_text(json.dumps({"spec": spec, "records": []}))
    assert main(["verify", str(p)]) == 0
    assert "nothing to verify" in capsys.readouterr().out


def test_verify_rejects_garbage(tmp_path):
    p = tmp_path / "summary.json"
    p.write_text("[]")
    assert main(["verify", str(p)]) == 1


# --- determinism -----------------------------------------------------------------


@pytest.mark.parametrize("name", ["vdp_offset", "dubins3d_words_2pi"])
def test_summary_identical_across_worker_counts(name, solved, tmp_path, monkeypatch):
    outs = []
    for workers in ("1", "4"):
        monkeypatch.setenv("EXTREMAL_STEERING_WORKERS", workers)
        d = tmp_path / workers
        assert main(["steer", spec_path(name), "--out", str(d)]) == 0
        outs.append(d)
    ref = solved[name][1]
    names = sorted(os.listdir(ref))
    assert names == sorted(os.listdir(outs[0])) == sorted(os.listdir(outs[1]))
    for f in names:
        if f == "metadata.json":
            continue
        blobs = [open(os.path.join(str(x), f), "rb").read() for x in (ref, *outs)]
        assert blobs[0] == blobs[1] == blobs[2], f


def test_console_script_runs(tmp_path):
    exe = shutil.which("extremal-steering")
    cmd = [exe] if exe else [sys.executable, "-m", "extremal_steering.cli"]
    r = subprocess.run(cmd + ["oracle", "--system", "vdp", "--t", "0.5", "--n", "5",
                              "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "cloud.csv").exists()


# --- oracle ----------------------------------------------------------------------


def test_oracle_zero_horizon_gives_origin_rows(tmp_path):
    assert main(["oracle", "--system", "dubins2d", "--t", "0", "--n", "10",
                 "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "cloud.csv")
    assert header == ["x", "y", "gamma"]
    np.testing.assert_array_equal(data, np.zeros((10, 3)))


@pytest.mark.parametrize("system", ["vdp", "dubins2d", "dubins3d"])
def test_oracle_fixed_seed_is_byte_identical(system, tmp_path):
    blobs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["oracle", "--system", system, "--t", "1.0", "--n", "200", "--seed", "5",
                     "--out", str(d)]) == 0
        blobs.append(((d / "cloud.csv").read_bytes(), (d / "report.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_oracle_vdp_continuity_holds(tmp_path):
    assert main(["oracle", "continuity", "--system", "vdp", "--t", "4", "--n", "2000",
                 "--chi-f", "0.6", "-0.9", "--delta", "0.05", "--steps", "6",
                 "--out", str(tmp_path)]) == 0
    with open(tmp_path / "report.json") as fh:
        rep = json.load(fh)
    assert rep["n_checked"] >= 1
    assert rep["all_hold"]


def test_oracle_coverage_report(tmp_path):
    assert main(["oracle", "coverage", "--system", "dubins2d", "--t", "0.5", "--n", "2000",
                 "--n-words", "10", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "report.json") as fh:
        rep = json.load(fh)
    assert rep["n_probed"] == 10
    assert rep["fraction_1e-6"] == 1.0


@pytest.mark.parametrize("argv", [
    ["oracle", "--system", "dubins2d", "--t", "1", "--n", "0"],
    ["oracle", "--system", "dubins2d", "--t", "-1", "--n", "5"],
    ["oracle", "--system", "boat", "--t", "1", "--n", "5"],
    ["oracle", "--system", "vdp", "--t", "1", "--n", "5", "--origin", "1", "2", "3"],
    ["oracle", "coverage", "--system", "vdp", "--t", "1", "--n", "5"],
    ["oracle", "continuity", "--system", "vdp", "--t", "1", "--n", "5"],
])
def test_oracle_bad_flags_exit_one(argv, tmp_path):
    assert run(argv + ["--out", str(tmp_path)]) == 1
