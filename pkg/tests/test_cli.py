import csv
import io
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ctrlcurv.report import (CSV_COLUMNS, RegionGrid, RegularityViolation, SystemFileError, cmd_check,
                             report_from_grid, system_from_dict)
from ctrlcurv.report.cli import main, parse_grid
from ctrlcurv.invariants import evaluate

SAMPLES = Path(__file__).resolve().parents[1] / "sample_systems"


def run(argv, capsys):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, doc, name="sys.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# ------------------------------------------------------------------ loading

def test_load_flat_riemannian():
    loaded = system_from_dict({"kind": "riemannian", "e1": ["1", "0"], "e2": ["0", "1"]})
    assert loaded.system.kind == "riemannian"


def test_load_closing_cozermelo():
    loaded = system_from_dict({"kind": "cozermelo", "e1": ["1", "0"], "e2": ["0", "1"], "ups": ["2*q1", "2*q2"],
                               "region": {"q1": [-0.2, 0.2], "q2": [-0.2, 0.2]}})
    assert loaded.system.cozermelo is not None


def test_load_rejects_degenerate():
    with pytest.raises(RegularityViolation) as info:
        system_from_dict({"kind": "general", "f": ["cos(u)", "0"]})
    assert "w2" in str(info.value)


@pytest.mark.parametrize("doc, path", [
    ({"kind": "riemannian", "e1": ["1", "0"]}, "<root>"),
    ({"kind": "general", "f": ["cos(u)"]}, "f"),
    ({"kind": "general", "f": ["cos(u)", "sin(u)"], "control": {"type": "interval", "lo": 0}}, "control"),
    ({"kind": "zermelo", "e1": ["1", "0"], "e2": ["0", "u"], "drift": ["0", "0"]}, "e2[1]"),
    ({"kind": "general", "f": ["cos(u", "sin(u)"]}, "f[0]"),
])
def test_schema_errors_report_paths(doc, path):
    with pytest.raises(SystemFileError) as info:
        system_from_dict(doc)
    assert info.value.path.startswith(path)


def test_every_sample_loads():
    from ctrlcurv.report import load_system

    for p in sorted(SAMPLES.glob("*.json")):
        if p.stem.startswith("degenerate"):
            with pytest.raises(RegularityViolation):
                load_system(p)
        else:
            assert load_system(p).name == p.stem


# ------------------------------------------------------------------ commands

def test_invariants_csv_columns_and_values(capsys):
    code, out, _ = run(["invariants", SAMPLES / "flat_riemannian.json", "--grid=-1:1,-1:1,3", "--u-samples", 16],
                       capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 9 * 16
    kappa = np.array([float(r[5]) for r in rows[1:]])
    assert np.max(np.abs(kappa)) < 1e-8 and all(r[-1] == "ok" for r in rows[1:])


def test_invariants_json(capsys):
    code, out, _ = run(["invariants", SAMPLES / "sphere_chart.json", "--nq", 3, "--u-samples", 8, "--format",
                        "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["columns"] == list(CSV_COLUMNS)
    assert all(abs(r["kappa"] - 1) < 1e-4 for r in doc["rows"])


def test_invariants_closing_example(capsys):
    code, out, _ = run(["invariants", SAMPLES / "cozermelo_closing.json", "--grid=-0.3:0.3,-0.3:0.3,3",
                        "--u-samples", 8], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    q1, q2, u, k = (np.array([float(r[c]) for r in rows]) for c in ("q1", "q2", "u", "kappa"))
    assert np.max(np.abs(k * (1 + 2 * q1 * np.cos(u) + 2 * q2 * np.sin(u)) ** 4 / 3 - 1)) < 1e-3


def test_output_is_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        dest = tmp_path / f"o{k}.csv"
        run(["invariants", SAMPLES / "ellipse_general.json", "--nq", 3, "--u-samples", 8, "--out", dest], capsys)
        outs.append(dest.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("name, thm1, thm2", [("zermelo_constant_drift", True, True),
                                              ("zermelo_shear", False, False),
                                              ("cozermelo_closing", False, False)])
def test_check_verdicts(name, thm1, thm2, capsys):
    code, out, _ = run(["check", SAMPLES / f"{name}.json", "--nq", 3, "--u-samples", 8], capsys)
    doc = json.loads(out)
    assert code == 0
    assert (doc["verdict_thm1"], doc["verdict_thm2"]) == (thm1, thm2)
    for key in ("sup_kappa", "sup_Lhb", "sup_Lvhb", "excluded", "threshold", "caveat"):
        assert key in doc


def test_verdicts_monotone_in_threshold():
    from ctrlcurv.report.battery import flat_zermelo

    g = evaluate(flat_zermelo("0.1*q2", "0"), *RegionGrid((-0.2, 0.2), (-0.2, 0.2), 3, 8).points(
        flat_zermelo("0", "0").control), level="verdict")
    prev = (False, False)
    for tol in np.logspace(-12, 1, 40):
        r = report_from_grid(g, tol)
        assert not r.verdict_thm2 or r.verdict_thm1
        assert (r.verdict_thm1, r.verdict_thm2) >= prev
        prev = (r.verdict_thm1, r.verdict_thm2)
    assert prev == (True, True)


def test_unreliable_report_exit_code(tmp_path, capsys):
    # phi <= 0 on most of this region: samples are excluded
    p = write(tmp_path, {"kind": "cozermelo", "e1": ["1", "0"], "e2": ["0", "1"], "ups": ["2*q1", "2*q2"],
                         "region": {"q1": [-0.1, 0.1], "q2": [-0.1, 0.1]}})
    code, out, _ = run(["check", p, "--grid=2:3,2:3,3", "--u-samples", 8], capsys)
    doc = json.loads(out)
    assert code == 3 and doc["reliable"] is False and doc["excluded"] > 0.2 * doc["samples"]


def test_extremals_flat_rays(tmp_path, capsys):
    code, out, _ = run(["extremals", SAMPLES / "flat_riemannian.json", "--angles", 8, "--t-end", 0.5, "--out",
                        tmp_path], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())["trajectories"]
    assert len(summary) == 8
    for entry in summary:
        rows = np.loadtxt(tmp_path / entry["file"], delimiter=",", skiprows=1)
        d = rows[:, 1:3] - rows[0, 1:3]
        direction = np.array([np.cos(entry["u0"]), np.sin(entry["u0"])])
        assert np.max(np.abs(d[:, 0] * direction[1] - d[:, 1] * direction[0])) < 1e-9


def test_extremals_explicit_ic(capsys):
    code, out, _ = run(["extremals", SAMPLES / "sphere_chart.json", "--ic", "1.0,0.0,0.7", "--t-end", 0.3], capsys)
    assert code == 0 and json.loads(out)["trajectories"][0]["status"] == "ok"


def test_generate(capsys):
    code, out, err = run(["generate", SAMPLES / "moser_polynomial.json", "--nq", 3, "--u-samples", 8, "--check",
                          "--format", "json"], capsys)
    summary = json.loads(out)["summary"]
    assert code == 0
    assert summary["sup_bracket"] < 1e-6 and summary["sup_kappa"] < 1e-4
    assert summary["report"]["verdict_thm1"] is True


# ------------------------------------------------------------------ errors and exit codes

def test_usage_errors_exit_1(tmp_path, capsys):
    assert run(["invariants"], capsys)[0] == 1
    assert run(["invariants", tmp_path / "missing.json"], capsys)[0] == 1
    assert run(["invariants", SAMPLES / "flat_riemannian.json", "--nq", 2], capsys)[0] == 1
    assert run(["invariants", SAMPLES / "flat_riemannian.json", "--grid", "1:2"], capsys)[0] == 1
    assert run(["generate", SAMPLES / "flat_riemannian.json"], capsys)[0] == 1
    assert run(["check", SAMPLES / "moser_rotation.json"], capsys)[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(["check", bad], capsys)
    assert code == 1 and "invalid JSON" in err


def test_regularity_violation_exit_1(capsys):
    code, _, err = run(["check", SAMPLES / "degenerate_segment.json"], capsys)
    assert code == 1 and "regularity" in err


def test_numerical_failure_exit_2(tmp_path, capsys):
    # the indicatrix collapses at q1 = 1, reached at t = 2 along u = 0
    p = write(tmp_path, {"kind": "general", "f": ["sqrt(1 - q1)*cos(u)", "sin(u)"]})
    code, out, _ = run(["extremals", p, "--ic", "0,0,0", "--t-end", 3], capsys)
    assert code == 2 and json.loads(out)["trajectories"][0]["status"] != "ok"


def test_parse_grid():
    assert parse_grid("-1:1,0:2,5") == ((-1.0, 1.0), (0.0, 2.0), 5)
    assert parse_grid("-1:1,0:2")[2] is None


def test_selftest_quick(tmp_path):
    out = tmp_path / "summary.json"
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "ctrlcurv.report.cli", "selftest", "--quick", "--out", str(out)],
                          capture_output=True, text=True)
    assert time.perf_counter() - t0 < 30
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(out.read_text())
    assert doc["passed"] and doc["quick"]
    assert all(line.startswith("[PASS]") for line in proc.stderr.splitlines())


def test_selftest_detects_injected_fault(capsys):
    code, out, err = run(["selftest", "--quick", "--inject-fault", "b-sign"], capsys)
    assert code == 2
    assert "[FAIL] lemma residual small" in err
    assert json.loads(out)["passed"] is False
