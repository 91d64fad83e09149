import json
from pathlib import Path

import numpy as np
import pytest

from snapnet.cli import EXIT_MAX_EVALS, EXIT_PARSE, EXIT_VALIDATION, main
from snapnet.scenario import load_scenario


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def dome_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("dome")
    assert run(["simulate", "single_dome", "--out-dir", str(out)]) == 0
    return out


def test_simulate_writes_artifacts(dome_out):
    for name in ("trace.csv", "events.csv", "tips.csv", "manifest.json"):
        assert (dome_out / name).exists()
    man = json.loads((dome_out / "manifest.json").read_text())
    assert set(man["artifacts"]) == {"trace.csv", "events.csv", "tips.csv"}
    assert man["command"] == "simulate"


def test_simulate_deterministic_outputs(dome_out, tmp_path):
    out2 = tmp_path / "again"
    assert run(["simulate", "single_dome", "--out-dir", str(out2)]) == 0
    for name in ("trace.csv", "events.csv", "tips.csv", "manifest.json"):
        assert (dome_out / name).read_bytes() == (out2 / name).read_bytes()


def test_manifest_hash_tracks_input_bytes(tmp_path):
    sc_path = tmp_path / "sc.json"
    _, raw = load_scenario("single_dome")
    sc_path.write_bytes(raw)
    out1 = tmp_path / "o1"
    assert run(["simulate", str(sc_path), "--out-dir", str(out1)]) == 0
    man1 = json.loads((out1 / "manifest.json").read_text())

    # any changed input byte must change the scenario hash
    doc = json.loads(raw)
    doc["seed"] = 1
    sc_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    out2 = tmp_path / "o2"
    assert run(["simulate", str(sc_path), "--out-dir", str(out2)]) == 0
    man2 = json.loads((out2 / "manifest.json").read_text())
    assert man1["scenario_sha256"] != man2["scenario_sha256"]


def test_empty_scenario_exits_2(tmp_path, capsys):
    bad = tmp_path / "empty.json"
    bad.write_text("{}\n")
    assert run(["simulate", str(bad), "--out-dir", str(tmp_path / "o")]) == EXIT_PARSE
    assert "network" in capsys.readouterr().err


def test_unknown_field_exits_2(tmp_path, capsys):
    _, raw = load_scenario("single_dome")
    doc = json.loads(raw)
    doc["network"]["elements"][0]["p_snap_thru_mbar"] = 40.0  # typo
    bad = tmp_path / "typo.json"
    bad.write_text(json.dumps(doc))
    assert run(["simulate", str(bad), "--out-dir", str(tmp_path / "o")]) == EXIT_PARSE
    assert "p_snap_thru_mbar" in capsys.readouterr().err


def test_validation_error_exits_3(tmp_path):
    _, raw = load_scenario("single_dome")
    doc = json.loads(raw)
    doc["network"]["edges"] = [
        {"from": "chamber", "to": "ghost", "resistance_mbar_s_per_ml": 1.0}
    ]
    bad = tmp_path / "dangling.json"
    bad.write_text(json.dumps(doc))
    assert run(["simulate", str(bad), "--out-dir", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_sweep_single_frequency(tmp_path):
    out = tmp_path / "sw"
    assert run(["sweep", "freq_sweep", "--freqs", "1", "--out-dir", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "f_hz,speed_mm_s,stride_mm,regime,bl_per_s"
    assert len(lines) == 2
    fields = lines[1].split(",")
    assert abs(float(fields[1]) - 5.13) < 0.1
    assert fields[3] == "WALKING"


def test_sweep_empty_freqs_exits_2(tmp_path):
    assert run(
        ["sweep", "freq_sweep", "--freqs", "", "--out-dir", str(tmp_path / "o")]
    ) == EXIT_PARSE


def test_analyze_single_dome(dome_out, tmp_path):
    out = tmp_path / "an"
    assert run(["analyze", str(dome_out / "trace.csv"), "--out-dir", str(out)]) == 0
    hys = (out / "hysteresis.csv").read_text().strip().splitlines()
    ratio = float(hys[1].split(",")[2])
    assert abs(ratio - 0.366) < 0.02
    th = (out / "thresholds.csv").read_text()
    assert "SNAP_THROUGH" in th and "SNAP_BACK" in th


def test_analyze_is_idempotent(dome_out, tmp_path):
    out = tmp_path / "an1"
    assert run(["analyze", str(dome_out / "trace.csv"), "--out-dir", str(out)]) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert run(["analyze", str(dome_out / "trace.csv"), "--out-dir", str(out)]) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_analyze_sensor_log_thresholds_only(tmp_path, capsys):
    # synthetic external pressure log: time + mbar only
    t = np.linspace(0.0, 2.0, 1500)
    p = np.interp(t, [0.0, 0.6, 0.7, 1.0, 1.6, 1.7, 2.0],
                  [0.0, 41.0, 25.0, 55.0, -2.0, 3.0, 0.0])
    log = tmp_path / "sensor.csv"
    with open(log, "w") as fh:
        fh.write("t_s,p_probe_mbar\n")
        for ti, pi in zip(t, p):
            fh.write(f"{float(ti)!r},{float(pi)!r}\n")
    out = tmp_path / "an"
    assert run(["analyze", str(log), "--out-dir", str(out)]) == 0
    txt = capsys.readouterr().out
    assert "PV work skipped" in txt
    th = (out / "thresholds.csv").read_text()
    assert "SNAP_THROUGH" in th


def test_analyze_bad_schema_names_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t_s,not_a_column\n0.0,1.0\n")
    out = tmp_path / "o"
    assert run(["analyze", str(bad), "--out-dir", str(out)]) == EXIT_PARSE
    assert "not_a_column" in capsys.readouterr().err


def test_fit_roundtrip_and_self_consistency(tmp_path):
    # targets generated from the scenario's own parameters -> near-zero
    # residual and an emitted scenario that re-parses identically
    targets = {
        "free": [
            {"name": "network.elements.0.strong.p_snap_through_mbar",
             "lower": 39.0, "upper": 43.0},
        ],
        "targets": [
            {"name": "snap_through_mbar", "value": 41.0, "weight": 1.0,
             "scale": 41.0},
        ],
        "max_evals": 25,
        "ftol": 1e-6,
        "seed": 0,
    }
    tpath = tmp_path / "targets.json"
    tpath.write_text(json.dumps(targets))
    out = tmp_path / "fit"
    code = run(["fit", "single_dome", "--targets", str(tpath), "--out-dir", str(out)])
    assert code == 0
    report = json.loads((out / "fit_report.json").read_text())
    assert abs(report["residuals"]["snap_through_mbar"]) < 0.01

    fitted = out / "fitted_scenario.json"
    sc1, raw1 = load_scenario(fitted)
    from snapnet.scenario import dump_scenario

    assert dump_scenario(json.loads(raw1)) == raw1.decode()
    out2 = tmp_path / "sim_fitted"
    assert run(["simulate", str(fitted), "--out-dir", str(out2)]) == 0


def test_fit_infeasible_targets_exit_3(tmp_path, capsys):
    targets = {
        "free": [
            {"name": "network.elements.0.strong.p_snap_through_mbar",
             "lower": 39.0, "upper": 43.0},
        ],
        "targets": [
            {"name": "snap_through_mbar", "value": 41.0},
            {"name": "snap_back_mbar", "value": 50.0},
        ],
    }
    tpath = tmp_path / "bad_targets.json"
    tpath.write_text(json.dumps(targets))
    code = run(["fit", "single_dome", "--targets", str(tpath),
                "--out-dir", str(tmp_path / "o")])
    assert code == EXIT_VALIDATION
    assert "snap_back_mbar" in capsys.readouterr().err
