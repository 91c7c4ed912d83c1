import json
import math

import numpy as np
import pytest

from blindtomo import bench, cli


def tiny_gue_config(**over):
    cfg = bench.default_config("gue-phase")
    cfg.update({"n": 3, "d": 4, "s": 2, "m_values": [40, 60],
                "trials_per_m": 2, "record_wall_time": False})
    cfg["sdt"]["max_iters"] = 80
    cfg.update(over)
    return cfg


def test_default_config_known_experiments():
    for experiment in bench.EXPERIMENTS:
        cfg = bench.default_config(experiment)
        assert cfg["experiment"] == experiment
        bench.validate_config(cfg)
    with pytest.raises(bench.ConfigError):
        bench.default_config("bogus")


def test_merge_config_rejects_unknown_keys():
    cfg = bench.default_config("gue-phase")
    merged = bench.merge_config(cfg, {"sdt": {"max_iters": 10}})
    assert merged["sdt"]["max_iters"] == 10
    assert cfg["sdt"]["max_iters"] == 2500  # original untouched
    with pytest.raises(bench.ConfigError, match="bogus"):
        bench.merge_config(cfg, {"bogus": 1})
    with pytest.raises(bench.ConfigError, match="sdt.bogus"):
        bench.merge_config(cfg, {"sdt": {"bogus": 1}})
    with pytest.raises(bench.ConfigError):
        bench.merge_config(cfg, {"sdt": 3})


@pytest.mark.parametrize("patch,field", [
    ({"m_values": []}, "m_values"),
    ({"m_values": [200, 100]}, "m_values"),
    ({"m_values": [100, 100]}, "m_values"),
    ({"trials_per_m": 0}, "trials_per_m"),
    ({"s": 0}, "s"),
    ({"s": 99}, "s"),
    ({"r": 0}, "r"),
    ({"solvers": ["bogus"]}, "solvers"),
    ({"xi_model": "bogus"}, "xi_model"),
    ({"noise_kind": "bogus"}, "noise_kind"),
    ({"ensemble": "pauli", "d": 6}, "d"),
])
def test_validate_config_errors(patch, field):
    cfg = bench.default_config("gue-phase")
    cfg.update(patch)
    with pytest.raises(bench.ConfigError, match=field):
        bench.validate_config(cfg)


def test_run_experiment_deterministic_and_sorted():
    cfg = tiny_gue_config()
    rows_a = bench.run_experiment(cfg)
    rows_b = bench.run_experiment(cfg)
    assert bench.rows_to_csv(rows_a) == bench.rows_to_csv(rows_b)
    keys = [(r["m"], r["trial"], r["solver"]) for r in rows_a]
    assert keys == sorted(keys)
    assert len(rows_a) == 2 * 2 * 3  # m values x trials x solvers


def test_run_experiment_worker_count_invariant():
    cfg = tiny_gue_config()
    serial = bench.rows_to_csv(bench.run_experiment(cfg))
    cfg["workers"] = 2
    parallel = bench.rows_to_csv(bench.run_experiment(cfg))
    assert serial == parallel


def test_solvers_share_instances():
    # the problem instance is a function of (m, trial) only, so sdt rows do
    # not change when other solvers are added or removed
    cfg = tiny_gue_config(m_values=[80], trials_per_m=3, solvers=["sdt"])
    alone = bench.run_experiment(cfg)
    cfg = tiny_gue_config(m_values=[80], trials_per_m=3)
    joint = [r for r in bench.run_experiment(cfg) if r["solver"] == "sdt"]
    assert bench.rows_to_csv(alone) == bench.rows_to_csv(joint)


def test_golden_csv_snapshot():
    # frozen output bytes for a fixed config; schema or seeding changes
    # must be deliberate
    cfg = tiny_gue_config(m_values=[40], trials_per_m=1)
    csv = bench.rows_to_csv(bench.run_experiment(cfg))
    lines = csv.strip().split("\n")
    assert lines[0] == bench.CSV_HEADER
    assert len(lines) == 4
    for line in lines[1:]:
        fields = line.split(",")
        assert fields[0] == "gue-phase"
        assert fields[1] == "40"
        assert fields[10] == "0"  # wall_ms suppressed


def test_rip_probe_experiment():
    cfg = bench.default_config("rip-probe")
    cfg.update({"m_values": [200], "trials_per_m": 3, "rip_samples": 20,
                "record_wall_time": False})
    rows = bench.run_experiment(cfg)
    assert len(rows) == 3
    for r in rows:
        assert r["solver"] == "rip-probe"
        assert 0.0 <= r["frob_error"] < 1.0


def test_unit_oracles_experiment():
    cfg = bench.default_config("unit-oracles")
    rows = bench.run_experiment(cfg)
    assert all(r["success"] for r in rows)
    assert {r["solver"] for r in rows} == {"oracle:projection",
                                           "oracle:adjoint"}


def test_pauli_blind_trial_rows():
    cfg = bench.default_config("pauli-blind")
    cfg.update({"m_values": [120], "trials_per_m": 1,
                "record_wall_time": False})
    rows = bench.run_experiment(cfg)
    solvers = {r["solver"] for r in rows}
    assert solvers == {"sdt", "standard"}
    std = next(r for r in rows if r["solver"] == "standard")
    assert math.isnan(std["calib_l2_error"])


def test_coherent_als_trial_rows():
    cfg = bench.default_config("coherent-als")
    cfg.update({"m_values": [150], "trials_per_m": 1,
                "record_wall_time": False})
    rows = bench.run_experiment(cfg)
    als = next(r for r in rows if r["solver"] == "als")
    assert als["trace_norm_error"] >= 0.0
    assert als["calib_l2_error"] >= 0.0


def test_aggregate_hand_computed():
    def row(solver, m, trial, frob, success):
        return {"experiment": "x", "m": m, "trial": trial, "solver": solver,
                "frob_error": frob, "trace_norm_error": frob / 2,
                "calib_l2_error": math.nan, "success": success,
                "iterations": 1, "termination": "converged", "wall_ms": 0.0}

    rows = [row("sdt", 100, 0, 0.1, True),
            row("sdt", 100, 1, 0.3, False),
            row("sdt", 100, 2, 0.2, True),
            row("dt", 100, 0, 0.5, False)]
    summary = bench.aggregate(rows)
    sdt = next(s for s in summary if s["solver"] == "sdt")
    assert sdt["trials"] == 3
    assert sdt["recovery_rate"] == pytest.approx(2 / 3)
    assert sdt["median_frob_error"] == pytest.approx(0.2)
    assert sdt["median_trace_norm_error"] == pytest.approx(0.1)
    assert math.isnan(sdt["median_calib_l2_error"])
    dt = next(s for s in summary if s["solver"] == "dt")
    assert dt["recovery_rate"] == 0.0
    with pytest.raises(ValueError):
        bench.aggregate([])


def test_m50_interpolation():
    def srow(m, rate):
        return {"experiment": "x", "solver": "sdt", "m": m, "trials": 10,
                "recovery_rate": rate, "median_frob_error": 0.0,
                "median_trace_norm_error": 0.0, "median_calib_l2_error": 0.0}

    summary = [srow(100, 0.0), srow(200, 0.4), srow(300, 0.9)]
    assert bench.m50(summary, "sdt") == pytest.approx(220.0)
    assert bench.m50([srow(100, 0.8)], "sdt") == 100.0
    assert bench.m50([srow(100, 0.2)], "sdt") == math.inf
    with pytest.raises(ValueError):
        bench.m50(summary, "other")


def test_csv_formatting():
    assert bench._fmt(True) == "1"
    assert bench._fmt(False) == "0"
    assert bench._fmt(math.nan) == "nan"
    assert bench._fmt(0.25) == "0.25"
    assert bench._fmt("abc") == "abc"


def test_sidecar_json_round_trips_config():
    cfg = tiny_gue_config()
    payload = json.loads(bench.sidecar_json(cfg))
    assert payload["config"] == cfg
    assert "version" in payload


def test_cli_smoke(tmp_path):
    out = tmp_path / "run.csv"
    code = cli.main([
        "gue-phase", "--out", str(out), "--seed", "1",
        "--override", "n=3", "--override", "d=4", "--override", "s=2",
        "--override", "m_values=[40]", "--override", "trials_per_m=1",
        "--override", "record_wall_time=false",
        "--override", "solvers=[\"sdt\"]",
        "--override", "sdt.max_iters=60",
    ])
    assert code == cli.EXIT_OK
    text = out.read_text()
    assert text.startswith(bench.CSV_HEADER)
    assert len(text.strip().split("\n")) == 2
    assert (tmp_path / "run.csv.json").exists()
    assert (tmp_path / "run.summary.csv").exists()


def test_cli_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "n": 3, "d": 4, "s": 2, "m_values": [40], "trials_per_m": 1,
        "record_wall_time": False, "solvers": ["sdt"],
        "sdt": {"max_iters": 60},
    }))
    out = tmp_path / "run.csv"
    code = cli.main(["gue-phase", "--config", str(cfg_path),
                     "--out", str(out)])
    assert code == cli.EXIT_OK
    sidecar = json.loads((tmp_path / "run.csv.json").read_text())
    assert sidecar["config"]["n"] == 3


def test_cli_config_errors(tmp_path):
    assert cli.main(["gue-phase", "--override", "bogus=1",
                     "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG
    assert cli.main(["gue-phase", "--override", "novalue",
                     "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG
    assert cli.main(["gue-phase", "--config", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["gue-phase", "--config", str(bad),
                     "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG


def test_cli_oracle_tests(tmp_path):
    out = tmp_path / "oracles.csv"
    code = cli.main(["oracle-tests", "--out", str(out)])
    assert code == cli.EXIT_OK
    assert "oracle:projection" in out.read_text()
