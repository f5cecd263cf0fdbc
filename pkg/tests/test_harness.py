import csv
import json
from datetime import datetime, timedelta

import numpy as np
import pytest

from conftest import RelaxModel
from treehvac.building import OFF_ACTION, PlantConfig, SetpointAction, generate_weather
from treehvac.cli import main
from treehvac.harness import (
    BaselineController, EpisodeTrace, RSController, TreeController, bench_latency, compute_metrics,
    run_closed_loop, setpoint_spread, stochasticity_diagnostic, trace_respects_direction,
)
from treehvac.mpc import MPCConfig
from treehvac.objective import WINTER_COMFORT, RewardConfig
from treehvac.tree import TreePolicy, single_leaf


def episode(temps, occ, energy=None):
    n = len(temps)
    t0 = datetime(2021, 1, 4)
    return EpisodeTrace(timestamps=[t0 + timedelta(minutes=15 * i) for i in range(n)], start_temp=list(temps),
                        zone_temp=list(temps), actions=[OFF_ACTION] * n,
                        hvac_energy_J=list(energy if energy is not None else [0.0] * n),
                        energy_proxy=[0.0] * n, reward=[0.0] * n, occupants=list(occ),
                        in_comfort=[WINTER_COMFORT.contains(t) for t in temps], dt=900.0)


def test_metrics_all_comfortable():
    m = compute_metrics(episode([21.0] * 4, [5] * 4), WINTER_COMFORT)
    assert m.comfort_rate == 1.0 and m.violation_degree_hours == 0.0 and m.total_energy_kWh == 0.0


def test_metrics_degree_hours_hand_value():
    m = compute_metrics(episode([24.5], [5]), WINTER_COMFORT)
    assert m.violation_degree_hours == pytest.approx(1.0 * 0.25)
    assert m.comfort_rate == 0.0


def test_unoccupied_comfort_convention():
    m = compute_metrics(episode([10.0, 30.0], [0, 0], [3.6e6, 3.6e6]), WINTER_COMFORT)
    assert m.comfort_rate == 1.0 and m.violation_degree_hours == 0.0
    assert m.total_energy_kWh == pytest.approx(2.0)
    assert m.performance_ratio == pytest.approx(1000 * 1.0 / 2.0)


def test_baseline_day():
    ep = run_closed_loop(BaselineController(WINTER_COMFORT), generate_weather(1, "winter", 3))
    assert len(ep) == 96
    assert set(ep.actions) <= {SetpointAction(20, 24), OFF_ACTION}


def test_tree_runs_are_identical_across_seeds():
    t = TreePolicy([0, -1, -1], [21.0, 0, 0], [1, -1, -1], [2, -1, -1], [0, 22, 15], [0, 24, 30])
    tr = generate_weather(1, "winter", 0)
    runs = [run_closed_loop(TreeController(t), tr, seed=s) for s in range(1, 11)]
    assert all(r.zone_temp == runs[0].zone_temp and r.actions == runs[0].actions for r in runs)
    hs, cs = setpoint_spread(runs)
    assert np.all(hs == 0) and np.all(cs == 0)


def test_rs_controller_varies_with_seed():
    tr = generate_weather(1, "winter", 0)
    rs = RSController(RelaxModel(0.5, 0.2), MPCConfig(sample_number=30, horizon=5), RewardConfig())
    diag = stochasticity_diagnostic({"rs": rs}, tr, PlantConfig(), RewardConfig(), seeds=range(1, 4))
    assert diag["rs"]["steps_with_spread"] >= 1


def test_direction_check():
    ep = episode([25.0, 18.0], [5, 5])
    assert trace_respects_direction(ep, WINTER_COMFORT) == [0, 1]


def test_latency_contract():
    with pytest.raises(ValueError):
        bench_latency(lambda x: None, [np.zeros(6)], reps=10)
    mean, std = bench_latency(single_leaf(OFF_ACTION), [np.zeros(6)], reps=50)
    assert mean >= 0 and std >= 0


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = out / "small.ini"
    cfg.write_text("[run]\nhistory_days = 3\neval_days = 1\nn_decisions = 20\n[train]\nepochs = 10\n"
                   "[mpc]\nsample_number = 100\nhorizon = 6\nrepeats = 3\n[verify]\nsample_count = 300\n")
    assert main(["--config", str(cfg), "--out", str(out), "compare", "--reps", "30"]) == 0
    return out, cfg


def test_cli_compare_outputs(small_run):
    out, _ = small_run
    for name in ("compare.csv", "compare.md", "compare.png", "history.csv", "model.json", "tree.json",
                 "tree_verified.json", "verification_report.json", "trace_tree.csv", "trace_tree.png",
                 "config_used.json"):
        assert (out / name).exists(), name
    rows = list(csv.DictReader((out / "compare.csv").open()))
    assert {r["policy"] for r in rows} == {"baseline", "rs_mbrl", "tree"}
    with (out / "trace_tree.csv").open() as fh:
        assert next(csv.reader(fh)) == ["timestamp", "zone_temp", "heat_sp", "cool_sp", "hvac_energy_J",
                                        "occupants"]
    rep = json.loads((out / "verification_report.json").read_text())
    assert rep["total_nodes"] == 2 * rep["leaf_nodes"] - 1
    assert "assumption" in (out / "compare.md").read_text()


def test_cli_simulate_external_weather_no_plots(small_run, tmp_path):
    out, cfg = small_run
    wcsv = out / "weather.csv"
    assert main(["--config", str(cfg), "--out", str(tmp_path), "--no-plots", "simulate", "--policy",
                 "baseline", "--weather", str(wcsv)]) == 0
    assert (tmp_path / "trace_baseline.csv").exists() and not (tmp_path / "trace_baseline.png").exists()


def test_cli_flags_after_subcommand(small_run):
    out, cfg = small_run
    assert main(["deploy", "--config", str(cfg), "--out", str(out), "--no-plots"]) == 0


def test_cli_unknown_config_key(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[mpc]\nhorizn = 3\n")
    assert main(["--config", str(bad), "--out", str(tmp_path), "collect"]) == 2
