from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treehvac.building import (
    OFF_ACTION, VALID_ACTIONS, DisturbanceTrace, DisturbanceVector, PlantConfig, PlantDivergenceError,
    SetpointAction, TraceFormatError, ZoneState, baseline_policy, generate_weather, load_disturbance_csv,
    occupancy_schedule, step_plant, write_disturbance_csv,
)
from treehvac.objective import SUMMER_COMFORT, WINTER_COMFORT

CALM = DisturbanceVector(0.0, 50.0, 0.0, 0.0, 0)


def test_equilibrium_is_idle():
    s, e = step_plant(ZoneState(15.0), DisturbanceVector(15.0, 50, 0, 0, 0), OFF_ACTION)
    assert s.zone_temp == 15.0 and e == 0.0


def test_free_cooling_hand_value():
    s, e = step_plant(ZoneState(20.0), CALM, OFF_ACTION, PlantConfig(capacitance=1e7, resistance=2e-3, dt=900))
    assert s.zone_temp == pytest.approx(20 - 900 / 1e7 * (20 / 0.002), abs=1e-12)
    assert s.zone_temp == pytest.approx(19.1, abs=1e-12)
    assert e == 0.0


def test_unsaturated_heating_lands_on_setpoint():
    cfg = PlantConfig(max_heat_power=1e12)
    s, e = step_plant(ZoneState(18.0), CALM, SetpointAction(21, 30), cfg)
    assert s.zone_temp == 21.0
    # the unclipped Euler step with the same power reaches the same temperature
    q = e / cfg.dt
    k = cfg.dt / cfg.capacitance
    assert 18.0 + k * ((0.0 - 18.0) / cfg.resistance + q) == pytest.approx(21.0, abs=1e-9)


def test_saturated_heating_uses_full_power():
    cfg = PlantConfig(max_heat_power=1000.0)
    s, e = step_plant(ZoneState(18.0), CALM, SetpointAction(23, 30), cfg)
    assert e == pytest.approx(1000.0 * cfg.dt)
    assert s.zone_temp < 23.0


def test_cooling_lands_on_setpoint():
    hot = DisturbanceVector(28.0, 50, 0, 0, 0)
    s, e = step_plant(ZoneState(25.0), hot, SetpointAction(15, 24))
    assert s.zone_temp == 24.0 and e > 0


def test_divergence_raises():
    with pytest.raises(PlantDivergenceError):
        step_plant(ZoneState(20.0), DisturbanceVector(-1e6, 50, 0, 0, 0), OFF_ACTION)


@settings(max_examples=200, deadline=None)
@given(T=st.floats(10, 35), out=st.floats(-15, 40), wind=st.floats(0, 15), solar=st.floats(0, 900),
       occ=st.integers(0, 10), a=st.sampled_from(VALID_ACTIONS))
def test_thermostat_invariants(T, out, wind, solar, occ, a):
    d = DisturbanceVector(out, 50, wind, solar, occ)
    cfg = PlantConfig()
    s, e = step_plant(ZoneState(T), d, a, cfg)
    assert e >= 0 and np.isfinite(s.zone_temp)
    free, _ = step_plant(ZoneState(T), d, OFF_ACTION, cfg)
    if a.heat_sp <= T <= a.cool_sp:
        assert e == 0.0
    if e > 0 and e < cfg.max_heat_power * cfg.dt * (1 - 1e-12) and T < a.heat_sp:
        assert s.zone_temp == a.heat_sp
    # HVAC only ever pushes towards the deadband
    if T < a.heat_sp:
        assert s.zone_temp >= free.zone_temp
    if T > a.cool_sp:
        assert s.zone_temp <= free.zone_temp


def test_setpoint_invariant():
    with pytest.raises(ValueError):
        SetpointAction(23, 21)
    with pytest.raises(ValueError):
        SetpointAction(14, 30)
    assert len(VALID_ACTIONS) == 87
    assert len(set(VALID_ACTIONS)) == 87


def test_weather_shape_and_determinism():
    a = generate_weather(1, "winter", 7)
    b = generate_weather(1, "winter", 7)
    assert len(a) == 96
    assert np.array_equal(a.values, b.values) and a.timestamps == b.timestamps
    midnight = [i for i, ts in enumerate(a.timestamps) if ts.hour == 0]
    assert np.all(a.values[midnight, 3] == 0.0)
    assert np.all(a.values[:, 3] >= 0) and np.all(a.values[:, 2] >= 0)


def test_weather_seed_changes_trace():
    assert not np.array_equal(generate_weather(1, "summer", 1).values, generate_weather(1, "summer", 2).values)


def test_csv_roundtrip_and_clamp(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("timestamp,outdoor_temp,outdoor_rh,wind_speed,solar_rad,occupant_count\n"
                 "2021-01-05T10:00:00,1.5,55,2,100,5\n"
                 "2021-01-05T10:15:00,1.0,120,2,110,5\n")
    tr = load_disturbance_csv(p)
    assert len(tr) == 2 and tr.dt == 900
    assert tr.values[1, 1] == 100.0 and tr.meta["rh_clamped"] == 1
    q = tmp_path / "w2.csv"
    write_disturbance_csv(tr, q)
    assert np.allclose(load_disturbance_csv(q).values, tr.values)


def test_csv_missing_column(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("timestamp,outdoor_temp,outdoor_rh,solar_rad,occupant_count\n2021-01-05T10:00:00,1,50,0,0\n")
    with pytest.raises(TraceFormatError, match="wind_speed"):
        load_disturbance_csv(p)


def test_csv_bad_row_named(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("timestamp,outdoor_temp,outdoor_rh,wind_speed,solar_rad,occupant_count\n"
                 "2021-01-05T10:00:00,abc,50,1,0,0\n")
    with pytest.raises(TraceFormatError, match="row 2"):
        load_disturbance_csv(p)


def test_trace_rejects_uneven_spacing():
    ts = [datetime(2021, 1, 4, 0, 0), datetime(2021, 1, 4, 0, 15), datetime(2021, 1, 4, 0, 40)]
    with pytest.raises(ValueError):
        DisturbanceTrace(ts, np.zeros((3, 5)), 900)


def test_occupancy_schedule():
    assert occupancy_schedule(datetime(2021, 1, 5, 10)) == 5     # Tuesday
    assert occupancy_schedule(datetime(2021, 1, 5, 19)) == 0
    assert occupancy_schedule(datetime(2021, 1, 9, 10)) == 0     # Saturday


def test_baseline_rule():
    occ = DisturbanceVector(0, 50, 0, 0, 5)
    assert baseline_policy(ZoneState(21), occ, WINTER_COMFORT) == SetpointAction(20, 24)
    assert baseline_policy(ZoneState(21), occ, SUMMER_COMFORT) == SetpointAction(23, 26)
    assert baseline_policy(ZoneState(21), CALM, WINTER_COMFORT) == OFF_ACTION
    assert baseline_policy(ZoneState(21), CALM, SUMMER_COMFORT) == OFF_ACTION


def test_disturbance_rh_clamped_and_negative_rejected():
    assert DisturbanceVector(0, 130, 0, 0, 0).outdoor_rh == 100
    with pytest.raises(ValueError):
        DisturbanceVector(0, 50, -1, 0, 0)
