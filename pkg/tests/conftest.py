"""Shared fixtures: stub dynamics models and one session-wide trained pipeline."""

from __future__ import annotations

import time

import numpy as np
import pytest

from treehvac.building import DisturbanceVector, PlantConfig, SetpointAction, ZoneState, step_plant
from treehvac.dynamics import TrainConfig, fit_dynamics
from treehvac.extraction import NoiseConfig, build_decision_dataset
from treehvac.harness import collect_history
from treehvac.mpc import MPCConfig
from treehvac.objective import RewardConfig

ACCEPTANCE_LINES: list[str] = []


class IdentityModel:
    """s' = s whatever the action."""

    def predict_batch(self, inputs, actions):
        return np.asarray(inputs, dtype=float)[:, 0].copy()


class OffsetModel:
    def __init__(self, delta):
        self.delta = delta

    def predict_batch(self, inputs, actions):
        return np.asarray(inputs, dtype=float)[:, 0] + self.delta


class ConstantModel:
    def __init__(self, value):
        self.value = value

    def predict_batch(self, inputs, actions):
        return np.full(len(inputs), float(self.value))


class PlantModel:
    """The simulator itself, looped row by row; a perfect dynamics model."""

    def __init__(self, cfg=PlantConfig()):
        self.cfg = cfg

    def predict_batch(self, inputs, actions):
        out = np.empty(len(inputs))
        for i, (x, a) in enumerate(zip(np.asarray(inputs, float), np.asarray(actions))):
            s, _ = step_plant(ZoneState(float(x[0])), DisturbanceVector.from_array(x[1:]),
                              SetpointAction(int(a[0]), int(a[1])), self.cfg)
            out[i] = s.zone_temp
        return out


class RelaxModel:
    """s' = s + k*(target - s) - drift, with target the nearer setpoint when outside the deadband."""

    def __init__(self, k=0.5, drift=0.0):
        self.k, self.drift = k, drift

    def predict_batch(self, inputs, actions):
        s = np.asarray(inputs, float)[:, 0]
        a = np.asarray(actions, float)
        target = np.clip(s, a[:, 0], a[:, 1])
        return s + self.k * (target - s) - self.drift


@pytest.fixture(scope="session")
def pipeline():
    """History, dynamics model and a 500-record decision dataset at default settings.

    Shorter datasets are prefixes of this one (record i depends only on i).
    """
    t0 = time.perf_counter()
    reward_cfg = RewardConfig()
    history, inputs = collect_history(31, "winter", 0, PlantConfig(), reward_cfg)
    model = fit_dynamics(history, TrainConfig(seed=0))
    t_model = time.perf_counter() - t0
    stats = {}
    records = build_decision_dataset(model, inputs, 500, NoiseConfig(seed=0), MPCConfig(seed=0),
                                     reward_cfg, stats=stats)
    return {"history": history, "inputs": inputs, "model": model, "records": records,
            "reward_cfg": reward_cfg, "seconds_model": t_model,
            "seconds_per_record": stats["seconds_per_record"]}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
