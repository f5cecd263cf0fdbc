"""Sectioned ``key = value`` configuration file.

Every section is optional; missing keys keep their defaults.  Example::

    [plant]
    capacitance = 1e7
    max_heat_power = 20000

    [reward]
    w_e_occupied = 0.01
    comfort_lower = 20
    comfort_upper = 23.5

    [mpc]
    sample_number = 1000
    horizon = 20
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from datetime import time
from pathlib import Path

from treehvac.building import PlantConfig, ScheduleConfig
from treehvac.dynamics import TrainConfig
from treehvac.extraction import CartParams, NoiseConfig
from treehvac.mpc import MPCConfig
from treehvac.objective import SUMMER_COMFORT, WINTER_COMFORT, ComfortRange, RewardConfig
from treehvac.verifier import VerifyConfig


@dataclass
class RunConfig:
    season: str = "winter"
    history_days: int = 31
    eval_days: int = 7
    n_decisions: int = 200
    epsilon: float = 0.2
    initial_temp: float | None = None


@dataclass
class Config:
    plant: PlantConfig = field(default_factory=PlantConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    mpc: MPCConfig = field(default_factory=MPCConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    cart: CartParams = field(default_factory=CartParams)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def with_seed(self, seed: int) -> Config:
        return replace(self, train=replace(self.train, seed=seed), mpc=replace(self.mpc, seed=seed),
                       noise=replace(self.noise, seed=seed),
                       verify=replace(self.verify, seed=seed, noise_cfg=replace(self.noise, seed=seed)))


def _coerce(raw: str, current, name: str):
    raw = raw.strip()
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(float(raw))
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, time):
        return time.fromisoformat(raw)
    if isinstance(current, tuple):
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if current is None:
        if raw.lower() in ("", "none"):
            return None
        return int(raw) if name == "max_depth" else float(raw)
    return raw


def _update(obj, section: configparser.SectionProxy, skip=()):
    kwargs = {}
    names = {f.name for f in fields(obj)}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in names:
            raise KeyError(f"unknown key '{key}' in section [{section.name}]")
        kwargs[key] = _coerce(raw, getattr(obj, key), key)
    return replace(obj, **kwargs) if kwargs else obj


def load_config(path=None) -> Config:
    cfg = Config()
    if path is None:
        return _finish(cfg)
    parser = configparser.ConfigParser()
    text = Path(path).read_text()
    parser.read_string(text)
    known = {"plant", "schedule", "reward", "train", "mpc", "noise", "cart", "verify", "run"}
    for name in parser.sections():
        if name not in known:
            raise KeyError(f"unknown section [{name}] in {path}")
    if parser.has_section("run"):
        cfg.run = _update(cfg.run, parser["run"])
    if parser.has_section("plant"):
        cfg.plant = _update(cfg.plant, parser["plant"])
    if parser.has_section("schedule"):
        cfg.schedule = _update(cfg.schedule, parser["schedule"])
    if parser.has_section("reward"):
        sec = parser["reward"]
        default = SUMMER_COMFORT if cfg.run.season == "summer" else WINTER_COMFORT
        comfort = ComfortRange(float(sec.get("comfort_lower", default.lower)),
                               float(sec.get("comfort_upper", default.upper)))
        cfg.reward = replace(_update(cfg.reward, sec, skip=("comfort_lower", "comfort_upper")),
                             comfort=comfort)
    elif cfg.run.season == "summer":
        cfg.reward = replace(cfg.reward, comfort=SUMMER_COMFORT)
    for name in ("train", "mpc", "noise", "cart"):
        if parser.has_section(name):
            setattr(cfg, name, _update(getattr(cfg, name), parser[name]))
    if parser.has_section("verify"):
        cfg.verify = _update(cfg.verify, parser["verify"])
    return _finish(cfg)


def _finish(cfg: Config) -> Config:
    # Verification always uses the reward's comfort band and the extraction noise.
    cfg.verify = replace(cfg.verify, comfort=cfg.reward.comfort, noise_cfg=cfg.noise)
    return cfg
