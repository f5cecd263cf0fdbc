"""Comfort-energy reward and the setpoint-distance energy proxy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from treehvac.building import OFF_PAIR, SetpointAction


@dataclass(frozen=True)
class ComfortRange:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"comfort lower {self.lower} must be below upper {self.upper}")

    @property
    def median(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, temp: float) -> bool:
        return self.lower <= temp <= self.upper


WINTER_COMFORT = ComfortRange(20.0, 23.5)
SUMMER_COMFORT = ComfortRange(23.0, 26.0)


@dataclass(frozen=True)
class RewardConfig:
    w_e_occupied: float = 1e-2
    w_e_unoccupied: float = 1.0
    comfort: ComfortRange = field(default=WINTER_COMFORT)

    def __post_init__(self):
        for w in (self.w_e_occupied, self.w_e_unoccupied):
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"energy weights must lie in [0, 1], got {w}")


def energy_proxy(action: SetpointAction) -> float:
    """L1 distance of the setpoint pair from the HVAC-off pair (15, 30)."""
    return float(abs(action.heat_sp - OFF_PAIR[0]) + abs(OFF_PAIR[1] - action.cool_sp))


def energy_proxy_array(heat, cool) -> np.ndarray:
    return np.abs(np.asarray(heat) - OFF_PAIR[0]) + np.abs(OFF_PAIR[1] - np.asarray(cool))


def comfort_violation(temp, comfort: ComfortRange):
    """Hinge distance outside the comfort band; scalar or elementwise."""
    return np.maximum(temp - comfort.upper, 0.0) + np.maximum(comfort.lower - temp, 0.0)


def reward(state, action: SetpointAction, occupied: bool, cfg: RewardConfig = RewardConfig()) -> float:
    """Weighted energy/comfort reward; always <= 0.

    ``state`` may be a ZoneState or a plain temperature.
    """
    temp = getattr(state, "zone_temp", state)
    w = cfg.w_e_occupied if occupied else cfg.w_e_unoccupied
    return float(-w * energy_proxy(action) - (1.0 - w) * comfort_violation(temp, cfg.comfort))


def reward_array(temp, heat, cool, occupied, cfg: RewardConfig) -> np.ndarray:
    """Vectorised reward over broadcastable arrays of temperatures and actions."""
    w = np.where(np.asarray(occupied, dtype=bool), cfg.w_e_occupied, cfg.w_e_unoccupied)
    return -w * energy_proxy_array(heat, cool) - (1.0 - w) * comfort_violation(np.asarray(temp), cfg.comfort)
