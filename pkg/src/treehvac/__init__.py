"""Deterministic decision-tree HVAC policies distilled from a random-shooting
model-based controller, with formal and Monte Carlo verification."""

from treehvac.building import (
    DisturbanceTrace,
    DisturbanceVector,
    PlantConfig,
    PlantDivergenceError,
    ScheduleConfig,
    SetpointAction,
    ZoneState,
    baseline_policy,
    generate_weather,
    load_disturbance_csv,
    occupancy_schedule,
    step_plant,
)
from treehvac.objective import ComfortRange, RewardConfig, energy_proxy, reward
from treehvac.tree import BoxRegion, Interval, TreePolicy, box_intersect, enumerate_leaf_boxes, infer

__version__ = "0.1.0"

__all__ = [
    "BoxRegion",
    "ComfortRange",
    "DisturbanceTrace",
    "DisturbanceVector",
    "Interval",
    "PlantConfig",
    "PlantDivergenceError",
    "RewardConfig",
    "ScheduleConfig",
    "SetpointAction",
    "TreePolicy",
    "ZoneState",
    "baseline_policy",
    "box_intersect",
    "energy_proxy",
    "enumerate_leaf_boxes",
    "generate_weather",
    "infer",
    "load_disturbance_csv",
    "occupancy_schedule",
    "reward",
    "step_plant",
]
