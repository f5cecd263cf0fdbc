"""Lumped single-zone RC plant, synthetic weather, occupancy and the
rule-based baseline controller.

The plant is a one-capacitance thermal zone integrated with a single forward
Euler step per control interval.  HVAC is an ideal-load thermostat: it
delivers exactly the power needed to bring the zone to the violated setpoint,
clipped at the equipment capacity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from pathlib import Path
from typing import TYPE_CHECKING, Iterator

import numpy as np

if TYPE_CHECKING:
    from treehvac.objective import ComfortRange

HEAT_RANGE = (15, 23)
COOL_RANGE = (21, 30)
OFF_PAIR = (15, 30)
TEMP_LIMITS = (-20.0, 60.0)

DISTURBANCE_FIELDS = ("outdoor_temp", "outdoor_rh", "wind_speed", "solar_rad", "occupant_count")
FEATURE_NAMES = ("zone_temp",) + DISTURBANCE_FIELDS


class PlantDivergenceError(RuntimeError):
    """Zone temperature left the physically plausible band."""


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ZoneState:
    zone_temp: float

    def __post_init__(self):
        if not math.isfinite(self.zone_temp):
            raise ValueError(f"zone_temp must be finite, got {self.zone_temp}")


@dataclass(frozen=True)
class DisturbanceVector:
    outdoor_temp: float
    outdoor_rh: float
    wind_speed: float
    solar_rad: float
    occupant_count: int

    def __post_init__(self):
        vals = (self.outdoor_temp, self.outdoor_rh, self.wind_speed, self.solar_rad)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"disturbance fields must be finite: {self}")
        if self.wind_speed < 0 or self.solar_rad < 0 or self.occupant_count < 0:
            raise ValueError(f"wind, solar and occupancy must be non-negative: {self}")
        object.__setattr__(self, "outdoor_rh", min(max(float(self.outdoor_rh), 0.0), 100.0))
        object.__setattr__(self, "occupant_count", int(self.occupant_count))

    @property
    def occupied(self) -> bool:
        return self.occupant_count > 0

    def as_array(self) -> np.ndarray:
        return np.array([self.outdoor_temp, self.outdoor_rh, self.wind_speed,
                         self.solar_rad, float(self.occupant_count)])

    @classmethod
    def from_array(cls, v) -> DisturbanceVector:
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]), int(round(v[4])))


@dataclass(frozen=True, order=True)
class SetpointAction:
    """Integer (heating, cooling) setpoint pair.  Ordering is lexicographic."""

    heat_sp: int
    cool_sp: int

    def __post_init__(self):
        h, c = self.heat_sp, self.cool_sp
        if int(h) != h or int(c) != c:
            raise ValueError(f"setpoints must be integers, got ({h}, {c})")
        object.__setattr__(self, "heat_sp", int(h))
        object.__setattr__(self, "cool_sp", int(c))
        if not HEAT_RANGE[0] <= self.heat_sp <= HEAT_RANGE[1]:
            raise ValueError(f"heat_sp {self.heat_sp} outside {HEAT_RANGE}")
        if not COOL_RANGE[0] <= self.cool_sp <= COOL_RANGE[1]:
            raise ValueError(f"cool_sp {self.cool_sp} outside {COOL_RANGE}")
        if self.heat_sp > self.cool_sp:
            raise ValueError(f"heat_sp {self.heat_sp} exceeds cool_sp {self.cool_sp}")

    def __iter__(self):
        yield self.heat_sp
        yield self.cool_sp

    def __str__(self):
        return f"({self.heat_sp},{self.cool_sp})"


OFF_ACTION = SetpointAction(*OFF_PAIR)

# Every valid pair, lexicographically ordered. 87 entries.
VALID_ACTIONS: tuple[SetpointAction, ...] = tuple(
    SetpointAction(h, c)
    for h in range(HEAT_RANGE[0], HEAT_RANGE[1] + 1)
    for c in range(COOL_RANGE[0], COOL_RANGE[1] + 1)
    if h <= c
)
VALID_ACTION_ARRAY = np.array([[a.heat_sp, a.cool_sp] for a in VALID_ACTIONS], dtype=float)


@dataclass(frozen=True)
class PlantConfig:
    """Parameters of the single-zone RC plant (SI units)."""

    capacitance: float = 1e7          # J/K
    resistance: float = 2e-3          # K/W
    wind_coeff: float = 0.1           # s/m
    solar_aperture: float = 3.0       # m^2
    occupant_gain: float = 100.0      # W/person
    max_heat_power: float = 20_000.0  # W
    max_cool_power: float = 20_000.0  # W
    dt: float = 900.0                 # s

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"PlantConfig.{name} must be positive, got {value}")


@dataclass(frozen=True)
class ScheduleConfig:
    start: time = time(8, 0)
    end: time = time(18, 0)
    headcount: int = 5


@dataclass
class DisturbanceTrace:
    """Uniformly spaced disturbance series.

    ``values`` has one row per timestamp in the column order of
    ``DISTURBANCE_FIELDS``.
    """

    timestamps: list[datetime]
    values: np.ndarray
    dt: float = 900.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, len(DISTURBANCE_FIELDS))
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values differ in length")
        step = timedelta(seconds=self.dt)
        for i in range(1, len(self.timestamps)):
            if self.timestamps[i] - self.timestamps[i - 1] != step:
                raise TraceFormatError(
                    f"non-uniform spacing at row {i + 1}: "
                    f"{self.timestamps[i - 1]} -> {self.timestamps[i]} (expected {self.dt} s)")

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> tuple[datetime, DisturbanceVector]:
        return self.timestamps[i], DisturbanceVector.from_array(self.values[i])

    def __iter__(self) -> Iterator[tuple[datetime, DisturbanceVector]]:
        for i in range(len(self)):
            yield self[i]

    def window(self, start: int, length: int) -> np.ndarray:
        """Rows ``start .. start+length-1``; the last row is repeated past the end."""
        idx = np.minimum(np.arange(start, start + length), len(self) - 1)
        return self.values[idx]

    def slice(self, start: int, stop: int) -> DisturbanceTrace:
        return DisturbanceTrace(self.timestamps[start:stop], self.values[start:stop], self.dt)


def _free_power(T: float, dist: DisturbanceVector, cfg: PlantConfig) -> float:
    r_eff = cfg.resistance / (1.0 + cfg.wind_coeff * dist.wind_speed)
    return ((dist.outdoor_temp - T) / r_eff
            + cfg.solar_aperture * dist.solar_rad
            + cfg.occupant_gain * dist.occupant_count)


def step_plant(state: ZoneState, dist: DisturbanceVector, action: SetpointAction,
               cfg: PlantConfig = PlantConfig()) -> tuple[ZoneState, float]:
    """Advance the zone one control interval.

    Returns the next state and the HVAC energy spent in joules.  When the
    thermostat is not saturated the zone lands exactly on the setpoint.

    Raises
    ------
    PlantDivergenceError
        If the next temperature leaves [-20, 60] degC.
    """
    T = state.zone_temp
    q_free = _free_power(T, dist, cfg)
    k = cfg.dt / cfg.capacitance
    q_hvac = 0.0
    T_next = T + k * q_free
    if T < action.heat_sp:
        needed = (action.heat_sp - T) / k - q_free
        if needed > 0:
            if needed <= cfg.max_heat_power:
                q_hvac, T_next = needed, float(action.heat_sp)
            else:
                q_hvac = cfg.max_heat_power
                T_next = T + k * (q_free + q_hvac)
    elif T > action.cool_sp:
        needed = q_free - (action.cool_sp - T) / k
        if needed > 0:
            if needed <= cfg.max_cool_power:
                q_hvac, T_next = -needed, float(action.cool_sp)
            else:
                q_hvac = -cfg.max_cool_power
                T_next = T + k * (q_free + q_hvac)
    if not (TEMP_LIMITS[0] <= T_next <= TEMP_LIMITS[1]) or not math.isfinite(T_next):
        raise PlantDivergenceError(f"zone temperature {T_next:.3f} degC outside {TEMP_LIMITS}")
    return ZoneState(T_next), abs(q_hvac) * cfg.dt


def occupancy_schedule(timestamp: datetime, schedule_cfg: ScheduleConfig = ScheduleConfig()) -> int:
    if timestamp.weekday() >= 5:
        return 0
    if schedule_cfg.start <= timestamp.time() < schedule_cfg.end:
        return schedule_cfg.headcount
    return 0


_SEASONS = {
    "winter": dict(mean=2.0, amplitude=5.0, start=datetime(2021, 1, 1)),
    "summer": dict(mean=28.0, amplitude=6.0, start=datetime(2021, 7, 1)),
}


def generate_weather(days: int, season: str, seed: int, *, start: datetime | None = None,
                     dt: float = 900.0,
                     schedule_cfg: ScheduleConfig = ScheduleConfig()) -> DisturbanceTrace:
    """Synthetic diurnal weather with scheduled occupancy.

    Outdoor temperature peaks at 15:00; solar is a half-sine between 06:00
    and 18:00 peaking at 600 W/m2; humidity is an AR(1) process around 60 %.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    if season not in _SEASONS:
        raise ValueError(f"season must be one of {sorted(_SEASONS)}")
    profile = _SEASONS[season]
    start = start or profile["start"]
    steps = int(round(days * 86400 / dt))
    rng = np.random.default_rng(seed)
    timestamps = [start + timedelta(seconds=i * dt) for i in range(steps)]
    hours = np.array([ts.hour + ts.minute / 60 + ts.second / 3600 for ts in timestamps])

    temp = (profile["mean"] + profile["amplitude"] * np.sin(2 * np.pi * (hours - 9.0) / 24.0)
            + rng.normal(0.0, 1.0, steps))
    solar = np.maximum(0.0, 600.0 * np.sin(np.pi * (hours - 6.0) / 12.0))
    solar[(hours < 6.0) | (hours > 18.0)] = 0.0
    rh = np.empty(steps)
    innovations = rng.normal(0.0, 3.0, steps)
    level = 60.0
    for i in range(steps):
        level = 60.0 + 0.95 * (level - 60.0) + innovations[i]
        rh[i] = min(max(level, 20.0), 90.0)
    wind = np.abs(rng.normal(3.0, 1.5, steps))
    occ = np.array([occupancy_schedule(ts, schedule_cfg) for ts in timestamps], dtype=float)
    values = np.column_stack([temp, rh, wind, solar, occ])
    return DisturbanceTrace(timestamps, values, dt, meta={"season": season, "seed": seed})


def _parse_timestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.strip())


def load_disturbance_csv(path, dt: float | None = None) -> DisturbanceTrace:
    """Read a disturbance CSV.

    Humidity outside [0, 100] is clamped; the number of clamped rows is
    stored in ``trace.meta["rh_clamped"]``.  Spacing is taken from the first
    two rows unless ``dt`` is given.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("timestamp",) + DISTURBANCE_FIELDS:
            if col not in header:
                raise TraceFormatError(f"{path}: missing column '{col}'")
        timestamps, rows, clamped = [], [], 0
        for lineno, row in enumerate(reader, start=2):
            try:
                ts = _parse_timestamp(row["timestamp"])
                vals = [float(row[c]) for c in DISTURBANCE_FIELDS]
            except (TypeError, ValueError) as exc:
                raise TraceFormatError(f"{path}: row {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise TraceFormatError(f"{path}: row {lineno}: non-finite value")
            if not 0.0 <= vals[1] <= 100.0:
                vals[1] = min(max(vals[1], 0.0), 100.0)
                clamped += 1
            if vals[2] < 0 or vals[3] < 0 or vals[4] < 0:
                raise TraceFormatError(f"{path}: row {lineno}: negative wind, solar or occupancy")
            timestamps.append(ts)
            rows.append(vals)
    if dt is None:
        dt = (timestamps[1] - timestamps[0]).total_seconds() if len(timestamps) > 1 else 900.0
    if dt <= 0:
        raise TraceFormatError(f"{path}: timestamps must be strictly increasing")
    trace = DisturbanceTrace(timestamps, np.array(rows).reshape(-1, 5), dt)
    trace.meta["rh_clamped"] = clamped
    trace.meta["source"] = str(path)
    return trace


def write_disturbance_csv(trace: DisturbanceTrace, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("timestamp",) + DISTURBANCE_FIELDS)
        for ts, row in zip(trace.timestamps, trace.values):
            w.writerow([ts.isoformat(), *(f"{v:.6g}" for v in row[:4]), int(round(row[4]))])


def baseline_policy(state: ZoneState, dist: DisturbanceVector, comfort: ComfortRange) -> SetpointAction:
    """Rule-based thermostat: comfort bounds while occupied, HVAC off otherwise."""
    if dist.occupant_count <= 0:
        return OFF_ACTION
    heat = min(max(round(comfort.lower), HEAT_RANGE[0]), HEAT_RANGE[1])
    cool = min(max(round(comfort.upper), COOL_RANGE[0]), COOL_RANGE[1])
    return SetpointAction(heat, max(heat, cool))
