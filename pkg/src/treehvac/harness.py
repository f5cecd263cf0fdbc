"""Closed-loop evaluation, metrics, latency benchmarking and the end-to-end
pipeline used by the command line."""

from __future__ import annotations

import csv
import logging
import statistics
import time as _time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from treehvac.building import (
    DisturbanceTrace, DisturbanceVector, PlantConfig, PlantDivergenceError,
    ScheduleConfig, SetpointAction, VALID_ACTIONS, ZoneState, baseline_policy,
    generate_weather, step_plant,
)
from treehvac.dynamics import TrainConfig, TransitionRecord, fit_dynamics
from treehvac.extraction import (
    CartParams, DecisionRecord, NoiseConfig, build_decision_dataset, fit_cart,
)
from treehvac.mpc import MPCConfig, random_shooting
from treehvac.objective import ComfortRange, RewardConfig, comfort_violation, energy_proxy, reward
from treehvac.tree import TreePolicy
from treehvac.verifier import VerifyConfig, verify_and_correct, verify_paths

log = logging.getLogger(__name__)

J_PER_KWH = 3.6e6


# -- policies ------------------------------------------------------------------

class Policy:
    name = "policy"
    uses_seed = False

    def act(self, state: ZoneState, trace: DisturbanceTrace, t: int, seed: int) -> SetpointAction:
        raise NotImplementedError


class BaselineController(Policy):
    name = "baseline"

    def __init__(self, comfort: ComfortRange):
        self.comfort = comfort

    def act(self, state, trace, t, seed):
        return baseline_policy(state, trace[t][1], self.comfort)


class TreeController(Policy):
    name = "tree"

    def __init__(self, tree: TreePolicy):
        self.tree = tree

    def act(self, state, trace, t, seed):
        x = [state.zone_temp, *trace.values[t]]
        return self.tree(x)


class RSController(Policy):
    """Random-shooting MPC with a perfect disturbance forecast."""

    name = "rs_mbrl"
    uses_seed = True

    def __init__(self, model, mpc_cfg: MPCConfig = MPCConfig(), reward_cfg: RewardConfig = RewardConfig()):
        self.model = model
        self.mpc_cfg = mpc_cfg
        self.reward_cfg = reward_cfg

    def act(self, state, trace, t, seed):
        forecast = trace.window(t, self.mpc_cfg.horizon)
        return random_shooting(self.model, state.zone_temp, forecast, self.mpc_cfg,
                               self.reward_cfg, seed=step_seed(seed, t))


class EpsilonGreedyBaseline(Policy):
    """Baseline with probability-``epsilon`` uniformly random valid actions."""

    name = "baseline_eps"
    uses_seed = True

    def __init__(self, comfort: ComfortRange, epsilon: float = 0.2):
        self.comfort = comfort
        self.epsilon = epsilon
        self._rng = None

    def act(self, state, trace, t, seed):
        if t == 0 or self._rng is None:
            self._rng = np.random.default_rng(seed)
        if self._rng.random() < self.epsilon:
            return VALID_ACTIONS[self._rng.integers(len(VALID_ACTIONS))]
        return baseline_policy(state, trace[t][1], self.comfort)


def step_seed(seed: int, t: int) -> int:
    return seed * 1_000_003 + t


# -- episodes ------------------------------------------------------------------

@dataclass
class EpisodeTrace:
    """Per-step closed-loop record; ``zone_temp`` is the temperature reached
    at the end of the step, which is what ``reward`` and ``in_comfort`` score."""

    timestamps: list[datetime] = field(default_factory=list)
    start_temp: list[float] = field(default_factory=list)
    zone_temp: list[float] = field(default_factory=list)
    actions: list[SetpointAction] = field(default_factory=list)
    hvac_energy_J: list[float] = field(default_factory=list)
    energy_proxy: list[float] = field(default_factory=list)
    reward: list[float] = field(default_factory=list)
    occupants: list[int] = field(default_factory=list)
    in_comfort: list[bool] = field(default_factory=list)
    disturbances: list[np.ndarray] = field(default_factory=list)
    dt: float = 900.0
    policy: str = ""

    def __len__(self):
        return len(self.zone_temp)

    @property
    def heat_sp(self) -> np.ndarray:
        return np.array([a.heat_sp for a in self.actions])

    @property
    def cool_sp(self) -> np.ndarray:
        return np.array([a.cool_sp for a in self.actions])

    def transitions(self) -> list[TransitionRecord]:
        return [TransitionRecord(ZoneState(s), DisturbanceVector.from_array(d), a, ZoneState(s2))
                for s, d, a, s2 in zip(self.start_temp, self.disturbances, self.actions, self.zone_temp)]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "zone_temp", "heat_sp", "cool_sp", "hvac_energy_J", "occupants"])
            for ts, s, a, e, n in zip(self.timestamps, self.zone_temp, self.actions,
                                      self.hvac_energy_J, self.occupants):
                w.writerow([ts.isoformat(), f"{s:.6f}", a.heat_sp, a.cool_sp, f"{e:.3f}", n])


class EpisodeAborted(RuntimeError):
    def __init__(self, message: str, partial: EpisodeTrace):
        super().__init__(message)
        self.partial = partial


def run_closed_loop(policy: Policy, trace: DisturbanceTrace, plant_cfg: PlantConfig = PlantConfig(),
                    reward_cfg: RewardConfig = RewardConfig(), seed: int = 0,
                    initial_temp: float | None = None) -> EpisodeTrace:
    """Drive the plant with ``policy`` over every step of ``trace``.

    Raises EpisodeAborted (carrying the partial trace) on plant divergence.
    """
    comfort = reward_cfg.comfort
    s = ZoneState(comfort.lower if initial_temp is None else initial_temp)
    ep = EpisodeTrace(dt=plant_cfg.dt, policy=policy.name)
    for t in range(len(trace)):
        ts, d = trace[t]
        a = policy.act(s, trace, t, seed)
        try:
            s_next, energy = step_plant(s, d, a, plant_cfg)
        except PlantDivergenceError as exc:
            raise EpisodeAborted(f"step {t} ({ts}): {exc}", ep) from exc
        ep.timestamps.append(ts)
        ep.start_temp.append(s.zone_temp)
        ep.zone_temp.append(s_next.zone_temp)
        ep.actions.append(a)
        ep.hvac_energy_J.append(energy)
        ep.energy_proxy.append(energy_proxy(a))
        ep.reward.append(reward(s_next, a, d.occupied, reward_cfg))
        ep.occupants.append(d.occupant_count)
        ep.in_comfort.append(comfort.contains(s_next.zone_temp))
        ep.disturbances.append(trace.values[t])
        s = s_next
    return ep


@dataclass
class Metrics:
    total_energy_kWh: float
    total_proxy: float
    comfort_rate: float
    violation_degree_hours: float
    performance_ratio: float
    occupied_steps: int
    steps: int

    def as_row(self) -> dict:
        return dict(self.__dict__)


def compute_metrics(ep: EpisodeTrace, comfort: ComfortRange) -> Metrics:
    """Energy, proxy and occupied-step comfort statistics.

    With no occupied steps the comfort rate is 1 by convention.  The
    performance ratio is ``1000 * comfort_rate / kWh`` (infinite at zero
    energy).
    """
    if len(ep) == 0:
        raise ValueError("empty episode")
    temps = np.array(ep.zone_temp)
    occ = np.array(ep.occupants) > 0
    kwh = float(np.sum(ep.hvac_energy_J)) / J_PER_KWH
    if occ.any():
        inside = (temps[occ] >= comfort.lower) & (temps[occ] <= comfort.upper)
        rate = float(inside.mean())
    else:
        rate = 1.0
    degree_hours = float(np.sum(comfort_violation(temps[occ], comfort))) * ep.dt / 3600.0
    ratio = 1000.0 * rate / kwh if kwh > 0 else float("inf")
    return Metrics(kwh, float(np.sum(ep.energy_proxy)), rate, degree_hours, ratio,
                   int(occ.sum()), len(ep))


def setpoint_spread(episodes: Sequence[EpisodeTrace]) -> tuple[np.ndarray, np.ndarray]:
    """Per-step population std of heating and cooling setpoints across runs."""
    heat = np.array([ep.heat_sp for ep in episodes], dtype=float)
    cool = np.array([ep.cool_sp for ep in episodes], dtype=float)
    return heat.std(axis=0), cool.std(axis=0)


def stochasticity_diagnostic(policies: dict[str, Policy], trace: DisturbanceTrace,
                             plant_cfg: PlantConfig, reward_cfg: RewardConfig,
                             seeds: Sequence[int] = range(1, 11)) -> dict[str, dict]:
    """Run each policy once per seed on the same trace and summarise setpoint spread."""
    out = {}
    for name, pol in policies.items():
        eps = [run_closed_loop(pol, trace, plant_cfg, reward_cfg, seed=s) for s in seeds]
        hs, cs = setpoint_spread(eps)
        out[name] = {"episodes": eps, "heat_std": hs, "cool_std": cs,
                     "steps_with_spread": int(np.sum((hs > 0) | (cs > 0))),
                     "max_heat_std": float(hs.max()), "max_cool_std": float(cs.max())}
    return out


# -- latency -------------------------------------------------------------------

def bench_latency(policy: Callable[[np.ndarray], SetpointAction], inputs: Sequence, warmup: int = 5,
                  reps: int = 100) -> tuple[float, float]:
    """Mean and std of per-decision wall time in milliseconds.

    ``policy`` maps a 6-vector to an action; inputs are cycled.
    """
    if reps < 30:
        raise ValueError("reps must be >= 30")
    if len(inputs) == 0:
        raise ValueError("need at least one input")
    for k in range(warmup):
        policy(inputs[k % len(inputs)])
    times = []
    for k in range(reps):
        x = inputs[k % len(inputs)]
        t0 = _time.perf_counter()
        policy(x)
        times.append((_time.perf_counter() - t0) * 1e3)
    return statistics.fmean(times), statistics.pstdev(times)


def decision_functions(tree: TreePolicy | None = None, model=None, mpc_cfg: MPCConfig = MPCConfig(),
                       reward_cfg: RewardConfig = RewardConfig()) -> dict[str, Callable]:
    """Per-decision callables on 6-vectors for benchmarking.

    The random-shooting decision holds the input's disturbance over the
    horizon, as during labelling.
    """
    comfort = reward_cfg.comfort
    fns = {"baseline": lambda x: baseline_policy(ZoneState(float(x[0])),
                                                 DisturbanceVector.from_array(x[1:]), comfort)}
    if model is not None:
        H = mpc_cfg.horizon

        def rs(x):
            return random_shooting(model, x[0], np.tile(np.asarray(x[1:], float), (H, 1)),
                                   mpc_cfg, reward_cfg)
        fns["rs_mbrl"] = rs
    if tree is not None:
        fns["tree"] = tree
    return fns


# -- pipeline pieces -------------------------------------------------------------

def collect_history(days: int = 31, season: str = "winter", seed: int = 0,
                    plant_cfg: PlantConfig = PlantConfig(), reward_cfg: RewardConfig = RewardConfig(),
                    schedule_cfg: ScheduleConfig = ScheduleConfig(), epsilon: float = 0.2
                    ) -> tuple[list[TransitionRecord], np.ndarray]:
    """Synthetic building-management history.

    One ``days``-long run of the baseline and one of its epsilon-random
    variant on independently seeded weather.  Returns the transitions and
    the (n, 6) policy-input matrix.
    """
    transitions = []
    for k, policy in enumerate((BaselineController(reward_cfg.comfort),
                                EpsilonGreedyBaseline(reward_cfg.comfort, epsilon))):
        trace = generate_weather(days, season, seed * 7919 + k, schedule_cfg=schedule_cfg)
        ep = run_closed_loop(policy, trace, plant_cfg, reward_cfg, seed=seed + k)
        transitions += ep.transitions()
    inputs = np.array([[r.s.zone_temp, *r.d.as_array()] for r in transitions])
    return transitions, inputs


def write_transitions_csv(records: Sequence[TransitionRecord], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone_temp", "outdoor_temp", "outdoor_rh", "wind_speed", "solar_rad",
                    "occupant_count", "heat_sp", "cool_sp", "next_zone_temp"])
        for r in records:
            w.writerow([repr(r.s.zone_temp), *(repr(float(v)) for v in r.d.as_array()[:4]),
                        r.d.occupant_count, r.a.heat_sp, r.a.cool_sp, repr(r.s_next.zone_temp)])


def read_transitions_csv(path) -> list[TransitionRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            d = DisturbanceVector(float(row["outdoor_temp"]), float(row["outdoor_rh"]),
                                  float(row["wind_speed"]), float(row["solar_rad"]),
                                  int(row["occupant_count"]))
            out.append(TransitionRecord(ZoneState(float(row["zone_temp"])), d,
                                        SetpointAction(int(row["heat_sp"]), int(row["cool_sp"])),
                                        ZoneState(float(row["next_zone_temp"]))))
    return out


def history_inputs(records: Sequence[TransitionRecord]) -> np.ndarray:
    return np.array([[r.s.zone_temp, *r.d.as_array()] for r in records])


def extract_tree(model, history: np.ndarray, n: int, noise_cfg: NoiseConfig, mpc_cfg: MPCConfig,
                 reward_cfg: RewardConfig, cart: CartParams = CartParams(),
                 records: Sequence[DecisionRecord] | None = None) -> tuple[TreePolicy, list[DecisionRecord]]:
    if records is None:
        records = build_decision_dataset(model, history, n, noise_cfg, mpc_cfg, reward_cfg)
    records = list(records)[:n]
    return fit_cart(records, cart), records


def data_efficiency_sweep(model, history: np.ndarray, sizes: Sequence[int], eval_trace: DisturbanceTrace,
                          plant_cfg: PlantConfig = PlantConfig(), reward_cfg: RewardConfig = RewardConfig(),
                          noise_cfg: NoiseConfig = NoiseConfig(), mpc_cfg: MPCConfig = MPCConfig(),
                          cart: CartParams = CartParams(), records: Sequence[DecisionRecord] | None = None,
                          verify: bool = True) -> list[dict]:
    """Performance ratio and tree size for trees fitted on the first ``n``
    decision records, for each ``n`` in ``sizes``.

    One dataset of ``max(sizes)`` records is labelled and its prefixes are
    reused; prefixes equal independently built smaller datasets.
    """
    if not sizes:
        raise ValueError("sizes must be non-empty")
    n_max = max(sizes)
    if records is None or len(records) < n_max:
        records = build_decision_dataset(model, history, n_max, noise_cfg, mpc_cfg, reward_cfg)
    rows = []
    for n in sizes:
        tree = fit_cart(records[:n], cart)
        if verify:
            tree = correct_tree_only(tree, reward_cfg.comfort)
        ep = run_closed_loop(TreeController(tree), eval_trace, plant_cfg, reward_cfg)
        m = compute_metrics(ep, reward_cfg.comfort)
        rows.append({"n": n, "performance_ratio": m.performance_ratio, "tree_size": tree.n_nodes,
                     "leaf_nodes": tree.n_leaves, "total_energy_kWh": m.total_energy_kWh,
                     "comfort_rate": m.comfort_rate})
    return rows


def correct_tree_only(tree: TreePolicy, comfort: ComfortRange) -> TreePolicy:
    from treehvac.verifier import correct_tree
    return correct_tree(tree, verify_paths(tree, comfort), comfort)


def trace_respects_direction(ep: EpisodeTrace, comfort: ComfortRange) -> list[int]:
    """Steps where the observed zone was outside comfort and the action did
    not push back (cooling setpoint not below a hot zone, heating setpoint
    not above a cold one)."""
    bad = []
    for t, (s, a) in enumerate(zip(ep.start_temp, ep.actions)):
        if s > comfort.upper and not a.cool_sp < s:
            bad.append(t)
        elif s < comfort.lower and not a.heat_sp > s:
            bad.append(t)
    return bad


@dataclass
class PipelineResult:
    history: list[TransitionRecord]
    inputs: np.ndarray
    model: object
    records: list[DecisionRecord]
    tree: TreePolicy
    verified_tree: TreePolicy
    report: object


def run_pipeline(*, seed: int = 0, history_days: int = 31, season: str = "winter", n_decisions: int = 200,
                 plant_cfg: PlantConfig = PlantConfig(), reward_cfg: RewardConfig = RewardConfig(),
                 train_cfg: TrainConfig | None = None, noise_cfg: NoiseConfig | None = None,
                 mpc_cfg: MPCConfig | None = None, cart: CartParams = CartParams(),
                 verify_cfg: VerifyConfig | None = None,
                 schedule_cfg: ScheduleConfig = ScheduleConfig()) -> PipelineResult:
    """collect -> train -> extract -> verify, all derived from one seed."""
    train_cfg = train_cfg or TrainConfig(seed=seed)
    noise_cfg = noise_cfg or NoiseConfig(seed=seed)
    mpc_cfg = mpc_cfg or MPCConfig(seed=seed)
    verify_cfg = verify_cfg or VerifyConfig(comfort=reward_cfg.comfort, noise_cfg=noise_cfg, seed=seed)
    history, inputs = collect_history(history_days, season, seed, plant_cfg, reward_cfg, schedule_cfg)
    model = fit_dynamics(history, train_cfg)
    tree, records = extract_tree(model, inputs, n_decisions, noise_cfg, mpc_cfg, reward_cfg, cart)
    verified, report = verify_and_correct(tree, model, inputs, verify_cfg)
    return PipelineResult(history, inputs, model, records, tree, verified, report)
