"""Random-shooting model-predictive control over a learned dynamics model."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from treehvac.building import VALID_ACTION_ARRAY, VALID_ACTIONS, SetpointAction
from treehvac.objective import RewardConfig, energy_proxy, reward_array


@dataclass(frozen=True)
class MPCConfig:
    sample_number: int = 1000
    horizon: int = 20
    gamma: float = 0.99
    seed: int = 0
    repeats: int = 10

    def __post_init__(self):
        if self.sample_number < 1 or self.horizon < 1 or self.repeats < 1:
            raise ValueError(f"invalid MPCConfig {self}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


def score_sequences(model, s0: float, dist_forecast: np.ndarray, actions: np.ndarray,
                    reward_cfg: RewardConfig, gamma: float) -> np.ndarray:
    """Discounted returns of K action sequences.

    ``actions`` is (K, H, 2), ``dist_forecast`` is (H, 5).  Step ``t``
    (1-based) scores the predicted state ``s_t`` with the action that produced
    it, weighted by ``gamma**t``.
    """
    actions = np.asarray(actions, dtype=float)
    K, H, _ = actions.shape
    dist_forecast = np.asarray(dist_forecast, dtype=float)
    s = np.full(K, float(s0))
    total = np.zeros(K)
    for t in range(H):
        d = np.broadcast_to(dist_forecast[t], (K, dist_forecast.shape[1]))
        s = model.predict_batch(np.column_stack([s, d]), actions[:, t, :])
        r = reward_array(s, actions[:, t, 0], actions[:, t, 1], dist_forecast[t, 4] > 0, reward_cfg)
        total += gamma ** (t + 1) * r
    return total


def rollout_return(model, s0, dist_forecast, actions, reward_cfg: RewardConfig, gamma: float) -> float:
    """Discounted return of one action sequence through ``model``."""
    dist_forecast = np.asarray(dist_forecast, dtype=float)
    acts = np.array([[a.heat_sp, a.cool_sp] if isinstance(a, SetpointAction) else a
                     for a in actions], dtype=float)
    if len(dist_forecast) != len(acts):
        raise ValueError(f"forecast length {len(dist_forecast)} != action length {len(acts)}")
    temp = getattr(s0, "zone_temp", s0)
    return float(score_sequences(model, temp, dist_forecast, acts[None], reward_cfg, gamma)[0])


def sample_action_indices(rng: np.random.Generator, shape) -> np.ndarray:
    # Uniform over the valid pairs; identical in law to rejection sampling on
    # the full heat x cool grid.
    return rng.integers(0, len(VALID_ACTIONS), size=shape)


def random_shooting(model, s0, dist_forecast, cfg: MPCConfig = MPCConfig(),
                    reward_cfg: RewardConfig = RewardConfig(), *, seed: int | None = None,
                    return_scores: bool = False):
    """First action of the best of ``cfg.sample_number`` random sequences.

    ``seed`` overrides ``cfg.seed``.  Ties go to the lowest candidate index.
    """
    dist_forecast = np.asarray(dist_forecast, dtype=float)
    if len(dist_forecast) < cfg.horizon:
        raise ValueError(f"forecast has {len(dist_forecast)} rows, horizon is {cfg.horizon}")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    idx = sample_action_indices(rng, (cfg.sample_number, cfg.horizon))
    temp = getattr(s0, "zone_temp", s0)
    scores = score_sequences(model, temp, dist_forecast[:cfg.horizon], VALID_ACTION_ARRAY[idx],
                             reward_cfg, cfg.gamma)
    best = int(np.argmax(scores))
    action = VALID_ACTIONS[idx[best, 0]]
    if return_scores:
        return action, scores, idx
    return action


def _mode_key(item: tuple[SetpointAction, int]):
    action, count = item
    return (-count, energy_proxy(action), action.heat_sp, action.cool_sp)


def select_mode(histogram: dict[SetpointAction, int]) -> SetpointAction:
    """Most frequent action; ties to the lowest energy proxy, then lexicographic."""
    if not histogram:
        raise ValueError("empty histogram")
    return min(histogram.items(), key=_mode_key)[0]


def mode_action(model, s0, dist_forecast, cfg: MPCConfig = MPCConfig(),
                reward_cfg: RewardConfig = RewardConfig(), repeats: int | None = None,
                seed: int | None = None) -> tuple[SetpointAction, dict[SetpointAction, int]]:
    """Modal first action over ``repeats`` random-shooting runs seeded
    ``seed, seed+1, ..., seed+repeats-1``."""
    M = cfg.repeats if repeats is None else repeats
    if M < 1:
        raise ValueError("repeats must be >= 1")
    base = cfg.seed if seed is None else seed
    hist = Counter(random_shooting(model, s0, dist_forecast, cfg, reward_cfg, seed=base + k)
                   for k in range(M))
    return select_mode(hist), dict(hist)
