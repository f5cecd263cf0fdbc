"""Feedforward regressor for one-step zone-temperature prediction.

Inputs are ``[zone_temp, outdoor_temp, outdoor_rh, wind_speed, solar_rad,
occupant_count, heat_sp, cool_sp]``, z-scored per feature.  The network
predicts the z-scored temperature increment ``s' - s``; ``predict`` adds it
back so callers always see the next temperature.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from treehvac.building import DisturbanceVector, SetpointAction, ZoneState

log = logging.getLogger(__name__)

INPUT_DIM = 8
HIDDEN = (64, 64)


@dataclass(frozen=True)
class TransitionRecord:
    s: ZoneState
    d: DisturbanceVector
    a: SetpointAction
    s_next: ZoneState

    def features(self) -> np.ndarray:
        return np.concatenate([[self.s.zone_temp], self.d.as_array(),
                               [self.a.heat_sp, self.a.cool_sp]])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 64
    seed: int = 0
    hidden: tuple[int, ...] = HIDDEN

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError(f"invalid TrainConfig {self}")


class DegenerateDataWarning(UserWarning):
    pass


# -- network primitives ------------------------------------------------------

def init_params(layer_dims: Sequence[int], rng: np.random.Generator) -> list[np.ndarray]:
    """Xavier-uniform weights, zero biases, as a flat [W0, b0, W1, b1, ...] list."""
    params = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params: Sequence[np.ndarray], X: np.ndarray) -> np.ndarray:
    h = X
    n_layers = len(params) // 2
    for i in range(n_layers):
        h = h @ params[2 * i] + params[2 * i + 1]
        if i < n_layers - 1:
            h = np.tanh(h)
    return h[:, 0]


def loss_and_grads(params: Sequence[np.ndarray], X: np.ndarray, y: np.ndarray,
                   weight_decay: float = 0.0) -> tuple[float, list[np.ndarray]]:
    """Mean squared error plus ``weight_decay/2 * ||W||^2`` and its gradient.

    The penalty covers weights and biases alike, so its gradient is the
    ``weight_decay * theta`` term of coupled L2 decay.
    """
    n_layers = len(params) // 2
    acts = [X]
    h = X
    for i in range(n_layers):
        h = h @ params[2 * i] + params[2 * i + 1]
        if i < n_layers - 1:
            h = np.tanh(h)
        acts.append(h)
    pred = h[:, 0]
    resid = pred - y
    n = len(y)
    loss = float(np.mean(resid ** 2))
    loss += 0.5 * weight_decay * sum(float(np.sum(p * p)) for p in params)

    grads: list[np.ndarray] = [np.empty(0)] * len(params)
    delta = (2.0 / n) * resid[:, None]
    for i in reversed(range(n_layers)):
        grads[2 * i] = acts[i].T @ delta + weight_decay * params[2 * i]
        grads[2 * i + 1] = delta.sum(axis=0) + weight_decay * params[2 * i + 1]
        if i > 0:
            delta = (delta @ params[2 * i].T) * (1.0 - acts[i] ** 2)
    return loss, grads


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -- model -------------------------------------------------------------------

@dataclass
class DynamicsModel:
    params: list[np.ndarray]
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    train_config: TrainConfig = field(default_factory=TrainConfig)
    loss_history: list[float] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    @property
    def layer_dims(self) -> list[int]:
        return [self.params[0].shape[0]] + [W.shape[1] for W in self.params[0::2]]

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean) / self.x_std

    def denormalize(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.x_std + self.x_mean

    def predict_features(self, X: np.ndarray) -> np.ndarray:
        """Next temperature for rows of the 8-column feature matrix."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        delta = forward(self.params, self.normalize(X)) * self.y_std + self.y_mean
        return X[:, 0] + delta

    def predict_batch(self, inputs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """``inputs`` is (n, 6) of [zone_temp, disturbances]; ``actions`` is (n, 2)."""
        return self.predict_features(np.hstack([np.atleast_2d(inputs), np.atleast_2d(actions)]))

    def to_dict(self) -> dict:
        return {
            "format": "treehvac-dynamics",
            "version": 1,
            "layer_dims": self.layer_dims,
            "activation": "tanh",
            "target": "delta_zone_temp",
            "weights": [W.tolist() for W in self.params[0::2]],
            "biases": [b.tolist() for b in self.params[1::2]],
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "train_config": {**asdict(self.train_config), "hidden": list(self.train_config.hidden)},
            "seed": self.train_config.seed,
            "loss_history": self.loss_history,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DynamicsModel:
        params = []
        for W, b in zip(d["weights"], d["biases"]):
            params += [np.array(W, dtype=float), np.array(b, dtype=float)]
        tc = dict(d.get("train_config", {}))
        if "hidden" in tc:
            tc["hidden"] = tuple(tc["hidden"])
        return cls(params, np.array(d["x_mean"]), np.array(d["x_std"]), float(d["y_mean"]),
                   float(d["y_std"]), TrainConfig(**tc), list(d.get("loss_history", [])),
                   dict(d.get("flags", {})))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> DynamicsModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def records_to_arrays(data: Sequence[TransitionRecord]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([r.features() for r in data], dtype=float).reshape(-1, INPUT_DIM)
    y = np.array([r.s_next.zone_temp for r in data], dtype=float)
    return X, y


def _safe_std(a: np.ndarray) -> np.ndarray:
    std = np.atleast_1d(a.std(axis=0))
    std[std < 1e-12] = 1.0
    return std


def fit_dynamics(data: Sequence[TransitionRecord] | tuple[np.ndarray, np.ndarray],
                 cfg: TrainConfig = TrainConfig()) -> DynamicsModel:
    """Mini-batch Adam on MSE with coupled L2 weight decay.

    ``data`` may also be a pre-built ``(X, s_next)`` pair of arrays.  The
    result depends only on the data and ``cfg.seed``.
    """
    X, y = data if isinstance(data, tuple) else records_to_arrays(data)
    n = len(y)
    if n < 2 * cfg.batch_size:
        raise ValueError(f"need at least {2 * cfg.batch_size} transitions for batch size "
                         f"{cfg.batch_size}, got {n}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("transition data must be finite")

    delta = y - X[:, 0]
    flags = {}
    if np.ptp(delta) < 1e-9:
        warnings.warn("all regression targets identical; output scale fixed to 1",
                      DegenerateDataWarning, stacklevel=2)
        flags["degenerate_targets"] = True
    x_mean, x_std = X.mean(axis=0), _safe_std(X)
    y_mean, y_std = float(delta.mean()), float(_safe_std(delta)[0])

    Xn = (X - x_mean) / x_std
    yn = (delta - y_mean) / y_std
    rng = np.random.default_rng(cfg.seed)
    params = init_params([X.shape[1], *cfg.hidden, 1], rng)
    opt = Adam(params, lr=cfg.learning_rate)

    history = [loss_and_grads(params, Xn, yn)[0]]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(params, Xn[idx], yn[idx], cfg.weight_decay)
            opt.step(params, grads)
            total += loss * len(idx)
        history.append(total / n)
        if (epoch + 1) % 50 == 0:
            log.debug("epoch %d loss %.3e", epoch + 1, history[-1])
    return DynamicsModel(params, x_mean, x_std, y_mean, y_std, cfg, history, flags)


def predict(model, s, d: DisturbanceVector, a: SetpointAction) -> ZoneState:
    temp = getattr(s, "zone_temp", s)
    x = np.concatenate([[temp], d.as_array()])
    return ZoneState(float(model.predict_batch(x[None, :], np.array([[a.heat_sp, a.cool_sp]]))[0]))


def evaluate_model(model, data: Sequence[TransitionRecord]) -> float:
    """Root-mean-square next-temperature error in degC."""
    if len(data) == 0:
        raise ValueError("cannot evaluate on empty data")
    X, y = records_to_arrays(data)
    pred = model.predict_batch(X[:, :6], X[:, 6:])
    return float(np.sqrt(np.mean((pred - y) ** 2)))
