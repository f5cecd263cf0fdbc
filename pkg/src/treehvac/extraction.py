"""Decision-dataset generation and CART fitting.

Inputs are drawn from the historical input distribution with per-feature
Gaussian jitter, labelled with the modal random-shooting action, and
distilled into a single classification tree over setpoint pairs.
"""

from __future__ import annotations

import csv
import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import jensenshannon
from scipy.stats import entropy

from treehvac.building import FEATURE_NAMES, SetpointAction
from treehvac.mpc import MPCConfig, mode_action
from treehvac.objective import RewardConfig, energy_proxy
from treehvac.tree import TreePolicy

log = logging.getLogger(__name__)

RH, WIND, SOLAR, OCC = 2, 3, 4, 5


@dataclass(frozen=True)
class DecisionRecord:
    x: tuple[float, ...]
    a_star: SetpointAction

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if not all(np.isfinite(x)):
            raise ValueError(f"non-finite decision input {x}")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class NoiseConfig:
    noise_level: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")


@dataclass(frozen=True)
class CartParams:
    max_depth: int | None = None
    min_samples_split: int = 2

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


# -- input augmentation ------------------------------------------------------

class InputSampler:
    """Draws jittered copies of historical rows.

    The per-feature population standard deviation is computed once; a
    zero-variance feature is never perturbed.
    """

    def __init__(self, history_inputs, cfg: NoiseConfig = NoiseConfig()):
        self.history = np.atleast_2d(np.asarray(history_inputs, dtype=float))
        if self.history.shape[0] == 0:
            raise ValueError("history is empty")
        self.sigma = self.history.std(axis=0)
        self.cfg = cfg

    def draw(self, rng: np.random.Generator, k: int | None = None) -> np.ndarray:
        single = k is None
        k = 1 if single else k
        rows = self.history[rng.integers(0, len(self.history), size=k)]
        noise = rng.standard_normal(rows.shape) * (self.cfg.noise_level * self.sigma)
        out = self._project(rows + noise)
        return out[0] if single else out

    def draw_with(self, idx: np.ndarray, z: np.ndarray, noise_level: float) -> np.ndarray:
        """Deterministic variant given row indices and standard-normal draws."""
        return self._project(self.history[idx] + z * (noise_level * self.sigma))

    def _project(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] > OCC:
            X[:, RH] = np.clip(X[:, RH], 0.0, 100.0)
            X[:, WIND] = np.maximum(X[:, WIND], 0.0)
            X[:, SOLAR] = np.maximum(X[:, SOLAR], 0.0)
            X[:, OCC] = np.maximum(np.rint(X[:, OCC]), 0.0)
        return X


def augment_sample(history_inputs, cfg: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """One jittered historical input (6-vector)."""
    return InputSampler(history_inputs, cfg).draw(rng)


# -- decision dataset --------------------------------------------------------

def record_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def label_input(model, x: np.ndarray, mpc_cfg: MPCConfig, reward_cfg: RewardConfig,
                seed: int) -> tuple[SetpointAction, dict]:
    """Modal action for one input, holding its disturbance constant over the horizon."""
    forecast = np.tile(x[1:], (mpc_cfg.horizon, 1))
    return mode_action(model, x[0], forecast, mpc_cfg, reward_cfg, seed=seed)


def build_decision_dataset(model, history, n: int, noise_cfg: NoiseConfig = NoiseConfig(),
                           mpc_cfg: MPCConfig = MPCConfig(), reward_cfg: RewardConfig = RewardConfig(),
                           workers: int = 1, stats: dict | None = None) -> list[DecisionRecord]:
    """Label ``n`` augmented inputs with modal random-shooting actions.

    Record ``i`` uses its own generator seeded from ``(noise_cfg.seed, i)`` and
    optimizer seeds ``mpc_cfg.seed + i*repeats ...``, so any prefix of the
    result equals the dataset built with a smaller ``n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    sampler = InputSampler(history, noise_cfg)
    M = mpc_cfg.repeats

    def one(i: int) -> DecisionRecord:
        x = sampler.draw(record_rng(noise_cfg.seed, i))
        a, _ = label_input(model, x, mpc_cfg, reward_cfg, mpc_cfg.seed + i * M)
        return DecisionRecord(tuple(x), a)

    t0 = _time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(one, range(n)))
    else:
        records = [one(i) for i in range(n)]
    elapsed = _time.perf_counter() - t0
    if stats is not None:
        calls = n * M * mpc_cfg.sample_number * mpc_cfg.horizon
        stats.update(records=n, seconds=elapsed, model_calls=calls,
                     seconds_per_record=elapsed / n)
    log.info("labelled %d decision records in %.1f s", n, elapsed)
    return records


def records_to_arrays(records: Sequence[DecisionRecord]) -> tuple[np.ndarray, list[SetpointAction]]:
    X = np.array([r.x for r in records], dtype=float)
    return X, [r.a_star for r in records]


DECISION_COLUMNS = FEATURE_NAMES + ("heat_sp", "cool_sp")


def write_decision_csv(records: Sequence[DecisionRecord], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DECISION_COLUMNS)
        for r in records:
            w.writerow([repr(v) for v in r.x] + [r.a_star.heat_sp, r.a_star.cool_sp])


def read_decision_csv(path) -> list[DecisionRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in DECISION_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        return [DecisionRecord(tuple(float(row[c]) for c in FEATURE_NAMES),
                               SetpointAction(int(row["heat_sp"]), int(row["cool_sp"])))
                for row in reader]


# -- distribution diagnostics ------------------------------------------------

@dataclass
class DistributionDiagnostics:
    entropy_bits: np.ndarray
    jsd: np.ndarray

    @property
    def mean_entropy(self) -> float:
        return float(np.mean(self.entropy_bits))

    @property
    def mean_jsd(self) -> float:
        return float(np.mean(self.jsd))


def distribution_diagnostics(P, Q, bins: int = 20, ranges=None) -> DistributionDiagnostics:
    """Per-feature base-2 histogram entropy of ``P`` and Jensen-Shannon
    distance between ``P`` and ``Q``.

    Bins span the union range of both samples unless ``ranges`` (one
    ``(lo, hi)`` per feature) pins them.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.size == 0 or Q.size == 0:
        raise ValueError("both sample sets must be non-empty")
    P = P.reshape(len(P), -1)
    Q = Q.reshape(len(Q), -1)
    ent, jsd = [], []
    for j in range(P.shape[1]):
        if ranges is not None:
            lo, hi = ranges[j]
        else:
            lo = min(P[:, j].min(), Q[:, j].min())
            hi = max(P[:, j].max(), Q[:, j].max())
        if hi <= lo:
            hi = lo + 1.0
        hp, _ = np.histogram(np.clip(P[:, j], lo, hi), bins=bins, range=(lo, hi))
        hq, _ = np.histogram(np.clip(Q[:, j], lo, hi), bins=bins, range=(lo, hi))
        ent.append(entropy(hp, base=2))
        jsd.append(float(jensenshannon(hp, hq, base=2)))
    return DistributionDiagnostics(np.array(ent), np.array(jsd))


def noise_sweep(history, levels: Sequence[float], n_samples: int = 20000, bins: int = 20,
                seed: int = 0, reference=None) -> list[dict]:
    """Entropy and JSD of augmented samples across noise levels.

    All levels share the same row indices and standard-normal draws and the
    same bin edges, so differences between levels reflect the noise scale
    only.  ``reference`` (e.g. another site's history) is reported alongside.
    """
    sampler = InputSampler(history)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(sampler.history), size=n_samples)
    z = rng.standard_normal((n_samples, sampler.history.shape[1]))
    samples = {lv: sampler.draw_with(idx, z.copy(), lv) for lv in levels}
    pool = [sampler.history, *samples.values()]
    if reference is not None:
        pool.append(np.asarray(reference, dtype=float))
    stacked = np.vstack(pool)
    ranges = list(zip(stacked.min(axis=0), stacked.max(axis=0)))
    rows = []
    src = distribution_diagnostics(sampler.history, sampler.history, bins, ranges)
    ref = (distribution_diagnostics(reference, sampler.history, bins, ranges)
           if reference is not None else None)
    for lv in levels:
        dg = distribution_diagnostics(samples[lv], sampler.history, bins, ranges)
        row = {"noise_level": lv, "mean_entropy_bits": dg.mean_entropy, "mean_jsd": dg.mean_jsd,
               "source_entropy_bits": src.mean_entropy}
        if ref is not None:
            row["reference_entropy_bits"] = ref.mean_entropy
            row["reference_jsd"] = ref.mean_jsd
        for name, e, d in zip(FEATURE_NAMES, dg.entropy_bits, dg.jsd):
            row[f"entropy_{name}"] = float(e)
            row[f"jsd_{name}"] = float(d)
        rows.append(row)
    return rows


# -- CART ----------------------------------------------------------------------

def _class_order_key(a: SetpointAction):
    return (energy_proxy(a), a.heat_sp, a.cool_sp)


def majority_label(counts: np.ndarray, classes: Sequence[SetpointAction]) -> int:
    """Index of the most frequent class; ties to lowest energy proxy, then lexicographic."""
    top = counts.max()
    tied = [k for k in range(len(classes)) if counts[k] == top]
    return min(tied, key=lambda k: _class_order_key(classes[k]))


_TOL = 1e-12


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int):
    """Lowest weighted-Gini split over midpoints of consecutive distinct values.

    Impurity is kept as ``n * weighted_gini`` = sum over children of
    ``n_c - sum(k^2)/n_c``.  Returns ``(feature, threshold, score)`` or None
    if no candidate strictly beats the parent.  Ties favour the lower
    feature index, then the lower threshold.
    """
    n = len(y)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    total = onehot.sum(axis=0)
    parent = n - float(total @ total) / n
    best = None
    best_score = parent - _TOL
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cut = np.flatnonzero(xs[:-1] < xs[1:])
        if len(cut) == 0:
            continue
        left = np.cumsum(onehot[order], axis=0)[cut]
        n_left = (cut + 1).astype(float)
        right = total - left
        n_right = n - n_left
        score = (n_left - np.einsum("ij,ij->i", left, left) / n_left
                 + n_right - np.einsum("ij,ij->i", right, right) / n_right)
        k = int(np.argmin(score))
        # argmin already returns the lowest threshold among exact ties; widen to
        # ties within tolerance.
        k = int(np.flatnonzero(score <= score[k] + _TOL)[0])
        if score[k] < best_score:
            lo, hi = xs[cut[k]], xs[cut[k] + 1]
            th = 0.5 * (lo + hi)
            if th >= hi:
                th = lo
            best_score = float(score[k])
            best = (f, float(th), best_score)
            best_score -= _TOL
    return best


def fit_cart_arrays(X, labels: Sequence[SetpointAction], params: CartParams = CartParams(),
                    feature_names: Sequence[str] | None = None) -> TreePolicy:
    """Greedy Gini CART on an (n, d) matrix with setpoint-pair labels."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise ValueError("need at least one record")
    if len(labels) != len(X):
        raise ValueError("labels and inputs differ in length")
    classes = sorted(set(labels))
    cls_index = {a: k for k, a in enumerate(classes)}
    y = np.array([cls_index[a] for a in labels], dtype=np.int64)
    K = len(classes)
    if feature_names is None:
        feature_names = FEATURE_NAMES if X.shape[1] == 6 else [f"x{i}" for i in range(X.shape[1])]

    feature, threshold, left, right, heat, cool = [], [], [], [], [], []

    def new_node() -> int:
        for col, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (heat, 0), (cool, 0)):
            col.append(v)
        return len(feature) - 1

    def make_leaf(node: int, idx: np.ndarray):
        a = classes[majority_label(np.bincount(y[idx], minlength=K), classes)]
        heat[node], cool[node] = a.heat_sp, a.cool_sp

    root = new_node()
    stack = [(root, np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        split = None
        if (len(idx) >= params.min_samples_split and np.any(ys != ys[0])
                and (params.max_depth is None or depth < params.max_depth)):
            split = best_split(X[idx], ys, K)
        if split is None:
            make_leaf(node, idx)
            continue
        f, th, _ = split
        mask = X[idx, f] <= th
        feature[node], threshold[node] = f, th
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        stack.append((rnode, idx[~mask], depth + 1))
        stack.append((lnode, idx[mask], depth + 1))
    return TreePolicy(feature, threshold, left, right, heat, cool, root, feature_names)


def fit_cart(records: Sequence[DecisionRecord], params: CartParams = CartParams()) -> TreePolicy:
    if len(records) == 0:
        raise ValueError("need at least one record")
    X, labels = records_to_arrays(records)
    return fit_cart_arrays(X, labels, params)
