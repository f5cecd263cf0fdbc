"""Verification of tree policies against the three comfort criteria.

* Criterion 1 (probabilistic): starting inside the comfort band, the next
  predicted temperature stays inside with probability above ``l``.
* Criterion 2: when the zone is too warm, the cooling setpoint lies below
  the zone temperature.
* Criterion 3: when the zone is too cold, the heating setpoint lies above it.

Criteria 2 and 3 are checked exactly on leaf boxes; failing leaves can be
rewritten to the comfort median.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from treehvac.building import COOL_RANGE, HEAT_RANGE, SetpointAction
from treehvac.extraction import InputSampler, NoiseConfig
from treehvac.objective import WINTER_COMFORT, ComfortRange
from treehvac.tree import BoxRegion, Interval, TreePolicy, enumerate_leaf_boxes

TEMP = 0


class VerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class VerifyConfig:
    comfort: ComfortRange = WINTER_COMFORT
    safe_threshold: float = 0.9
    sample_count: int = 10_000
    horizon: int = 20
    noise_cfg: NoiseConfig = NoiseConfig()
    seed: int = 0
    strict: bool = False

    def __post_init__(self):
        if not 0.0 < self.safe_threshold < 1.0:
            raise ValueError("safe_threshold must lie in (0, 1)")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


@dataclass
class PathResult:
    violations_crit2: list[int]
    violations_crit3: list[int]
    review: list[int] = field(default_factory=list)

    def __iter__(self):
        yield self.violations_crit2
        yield self.violations_crit3

    @property
    def clean(self) -> bool:
        return not self.violations_crit2 and not self.violations_crit3


@dataclass
class ProbResult:
    safe_prob: float
    ci: tuple[float, float]
    passed: bool
    n_start_safe: int
    n_drawn: int

    def __iter__(self):
        yield self.safe_prob
        yield self.ci
        yield self.passed


@dataclass
class VerificationReport:
    total_nodes: int
    leaf_nodes: int
    node_identity_ok: bool
    safe_probability_estimate: float | None
    safe_probability_ci95: tuple[float, float] | None
    safe_threshold: float | None
    pass_criterion_1: bool | None
    violations_crit2: list[int]
    violations_crit3: list[int]
    corrected_crit2: int
    corrected_crit3: int
    corrected_count: int
    start_safe_samples: int | None = None
    review_leaves: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["safe_probability_ci95"] is not None:
            d["safe_probability_ci95"] = list(d["safe_probability_ci95"])
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


# -- box classification --------------------------------------------------------

def _entirely_above(iv: Interval, z: float) -> bool:
    return iv.lo > z or (iv.lo == z and iv.lo_open)


def _entirely_below(iv: Interval, z: float) -> bool:
    return iv.hi < z or (iv.hi == z and iv.hi_open)


def cooling_ok(cool_sp: float, iv: Interval) -> bool:
    """``cool_sp < s`` for every ``s`` in ``iv``."""
    return cool_sp <= iv.lo if iv.lo_open else cool_sp < iv.lo


def heating_ok(heat_sp: float, iv: Interval) -> bool:
    """``heat_sp > s`` for every ``s`` in ``iv``."""
    return heat_sp >= iv.hi if iv.hi_open else heat_sp > iv.hi


def classify_box(box: BoxRegion, comfort: ComfortRange) -> str:
    """'hot', 'cold', 'comfort' (inside the band) or 'straddle'."""
    iv = box[TEMP]
    if _entirely_above(iv, comfort.upper):
        return "hot"
    if _entirely_below(iv, comfort.lower):
        return "cold"
    if iv.lo >= comfort.lower and iv.hi <= comfort.upper:
        return "comfort"
    return "straddle"


def verify_paths(tree: TreePolicy, comfort: ComfortRange = WINTER_COMFORT,
                 strict: bool = False) -> PathResult:
    """Leaf ids failing criterion 2 and criterion 3.

    Only leaves whose zone-temperature interval lies wholly outside the
    comfort band are checked.  With ``strict`` the leaves whose interval
    crosses a comfort boundary are listed in ``review`` (never corrected).
    """
    v2, v3, review = [], [], []
    for leaf, _path, box in enumerate_leaf_boxes(tree):
        if box.empty:
            continue
        a = tree.leaf_action(leaf)
        kind = classify_box(box, comfort)
        if kind == "hot" and not cooling_ok(a.cool_sp, box[TEMP]):
            v2.append(leaf)
        elif kind == "cold" and not heating_ok(a.heat_sp, box[TEMP]):
            v3.append(leaf)
        elif strict and kind == "straddle":
            review.append(leaf)
    return PathResult(sorted(v2), sorted(v3), sorted(review))


def median_action(comfort: ComfortRange) -> SetpointAction:
    """Setpoints nearest the comfort median (round half to even, then clamp)."""
    m = round(comfort.median)
    heat = min(max(m, HEAT_RANGE[0]), HEAT_RANGE[1])
    cool = min(max(m, COOL_RANGE[0]), COOL_RANGE[1])
    return SetpointAction(heat, max(heat, cool))


def _repair(action: SetpointAction, iv: Interval, kind: str) -> SetpointAction:
    """Smallest edit of ``action`` that satisfies the leaf's criterion, if any."""
    heat, cool = action.heat_sp, action.cool_sp
    if kind == "hot" and not cooling_ok(cool, iv):
        cool = math.floor(iv.lo) if iv.lo_open else math.ceil(iv.lo) - 1
        cool = max(cool, COOL_RANGE[0])
        heat = min(heat, cool)
    elif kind == "cold" and not heating_ok(heat, iv):
        heat = math.ceil(iv.hi) if iv.hi_open else math.floor(iv.hi) + 1
        heat = min(heat, HEAT_RANGE[1])
        cool = max(cool, heat)
    return SetpointAction(heat, cool)


def correct_tree(tree: TreePolicy, violations, comfort: ComfortRange = WINTER_COMFORT) -> TreePolicy:
    """New tree with every violating leaf set to the comfort-median action.

    ``violations`` is a PathResult or an iterable of leaf ids.  If the median
    action cannot satisfy a leaf's box (only possible for unusual comfort
    ranges) the setpoint is moved just far enough; if even that is outside
    the setpoint range the leaf is left at the closest attainable value.
    """
    if isinstance(violations, PathResult):
        ids = list(violations.violations_crit2) + list(violations.violations_crit3)
    else:
        ids = [i for group in violations for i in (group if isinstance(group, (list, tuple)) else [group])]
    if not ids:
        return tree
    for i in ids:
        if not (0 <= i < tree.n_nodes) or not tree.is_leaf(i):
            raise ValueError(f"violation id {i} is not a leaf")
    boxes = {leaf: box for leaf, _p, box in enumerate_leaf_boxes(tree)}
    base = median_action(comfort)
    updates = {}
    for i in ids:
        box = boxes[i]
        updates[i] = _repair(base, box[TEMP], classify_box(box, comfort))
    return tree.with_leaf_actions(updates)


# -- criterion 1 ---------------------------------------------------------------

def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def one_step_safe(tree, model, X: np.ndarray, comfort: ComfortRange) -> np.ndarray:
    """Boolean mask: predicted next temperature inside the band."""
    s_next = model.predict_batch(X, tree.infer_batch(X))
    return (s_next >= comfort.lower) & (s_next <= comfort.upper)


def verify_probabilistic(tree: TreePolicy, model, history, cfg: VerifyConfig = VerifyConfig()) -> ProbResult:
    """Monte Carlo estimate of the one-step safe probability from safe starts.

    Draws ``cfg.sample_count`` augmented inputs, keeps those already inside
    the comfort band and checks that the model's next temperature under the
    tree's action stays inside.  A one-step check from every safe start counts
    the same failures as rolling each start forward, because a trajectory that
    fails later is charged to the state just before its first exit.
    """
    sampler = InputSampler(history, cfg.noise_cfg)
    X = sampler.draw(np.random.default_rng(cfg.seed), cfg.sample_count)
    temps = X[:, TEMP]
    X = X[(temps >= cfg.comfort.lower) & (temps <= cfg.comfort.upper)]
    if len(X) == 0:
        raise VerificationError(f"no start-safe samples in {cfg.sample_count} draws")
    ok = int(one_step_safe(tree, model, X, cfg.comfort).sum())
    p = ok / len(X)
    return ProbResult(p, wilson_interval(ok, len(X)), p > cfg.safe_threshold, len(X), cfg.sample_count)


# -- toy systems for the one-step equivalence -------------------------------------

@dataclass
class ToySystem:
    """Finite deterministic system on a grid of zone temperatures.

    Each state is a 6-vector whose first coordinate is a grid temperature and
    whose remaining coordinates are the fixed ``disturbance``.  The successor
    of a state is the model prediction under the tree action snapped to the
    nearest grid temperature; predictions beyond the grid leave the system
    (index -1) and count as unsafe.
    """

    temps: np.ndarray
    disturbance: np.ndarray
    comfort: ComfortRange

    def __post_init__(self):
        self.temps = np.asarray(self.temps, dtype=float)
        self.disturbance = np.asarray(self.disturbance, dtype=float)
        if len(self.temps) > 10_000:
            raise ValueError("toy systems are limited to 10^4 states")
        if np.any(np.diff(self.temps) <= 0):
            raise ValueError("grid temperatures must be strictly increasing")

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.temps, np.tile(self.disturbance, (len(self.temps), 1))])

    @property
    def safe_mask(self) -> np.ndarray:
        return (self.temps >= self.comfort.lower) & (self.temps <= self.comfort.upper)

    def successors(self, tree, model) -> np.ndarray:
        X = self.states
        nxt = model.predict_batch(X, tree.infer_batch(X))
        if len(self.temps) == 1:
            half = np.array([0.5])
        else:
            half = np.diff(self.temps) / 2
        lo = self.temps[0] - half[0]
        hi = self.temps[-1] + half[-1]
        mids = self.temps[:-1] + np.diff(self.temps) / 2
        idx = np.searchsorted(mids, nxt, side="left")
        idx[(nxt < lo) | (nxt > hi)] = -1
        return idx


def one_step_failures(succ: np.ndarray, safe: np.ndarray) -> set[int]:
    """Safe states whose immediate successor is unsafe."""
    return {i for i in np.flatnonzero(safe) if succ[i] < 0 or not safe[succ[i]]}


def bootstrap_failures(succ: np.ndarray, safe: np.ndarray, H: int, attribute: str = "predecessor") -> set[int]:
    """Failures found by rolling every safe start forward ``H`` steps.

    With ``attribute='predecessor'`` a failure is charged to the state just
    before the first unsafe one; ``'start'`` charges the starting state.
    """
    failed = set()
    for start in np.flatnonzero(safe):
        cur = int(start)
        for _ in range(H):
            nxt = int(succ[cur])
            if nxt < 0 or not safe[nxt]:
                failed.add(cur if attribute == "predecessor" else int(start))
                break
            cur = nxt
    return failed


def failure_fractions(tree, model, toy: ToySystem, H: int) -> tuple[float, float]:
    succ = toy.successors(tree, model)
    safe = toy.safe_mask
    n = int(safe.sum())
    if n == 0:
        return 0.0, 0.0
    return len(bootstrap_failures(succ, safe, H)) / n, len(one_step_failures(succ, safe)) / n


def equivalence_check(tree, model, toy_system: ToySystem, H: int) -> bool:
    """Whether the H-step bootstrap and one-step failure fractions coincide exactly."""
    if H < 1:
        raise ValueError("H must be >= 1")
    boot, one = failure_fractions(tree, model, toy_system, H)
    return boot == one


def exact_safe_fraction(tree, model, toy: ToySystem) -> float:
    succ = toy.successors(tree, model)
    safe = toy.safe_mask
    return 1.0 - len(one_step_failures(succ, safe)) / int(safe.sum())



def toy_monte_carlo(tree, model, toy: ToySystem, n: int, rng: np.random.Generator,
                    safe_threshold: float = 0.9) -> ProbResult:
    """Sampled counterpart of ``exact_safe_fraction``: ``n`` uniform draws
    (with replacement) from the safe states, one-step check each."""
    safe_idx = np.flatnonzero(toy.safe_mask)
    if len(safe_idx) == 0:
        raise VerificationError("toy system has no safe states")
    succ = toy.successors(tree, model)
    safe = toy.safe_mask
    draw = safe_idx[rng.integers(len(safe_idx), size=n)]
    nxt = succ[draw]
    ok = int(np.sum((nxt >= 0) & safe[np.maximum(nxt, 0)]))
    p = ok / n
    return ProbResult(p, wilson_interval(ok, n), p > safe_threshold, n, n)

# -- report ----------------------------------------------------------------------

def make_report(tree: TreePolicy, path_results: PathResult, prob_results: ProbResult | None = None,
                safe_threshold: float | None = None, corrected: PathResult | None = None) -> VerificationReport:
    """Table-style summary.

    ``path_results`` are the violations found before correction; if
    ``corrected`` (the re-verification after correction) is given, the
    corrected counts equal the original violation counts.
    """
    leaves = tree.n_leaves
    v2, v3 = list(path_results.violations_crit2), list(path_results.violations_crit3)
    c2 = len(v2) if corrected is not None else 0
    c3 = len(v3) if corrected is not None else 0
    if prob_results is not None and safe_threshold is None:
        safe_threshold = VerifyConfig.safe_threshold
    return VerificationReport(
        total_nodes=tree.n_nodes,
        leaf_nodes=leaves,
        node_identity_ok=tree.n_nodes == 2 * leaves - 1,
        safe_probability_estimate=None if prob_results is None else prob_results.safe_prob,
        safe_probability_ci95=None if prob_results is None else tuple(prob_results.ci),
        safe_threshold=safe_threshold,
        pass_criterion_1=(None if prob_results is None
                          else prob_results.safe_prob > safe_threshold),
        violations_crit2=v2,
        violations_crit3=v3,
        corrected_crit2=c2,
        corrected_crit3=c3,
        corrected_count=c2 + c3,
        start_safe_samples=None if prob_results is None else prob_results.n_start_safe,
        review_leaves=list(path_results.review),
    )


def verify_and_correct(tree: TreePolicy, model, history, cfg: VerifyConfig = VerifyConfig()
                       ) -> tuple[TreePolicy, VerificationReport]:
    """Path verification, correction, re-verification and criterion-1 estimate."""
    paths = verify_paths(tree, cfg.comfort, cfg.strict)
    fixed = correct_tree(tree, paths, cfg.comfort)
    after = verify_paths(fixed, cfg.comfort)
    if not after.clean:
        raise VerificationError(f"correction left violations: {after}")
    prob = verify_probabilistic(fixed, model, history, cfg) if model is not None else None
    return fixed, make_report(fixed, paths, prob, cfg.safe_threshold, corrected=after)


def witnesses(tree: TreePolicy, leaf: int, box: BoxRegion, comfort: ComfortRange, kind: str,
              rng: np.random.Generator, n: int = 10_000, span: float = 20.0) -> np.ndarray:
    """Sample points of ``box`` (temperature finite-clipped to +/- ``span``
    around the comfort band) at which the leaf's action breaks its criterion."""
    dim = box.dim
    lo = np.array([box[j].lo for j in range(dim)])
    hi = np.array([box[j].hi for j in range(dim)])
    lo[0] = max(lo[0], comfort.lower - span)
    hi[0] = min(hi[0], comfort.upper + span)
    lo = np.where(np.isinf(lo), -100.0, lo)
    hi = np.where(np.isinf(hi), 100.0, hi)
    hi = np.maximum(hi, lo)
    X = rng.uniform(lo, hi, size=(n, dim))
    X = X[box.contains_batch(X)]
    a = tree.leaf_action(leaf)
    s = X[:, 0]
    if kind == "hot":
        bad = (s > comfort.upper) & (a.cool_sp >= s)
    else:
        bad = (s < comfort.lower) & (a.heat_sp <= s)
    return X[bad]
