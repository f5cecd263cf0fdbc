"""Binary decision-tree policy stored as a flat node array, plus the
axis-aligned box geometry of its leaves.

Routing is ``x[feature] <= threshold`` to the left child, otherwise right,
so a left edge adds a closed upper bound and a right edge an open lower bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from treehvac.building import FEATURE_NAMES, SetpointAction

TREE_FORMAT_VERSION = 1
INF = math.inf


class MalformedTreeError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    lo: float = -INF
    hi: float = INF
    lo_open: bool = True
    hi_open: bool = True

    def __post_init__(self):
        # Infinite endpoints are always open.
        if math.isinf(self.lo):
            object.__setattr__(self, "lo_open", True)
        if math.isinf(self.hi):
            object.__setattr__(self, "hi_open", True)

    @property
    def empty(self) -> bool:
        return self.lo > self.hi or (self.lo == self.hi and (self.lo_open or self.hi_open))

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.lo) and math.isinf(self.hi)

    def contains(self, v: float) -> bool:
        above = v > self.lo if self.lo_open else v >= self.lo
        below = v < self.hi if self.hi_open else v <= self.hi
        return above and below

    def intersect(self, other: Interval) -> Interval:
        if self.lo > other.lo:
            lo, lo_open = self.lo, self.lo_open
        elif other.lo > self.lo:
            lo, lo_open = other.lo, other.lo_open
        else:
            lo, lo_open = self.lo, self.lo_open or other.lo_open
        if self.hi < other.hi:
            hi, hi_open = self.hi, self.hi_open
        elif other.hi < self.hi:
            hi, hi_open = other.hi, other.hi_open
        else:
            hi, hi_open = self.hi, self.hi_open or other.hi_open
        return Interval(lo, hi, lo_open, hi_open)

    def __str__(self):
        return f"{'(' if self.lo_open else '['}{self.lo:g}, {self.hi:g}{')' if self.hi_open else ']'}"


@dataclass(frozen=True)
class BoxRegion:
    intervals: tuple[Interval, ...]

    @classmethod
    def full(cls, dim: int = 6) -> BoxRegion:
        return cls(tuple(Interval() for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def empty(self) -> bool:
        return any(iv.empty for iv in self.intervals)

    def __getitem__(self, i: int) -> Interval:
        return self.intervals[i]

    def contains(self, x) -> bool:
        return all(iv.contains(float(v)) for iv, v in zip(self.intervals, x))

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        mask = np.ones(len(X), dtype=bool)
        for j, iv in enumerate(self.intervals):
            col = X[:, j]
            mask &= (col > iv.lo) if iv.lo_open else (col >= iv.lo)
            mask &= (col < iv.hi) if iv.hi_open else (col <= iv.hi)
        return mask

    def constrain(self, dim: int, iv: Interval) -> BoxRegion:
        ivs = list(self.intervals)
        ivs[dim] = ivs[dim].intersect(iv)
        return BoxRegion(tuple(ivs))


def box_intersect(a: BoxRegion, b: BoxRegion) -> BoxRegion:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return BoxRegion(tuple(x.intersect(y) for x, y in zip(a.intervals, b.intervals)))


class TreePolicy:
    """Immutable binary classification tree over setpoint pairs.

    Node arrays are parallel: ``feature[i] == -1`` marks a leaf, whose
    action is ``(heat[i], cool[i])``.  Internal nodes carry ``threshold``,
    ``left`` and ``right`` child indices.
    """

    def __init__(self, feature, threshold, left, right, heat, cool, root: int = 0,
                 feature_names: Sequence[str] | None = None):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.heat = np.asarray(heat, dtype=np.int64)
        self.cool = np.asarray(cool, dtype=np.int64)
        self.root = int(root)
        self.n_features = len(feature_names) if feature_names is not None else len(FEATURE_NAMES)
        self.feature_names = tuple(feature_names) if feature_names is not None else FEATURE_NAMES
        for arr in (self.feature, self.threshold, self.left, self.right, self.heat, self.cool):
            arr.setflags(write=False)
        self._validate()
        # Plain lists make scalar inference several times faster than numpy indexing.
        self._f = self.feature.tolist()
        self._t = self.threshold.tolist()
        self._l = self.left.tolist()
        self._r = self.right.tolist()
        self._actions = {i: SetpointAction(int(self.heat[i]), int(self.cool[i]))
                         for i in self.leaf_ids}

    def _validate(self):
        n = len(self.feature)
        if n == 0:
            raise MalformedTreeError("tree has no nodes")
        if not all(len(a) == n for a in (self.threshold, self.left, self.right, self.heat, self.cool)):
            raise MalformedTreeError("node arrays differ in length")
        if not 0 <= self.root < n:
            raise MalformedTreeError(f"root {self.root} out of range")
        seen = np.zeros(n, dtype=bool)
        stack = [self.root]
        while stack:
            i = stack.pop()
            if seen[i]:
                raise MalformedTreeError(f"node {i} reached twice (cycle or shared child)")
            seen[i] = True
            if self.feature[i] < 0:
                SetpointAction(int(self.heat[i]), int(self.cool[i]))
                continue
            if self.feature[i] >= self.n_features:
                raise MalformedTreeError(f"node {i} splits on unknown feature {self.feature[i]}")
            if not math.isfinite(self.threshold[i]):
                raise MalformedTreeError(f"node {i} has non-finite threshold")
            for child in (self.left[i], self.right[i]):
                if not 0 <= child < n:
                    raise MalformedTreeError(f"node {i} has missing child {child}")
                stack.append(int(child))
        if not seen.all():
            raise MalformedTreeError(f"unreachable nodes: {np.flatnonzero(~seen).tolist()}")
        if self.n_leaves != self.n_internal + 1:
            raise MalformedTreeError("leaf count must equal internal count + 1")

    # -- structure -----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaf_ids(self) -> list[int]:
        return np.flatnonzero(self.feature < 0).tolist()

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def n_internal(self) -> int:
        return self.n_nodes - self.n_leaves

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def leaf_action(self, i: int) -> SetpointAction:
        if not self.is_leaf(i):
            raise ValueError(f"node {i} is not a leaf")
        return self._actions[i]

    def depth(self) -> int:
        best, stack = 0, [(self.root, 0)]
        while stack:
            i, d = stack.pop()
            if self.feature[i] < 0:
                best = max(best, d)
            else:
                stack += [(int(self.left[i]), d + 1), (int(self.right[i]), d + 1)]
        return best

    # -- inference -----------------------------------------------------------

    def leaf_of(self, x) -> int:
        f, t, l, r = self._f, self._t, self._l, self._r
        i = self.root
        while f[i] >= 0:
            i = l[i] if x[f[i]] <= t[i] else r[i]
        return i

    def __call__(self, x) -> SetpointAction:
        return self._actions[self.leaf_of(x)]

    def leaves_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.full(len(X), self.root, dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            a = rows[active]
            nd = node[a]
            go_left = X[a, self.feature[nd]] <= self.threshold[nd]
            node[a] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def infer_batch(self, X: np.ndarray) -> np.ndarray:
        """(n, 2) array of (heat_sp, cool_sp)."""
        leaves = self.leaves_batch(X)
        return np.column_stack([self.heat[leaves], self.cool[leaves]])

    # -- editing -------------------------------------------------------------

    def with_leaf_actions(self, updates: dict[int, SetpointAction]) -> TreePolicy:
        heat, cool = self.heat.copy(), self.cool.copy()
        for i, a in updates.items():
            if not self.is_leaf(i):
                raise ValueError(f"node {i} is not a leaf")
            heat[i], cool[i] = a.heat_sp, a.cool_sp
        return TreePolicy(self.feature, self.threshold, self.left, self.right, heat, cool,
                          self.root, self.feature_names)

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({"type": "leaf", "heat_sp": int(self.heat[i]), "cool_sp": int(self.cool[i])})
            else:
                nodes.append({"type": "split", "feature": int(self.feature[i]),
                              "threshold": float(self.threshold[i]),
                              "left": int(self.left[i]), "right": int(self.right[i])})
        return {"version": TREE_FORMAT_VERSION, "feature_names": list(self.feature_names),
                "nodes": nodes, "root": self.root}

    @classmethod
    def from_dict(cls, d: dict) -> TreePolicy:
        if d.get("version") != TREE_FORMAT_VERSION:
            raise MalformedTreeError(f"unsupported tree version {d.get('version')}")
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "heat", "cool")}
        for i, node in enumerate(d["nodes"]):
            kind = node.get("type")
            if kind == "leaf":
                vals = (-1, 0.0, -1, -1, node["heat_sp"], node["cool_sp"])
            elif kind == "split":
                vals = (node["feature"], node["threshold"], node["left"], node["right"], 0, 0)
            else:
                raise MalformedTreeError(f"node {i} has unknown type {kind!r}")
            for k, v in zip(cols, vals):
                cols[k].append(v)
        return cls(**cols, root=d.get("root", 0), feature_names=d.get("feature_names"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> TreePolicy:
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> TreePolicy:
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, TreePolicy):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"TreePolicy(nodes={self.n_nodes}, leaves={self.n_leaves}, depth={self.depth()})"


def single_leaf(action: SetpointAction, n_features: int = 6) -> TreePolicy:
    names = FEATURE_NAMES if n_features == 6 else [f"x{i}" for i in range(n_features)]
    return TreePolicy([-1], [0.0], [-1], [-1], [action.heat_sp], [action.cool_sp], 0, names)


def infer(tree: TreePolicy, x) -> SetpointAction:
    return tree(x)


def enumerate_leaf_boxes(tree: TreePolicy) -> list[tuple[int, list[int], BoxRegion]]:
    """(leaf id, root-to-leaf node path, input box) for every leaf, in
    depth-first left-to-right order."""
    out = []
    stack = [(tree.root, [tree.root], BoxRegion.full(tree.n_features))]
    while stack:
        i, path, box = stack.pop()
        if tree.is_leaf(i):
            out.append((i, path, box))
            continue
        f, th = int(tree.feature[i]), float(tree.threshold[i])
        left_box = box.constrain(f, Interval(-INF, th, True, False))
        right_box = box.constrain(f, Interval(th, INF, True, True))
        r, l = int(tree.right[i]), int(tree.left[i])
        stack.append((r, path + [r], right_box))
        stack.append((l, path + [l], left_box))
    return out
