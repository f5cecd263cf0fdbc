"""Brute-force greedy Gini CART used as a test oracle.

Written independently of the library: plain Python lists, exact rational
arithmetic, every partition of every feature evaluated from scratch.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction


def gini(labels) -> Fraction:
    n = len(labels)
    if n == 0:
        return Fraction(0)
    return 1 - sum(Fraction(c * c, n * n) for c in Counter(labels).values())


def label_key(a):
    h, c = a
    return (abs(h - 15) + abs(30 - c), h, c)


def majority(labels):
    counts = Counter(labels)
    top = max(counts.values())
    return min((a for a, c in counts.items() if c == top), key=label_key)


def fit(rows, labels, depth=0, max_depth=None, min_split=2):
    """Returns a nested dict tree. Leaves: {'label': a}; nodes: {'f','lo','left','right'}
    where 'lo' is the largest training value routed left."""
    n = len(rows)
    if len(set(labels)) == 1 or n < min_split or (max_depth is not None and depth >= max_depth):
        return {"label": majority(labels)}
    parent = n * gini(labels)
    best = None
    for f in range(len(rows[0])):
        values = sorted(set(r[f] for r in rows))
        for lo in values[:-1]:
            left = [labels[i] for i in range(n) if rows[i][f] <= lo]
            right = [labels[i] for i in range(n) if rows[i][f] > lo]
            score = len(left) * gini(left) + len(right) * gini(right)
            if score < parent and (best is None or score < best[0]):
                best = (score, f, lo)
    if best is None:
        return {"label": majority(labels)}
    _, f, lo = best
    li = [i for i in range(n) if rows[i][f] <= lo]
    ri = [i for i in range(n) if rows[i][f] > lo]
    return {"f": f, "lo": lo,
            "left": fit([rows[i] for i in li], [labels[i] for i in li], depth + 1, max_depth, min_split),
            "right": fit([rows[i] for i in ri], [labels[i] for i in ri], depth + 1, max_depth, min_split)}


def predict(tree, x):
    while "label" not in tree:
        tree = tree["left"] if x[tree["f"]] <= tree["lo"] else tree["right"]
    return tree["label"]


def n_leaves(tree) -> int:
    return 1 if "label" in tree else n_leaves(tree["left"]) + n_leaves(tree["right"])
