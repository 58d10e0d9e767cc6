"""Reference distances and retrieval metrics used to judge the LSH output."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .lsh import PairMatrix
from .tree import LabeledMergeTree, induced_matrix

__all__ = [
    "interleaving_distance",
    "distance_matrix",
    "ted_oracle",
    "TED_MAX_NODES",
    "precision_recall",
]

TED_MAX_NODES = 8


def interleaving_distance(a: LabeledMergeTree, b: LabeledMergeTree, n: int | None = None,
                          labels=None) -> float:
    """Sup-norm distance between the induced matrices of two labeled trees.

    The label universe is ``labels``, else ``1..n``, else the common label
    set, which must then be identical for both trees.
    """
    if labels is None and n is None:
        if set(a.labels) != set(b.labels):
            raise ValueError("label-universe mismatch between trees")
        labels = a.labels
    try:
        ma = induced_matrix(a, n, labels)
        mb = induced_matrix(b, n, labels)
    except KeyError as exc:
        raise ValueError(f"label-universe mismatch: {exc.args[0]}") from None
    if ma.size == 0:
        return 0.0
    return float(np.max(np.abs(ma - mb)))


def distance_matrix(trees, labels=None) -> PairMatrix:
    """All-pairs interleaving distance over a shared label universe."""
    if labels is None:
        common = set(trees[0].labels)
        for t in trees[1:]:
            common &= set(t.labels)
        if not common:
            raise ValueError("trees share no labels")
        labels = sorted(common)
    mats = [induced_matrix(t, labels=labels) for t in trees]
    m = len(mats)
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            out[i, j] = out[j, i] = np.max(np.abs(mats[i] - mats[j])) if mats[i].size else 0.0
    return PairMatrix(out, "distance")


def _canonical(ltree: LabeledMergeTree):
    tree = ltree.tree
    enc = [None] * len(tree)
    for u in reversed(tree.order):
        enc[u] = (ltree.node_labels[u], tuple(sorted(enc[c] for c in tree.children[u])))
    return enc[tree.root]


def _size(forest) -> int:
    return sum(1 + _size(children) for _, children in forest)


def _merge(a, b):
    return tuple(sorted(a + b))


@lru_cache(maxsize=1 << 20)
def _forest_distance(f1, f2) -> int:
    if not f1:
        return _size(f2)
    if not f2:
        return _size(f1)
    (label_v, kids_v), rest1 = f1[0], f1[1:]
    best = 1 + _forest_distance(_merge(rest1, kids_v), f2)
    seen = set()
    for j, w in enumerate(f2):
        if w in seen:
            continue
        seen.add(w)
        label_w, kids_w = w
        rest2 = f2[:j] + f2[j + 1:]
        best = min(best, 1 + _forest_distance(f1, _merge(rest2, kids_w)))
        match = (label_v != label_w) + _forest_distance(kids_v, kids_w)
        if match < best:
            match += _forest_distance(rest1, rest2)
            best = min(best, match)
    return best


def ted_oracle(a: LabeledMergeTree | None, b: LabeledMergeTree | None) -> int:
    """Exact unit-cost edit distance (insert, delete, relabel) between two
    unordered labeled trees of at most eight nodes.

    A node's label is its full label tuple.  ``None`` stands for the empty
    tree.  This is an exhaustive search meant as a test oracle only.
    """
    for t in (a, b):
        if t is not None and len(t) > TED_MAX_NODES:
            raise ValueError(f"ted_oracle is limited to {TED_MAX_NODES} nodes, got {len(t)}")
    fa = () if a is None else (_canonical(a),)
    fb = () if b is None else (_canonical(b),)
    return _forest_distance(fa, fb)


def precision_recall(pairs, class_labels) -> tuple[float, float]:
    """Mean per-tree precision and recall of a candidate-pair set.

    For tree ``i`` with matched partners ``P``: precision is the share of
    ``P`` in ``i``'s class (1 if ``P`` is empty), recall the share of ``i``'s
    classmates found in ``P`` (0 if ``i`` has no classmates).
    """
    classes = list(class_labels)
    n = len(classes)
    if any(c is None for c in classes):
        raise ValueError("every tree needs a class label")
    partners: list[set] = [set() for _ in range(n)]
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"pair ({a}, {b}) refers to a tree without a class label")
        if a != b:
            partners[a].add(b)
            partners[b].add(a)
    class_size: dict = {}
    for c in classes:
        class_size[c] = class_size.get(c, 0) + 1
    precision = recall = 0.0
    for i in range(n):
        hits = sum(classes[j] == classes[i] for j in partners[i])
        precision += hits / len(partners[i]) if partners[i] else 1.0
        mates = class_size[classes[i]] - 1
        recall += hits / mates if mates else 0.0
    return precision / n, recall / n
