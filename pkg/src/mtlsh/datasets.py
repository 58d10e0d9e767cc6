"""Synthetic labeled trees for tests, benchmarks and the evaluation command."""

from __future__ import annotations

import numpy as np

from .tree import LabeledMergeTree, LabeledTree, MergeTree

__all__ = [
    "random_merge_tree",
    "balanced_tree",
    "random_small_tree",
    "class_benchmark",
]


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_merge_tree(n_leaves: int, seed=None, labels=None, max_arity: int = 2) -> LabeledMergeTree:
    """Random merge tree built by repeatedly merging components under a saddle.

    Leaves get values in ``[0, 1)``, each saddle sits above its children by a
    random gap, and a root is added above the last saddle.  Leaves are
    labeled ``labels`` (default ``1..n_leaves``) in creation order.
    """
    rng = _rng(seed)
    if n_leaves < 1:
        raise ValueError("need at least one leaf")
    labels = list(range(1, n_leaves + 1)) if labels is None else list(labels)
    if len(labels) != n_leaves:
        raise ValueError("one label per leaf required")
    values = list(rng.random(n_leaves))
    parent = [-1] * n_leaves
    comps = list(range(n_leaves))
    while len(comps) > 1:
        m = int(rng.integers(2, max(2, max_arity) + 1))
        m = min(m, len(comps))
        pick = rng.choice(len(comps), size=m, replace=False)
        node = len(values)
        values.append(max(values[comps[i]] for i in pick) + float(rng.random()) + 1e-3)
        parent.append(-1)
        for i in pick:
            parent[comps[i]] = node
        comps = [c for j, c in enumerate(comps) if j not in set(pick.tolist())] + [node]
    if n_leaves > 1:
        top = comps[0]
        values.append(values[top] + float(rng.random()) + 1e-3)
        parent.append(-1)
        parent[top] = len(values) - 1
    tree = MergeTree(parent, values)
    groups = [[labels[i]] if i < n_leaves else [] for i in range(len(tree))]
    return LabeledMergeTree(tree, groups)


def balanced_tree(n: int, arity: int = 2) -> LabeledMergeTree:
    """Complete ``arity``-ary tree on ``n`` nodes in heap order; leaves are
    labeled by node index + 1."""
    parent = [-1] + [(i - 1) // arity for i in range(1, n)]
    values = [float(n - i) for i in range(n)]
    tree = MergeTree(parent, values)
    groups = [[i + 1] if not tree.children[i] else [] for i in range(n)]
    return LabeledMergeTree(tree, groups)


def random_small_tree(n: int, seed=None, alphabet: int = 2) -> LabeledTree:
    """Random recursive tree on ``n`` nodes, each labeled ``(a,)`` with ``a``
    drawn from ``1..alphabet`` (labels repeat)."""
    rng = _rng(seed)
    parent = [-1] + [int(rng.integers(0, i)) for i in range(1, n)]
    values = [-float(i) for i in range(n)]
    labels = tuple((int(rng.integers(1, alphabet + 1)),) for _ in range(n))
    return LabeledTree(MergeTree(parent, values), labels)


def _perturb(proto: LabeledMergeTree, rng, pool: int, swaps: int, replace: int) -> LabeledMergeTree:
    tree = proto.tree
    leaves = list(tree.leaves)
    labs = {u: proto.node_labels[u][0] for u in leaves}
    for _ in range(swaps):
        a, b = rng.choice(leaves, size=2, replace=False)
        labs[a], labs[b] = labs[b], labs[a]
    used = set(labs.values())
    for _ in range(replace):
        u = leaves[int(rng.integers(len(leaves)))]
        free = [x for x in range(1, pool + 1) if x not in used]
        if not free:
            break
        new = free[int(rng.integers(len(free)))]
        used.discard(labs[u])
        used.add(new)
        labs[u] = new
    values = np.array(tree.values)
    values = values + rng.normal(0.0, 1e-3, size=values.size)
    # keep the (value, vertex) order of every edge intact
    for u in reversed(tree.order):
        for c in tree.children[u]:
            if values[c] >= values[u]:
                values[u] = values[c] + 1e-6
    groups = [[labs[u]] if u in labs else [] for u in range(len(tree))]
    return LabeledMergeTree(tree.with_values(values), groups)


def class_benchmark(n_classes: int = 5, per_class: int = 10, n_leaves: int = 8,
                    pool: int = 24, seed=None, swaps: int = 1, replace: int = 1):
    """Labeled trees in ``n_classes`` families of perturbed copies.

    Each class has a random prototype whose leaf labels come from a pool of
    ``pool`` labels shared by all classes; members swap ``swaps`` leaf-label
    pairs, replace ``replace`` labels and jitter values.  Returns
    ``(trees, classes)``.
    """
    rng = _rng(seed)
    trees, classes = [], []
    for c in range(n_classes):
        labels = rng.choice(np.arange(1, pool + 1), size=n_leaves, replace=False).tolist()
        proto = random_merge_tree(n_leaves, rng, labels=labels)
        for _ in range(per_class):
            trees.append(_perturb(proto, rng, pool, swaps, replace))
            classes.append(c)
    return trees, classes
