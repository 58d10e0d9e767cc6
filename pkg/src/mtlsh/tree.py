"""Merge trees, labeled merge trees and the operations defined on them."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "MergeTree",
    "LabeledMergeTree",
    "LabeledTree",
    "simplify_by_persistence",
    "assign_labels",
    "lca",
    "induced_matrix",
    "tree_to_json",
    "tree_from_json",
    "dumps_tree",
    "loads_tree",
]


class MergeTree:
    """Rooted tree of critical points.

    Nodes are integers ``0..n-1``.  ``values`` hold the swept function
    (for a superlevel tree that is ``-f``; :attr:`field_values` gives ``f``
    back), so on every edge the child's ``(value, vertex_id)`` key is
    strictly below the parent's.  Instances are immutable.
    """

    __slots__ = (
        "parent", "values", "vertex_ids", "direction", "root",
        "children", "_order", "_depth",
    )

    def __init__(self, parent, values, vertex_ids=None, direction="sublevel"):
        parent = tuple(-1 if p is None or p < 0 else int(p) for p in parent)
        n = len(parent)
        if n == 0:
            raise ValueError("a merge tree needs at least one node")
        values = tuple(float(v) for v in values)
        if len(values) != n:
            raise ValueError("values and parent lengths differ")
        if vertex_ids is None:
            vertex_ids = range(n)
        vertex_ids = tuple(int(v) for v in vertex_ids)
        if len(vertex_ids) != n:
            raise ValueError("vertex_ids and parent lengths differ")
        if len(set(vertex_ids)) != n:
            raise ValueError("vertex ids must be unique")
        if direction not in ("sublevel", "superlevel"):
            raise ValueError(f"bad direction {direction!r}")
        roots = [i for i, p in enumerate(parent) if p == -1]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {len(roots)}")
        kids: list[list[int]] = [[] for _ in range(n)]
        for i, p in enumerate(parent):
            if p >= 0:
                if p >= n:
                    raise ValueError(f"node {i} has out-of-range parent {p}")
                if (values[i], vertex_ids[i]) >= (values[p], vertex_ids[p]):
                    raise ValueError(
                        f"node {i} (value {values[i]}) is not below its parent {p} "
                        f"(value {values[p]})"
                    )
                kids[p].append(i)
        for k in kids:
            k.sort(key=lambda c: (values[c], vertex_ids[c]))
        order = [roots[0]]
        depth = [0] * n
        for u in order:
            for c in kids[u]:
                depth[c] = depth[u] + 1
                order.append(c)
        if len(order) != n:
            raise ValueError("parent links contain a cycle")
        set_ = object.__setattr__
        set_(self, "parent", parent)
        set_(self, "values", values)
        set_(self, "vertex_ids", vertex_ids)
        set_(self, "direction", direction)
        set_(self, "root", roots[0])
        set_(self, "children", tuple(tuple(k) for k in kids))
        set_(self, "_order", tuple(order))
        set_(self, "_depth", tuple(depth))

    def __setattr__(self, name, value):
        raise AttributeError("MergeTree is immutable")

    def __reduce__(self):
        return MergeTree, (self.parent, self.values, self.vertex_ids, self.direction)

    def __len__(self):
        return len(self.parent)

    def __eq__(self, other):
        if not isinstance(other, MergeTree):
            return NotImplemented
        return (
            self.parent == other.parent
            and self.values == other.values
            and self.vertex_ids == other.vertex_ids
            and self.direction == other.direction
        )

    def __hash__(self):
        return hash((self.parent, self.values, self.vertex_ids, self.direction))

    def __repr__(self):
        return f"MergeTree(n={len(self)}, leaves={len(self.leaves)}, direction={self.direction!r})"

    @property
    def order(self) -> tuple[int, ...]:
        """Breadth-first node order starting at the root."""
        return self._order

    @property
    def depth(self) -> tuple[int, ...]:
        return self._depth

    @property
    def height(self) -> int:
        """Number of edges on the longest root-to-leaf path."""
        return max(self._depth)

    @property
    def leaves(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.children) if not c)

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    @property
    def field_values(self) -> tuple[float, ...]:
        """Node values of the original field (negated back for superlevel trees)."""
        if self.direction == "sublevel":
            return self.values
        return tuple(-v for v in self.values)

    def key(self, node: int) -> tuple[float, int]:
        return (self.values[node], self.vertex_ids[node])

    def with_values(self, values) -> "MergeTree":
        return MergeTree(self.parent, values, self.vertex_ids, self.direction)


class LabeledMergeTree:
    """A merge tree plus a labeling: each label names exactly one node.

    ``node_labels[i]`` is the sorted tuple of labels carried by node ``i``;
    internal nodes may carry none, leaves at least one.
    """

    __slots__ = ("tree", "node_labels", "_label_map")

    def __init__(self, tree: MergeTree, node_labels: Sequence[Sequence[int]]):
        if len(node_labels) != len(tree):
            raise ValueError("node_labels must have one entry per node")
        labels = tuple(tuple(sorted(int(x) for x in group)) for group in node_labels)
        label_map: dict[int, int] = {}
        for node, group in enumerate(labels):
            for lab in group:
                if lab < 0:
                    raise ValueError(f"labels must be non-negative, got {lab}")
                if lab in label_map:
                    raise ValueError(f"label {lab} assigned to more than one node")
                label_map[lab] = node
        for leaf in tree.leaves:
            if not labels[leaf]:
                raise ValueError(f"leaf {leaf} carries no label")
        object.__setattr__(self, "tree", tree)
        object.__setattr__(self, "node_labels", labels)
        object.__setattr__(self, "_label_map", label_map)

    @classmethod
    def from_label_map(cls, tree: MergeTree, label_map: Mapping[int, int]) -> "LabeledMergeTree":
        groups: list[list[int]] = [[] for _ in range(len(tree))]
        for lab, node in label_map.items():
            if not 0 <= node < len(tree):
                raise ValueError(f"label {lab} maps to invalid node {node}")
            groups[node].append(lab)
        return cls(tree, groups)

    def __setattr__(self, name, value):
        raise AttributeError("LabeledMergeTree is immutable")

    def __reduce__(self):
        return LabeledMergeTree, (self.tree, self.node_labels)

    def __len__(self):
        return len(self.tree)

    def __eq__(self, other):
        if not isinstance(other, LabeledMergeTree):
            return NotImplemented
        return self.tree == other.tree and self.node_labels == other.node_labels

    def __hash__(self):
        return hash((self.tree, self.node_labels))

    def __repr__(self):
        return f"LabeledMergeTree(n={len(self)}, labels={len(self._label_map)})"

    @property
    def label_map(self) -> dict[int, int]:
        return dict(self._label_map)

    @property
    def labels(self) -> list[int]:
        return sorted(self._label_map)

    def node_of(self, label: int) -> int:
        try:
            return self._label_map[label]
        except KeyError:
            raise KeyError(f"label {label} not present in tree") from None


class LabeledTree(NamedTuple):
    """Rooted tree with arbitrary, possibly repeated, node label tuples.

    Unlike :class:`LabeledMergeTree` no label uniqueness is required; the
    edit-distance oracle and subpath generation accept either.
    """

    tree: MergeTree
    node_labels: tuple

    def __len__(self):
        return len(self.tree)


def simplify_by_persistence(tree: MergeTree, epsilon: float) -> MergeTree:
    """Cancel every leaf-saddle pair with persistence below ``epsilon``.

    Pairing follows the elder rule: at a saddle the child branch holding
    the lowest minimum survives and every other branch dies there with
    persistence ``value(saddle) - value(branch minimum)``.  A dying branch
    takes its whole subtree with it (all pairs inside it are less
    persistent).  Saddles left with a single child are contracted; the
    root is always kept.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    n = len(tree)
    vals, kids = tree.values, tree.children
    low = [tree.key(i) for i in range(n)]
    for u in reversed(tree.order):
        for c in kids[u]:
            if low[c] < low[u]:
                low[u] = low[c]

    keep = [False] * n
    keep[tree.root] = True
    kept_kids: list[list[int]] = [[] for _ in range(n)]
    for u in tree.order:
        if not keep[u] or not kids[u]:
            continue
        elder = min(kids[u], key=low.__getitem__)
        for c in kids[u]:
            if c == elder or vals[u] - low[c][0] >= epsilon:
                keep[c] = True
                kept_kids[u].append(c)

    # contract saddles that lost all but one child
    alive = [
        keep[u] and (u == tree.root or len(kept_kids[u]) != 1 or len(kids[u]) == 1)
        for u in range(n)
    ]
    new_index = {}
    for u in range(n):
        if alive[u]:
            new_index[u] = len(new_index)
    parent, values, vids = [], [], []
    for u in range(n):
        if not alive[u]:
            continue
        p = tree.parent[u]
        while p >= 0 and not alive[p]:
            p = tree.parent[p]
        parent.append(new_index[p] if p >= 0 else -1)
        values.append(vals[u])
        vids.append(tree.vertex_ids[u])
    return MergeTree(parent, values, vids, tree.direction)


def assign_labels(
    tree: MergeTree,
    strategy: str = "mesh-index",
    reference: LabeledMergeTree | None = None,
    positions=None,
    reference_positions=None,
    label_saddles: bool = False,
) -> LabeledMergeTree:
    """Label a merge tree.

    ``mesh-index`` labels every leaf (and, with ``label_saddles``, every
    internal node) by its grid vertex id.  ``euclidean`` solves a
    minimum-cost assignment between this tree's leaves and the labeled
    leaves of ``reference`` using Euclidean distances between critical
    point positions; ``positions`` (and ``reference_positions``, default
    ``positions``) are indexed by vertex id.  Leaves left unmatched get
    fresh labels above the reference's largest label.
    """
    if len(tree) == 0:
        raise ValueError("empty tree")
    n = len(tree)
    if strategy == "mesh-index":
        groups = [
            [tree.vertex_ids[u]] if (tree.is_leaf(u) or label_saddles) else []
            for u in range(n)
        ]
        return LabeledMergeTree(tree, groups)
    if strategy != "euclidean":
        raise ValueError(f"unknown labeling strategy {strategy!r}")
    if reference is None or positions is None:
        raise ValueError("euclidean labeling needs a reference tree and positions")
    positions = np.asarray(positions, dtype=np.float64)
    ref_positions = positions if reference_positions is None else np.asarray(
        reference_positions, dtype=np.float64
    )
    rtree = reference.tree
    ref_leaves = [u for u in rtree.leaves if reference.node_labels[u]]
    leaves = sorted(tree.leaves, key=tree.key)
    a = positions[[tree.vertex_ids[u] for u in leaves]]
    b = ref_positions[[rtree.vertex_ids[u] for u in ref_leaves]]
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    groups: list[list[int]] = [[] for _ in range(n)]
    for i, j in zip(rows.tolist(), cols.tolist()):
        groups[leaves[i]] = list(reference.node_labels[ref_leaves[j]])
    fresh = max(reference.labels, default=-1) + 1
    for u in leaves:
        if not groups[u]:
            groups[u] = [fresh]
            fresh += 1
    return LabeledMergeTree(tree, groups)


def lca(tree: MergeTree, u: int, v: int) -> int:
    """Lowest common ancestor (a node is its own ancestor)."""
    n = len(tree)
    for x in (u, v):
        if not isinstance(x, (int, np.integer)) or not 0 <= x < n:
            raise IndexError(f"invalid node index {x!r}")
    depth, parent = tree.depth, tree.parent
    u, v = int(u), int(v)
    while depth[u] > depth[v]:
        u = parent[u]
    while depth[v] > depth[u]:
        v = parent[v]
    while u != v:
        u, v = parent[u], parent[v]
    return u


def induced_matrix(ltree: LabeledMergeTree, n: int | None = None, labels=None) -> np.ndarray:
    """Matrix ``M[i, j] = value(lca(node(i), node(j)))`` over a label universe.

    The universe is ``labels`` if given, else ``1..n``, else every label of
    the tree in increasing order.  A label absent from the tree is an error.
    """
    if labels is None:
        labels = range(1, n + 1) if n is not None else ltree.labels
    labels = [int(x) for x in labels]
    tree = ltree.tree
    index_of = {}
    node_members: list[list[int]] = [[] for _ in range(len(tree))]
    for idx, lab in enumerate(labels):
        node_members[ltree.node_of(lab)].append(idx)
        index_of[lab] = idx
    m = len(labels)
    M = np.empty((m, m))
    members: list[list[int] | None] = [None] * len(tree)
    vals = tree.values
    for u in reversed(tree.order):
        groups = [node_members[u]] + [members[c] for c in tree.children[u]]
        groups = [g for g in groups if g]
        own = node_members[u]
        if own:
            M[np.ix_(own, own)] = vals[u]
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                M[np.ix_(groups[i], groups[j])] = vals[u]
                M[np.ix_(groups[j], groups[i])] = vals[u]
        merged = [x for g in groups for x in g]
        members[u] = merged
        for c in tree.children[u]:
            members[c] = None
    return M


def tree_to_json(ltree: LabeledMergeTree) -> dict:
    t = ltree.tree
    nodes = [
        {
            "value": t.values[i],
            "vertex_id": t.vertex_ids[i],
            "parent": None if t.parent[i] < 0 else t.parent[i],
            "labels": list(ltree.node_labels[i]),
        }
        for i in range(len(t))
    ]
    return {"nodes": nodes, "root": t.root, "direction": t.direction}


def tree_from_json(doc: Mapping) -> LabeledMergeTree:
    nodes = doc["nodes"]
    tree = MergeTree(
        [nd["parent"] if nd["parent"] is not None else -1 for nd in nodes],
        [nd["value"] for nd in nodes],
        [nd["vertex_id"] for nd in nodes],
        doc.get("direction", "sublevel"),
    )
    if tree.root != doc["root"]:
        raise ValueError(f"declared root {doc['root']} disagrees with parent links")
    return LabeledMergeTree(tree, [nd.get("labels", []) for nd in nodes])


def dumps_tree(ltree: LabeledMergeTree) -> str:
    return json.dumps(tree_to_json(ltree))


def loads_tree(text: str) -> LabeledMergeTree:
    return tree_from_json(json.loads(text))
