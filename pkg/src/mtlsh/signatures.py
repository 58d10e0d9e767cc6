"""MinHash families, subpath multisets and merge-tree signatures.

Two signature flavours are produced for a :class:`LabeledMergeTree`:

* ``SS`` -- MinHash over the set of length-``t`` label subpaths,
  ``k`` values long;
* ``RMH`` -- recursive MinHash, reorganising children's hash vectors at
  every internal node, ``q * q`` values long whatever the tree shape.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tree import LabeledMergeTree, MergeTree

__all__ = [
    "DUMMY",
    "HashFamily",
    "Signature",
    "SubpathMultiset",
    "minhash",
    "generate_subpaths",
    "encode_subpath",
    "ss_signature",
    "recursive_minhash",
    "rmh_signature",
    "hamming_similarity",
    "write_signatures",
    "read_signatures",
]

# marker for the padding nodes above the root
DUMMY = None

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser, elementwise on a uint64 array."""
    z = x + _GOLDEN
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    return z ^ (z >> _U64(31))


def _as_u64(seed: int) -> np.ndarray:
    return np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)


class HashFamily:
    """Seeded family of ``count`` MinHash functions.

    ``universal`` mode maps each element to a 64-bit token (integers are
    taken as-is, ``bytes`` through an 8-byte BLAKE2b digest) and function
    ``i`` is ``mix(mix(token ^ seed_key) ^ salt_i)`` with ``mix`` the
    splitmix64 finaliser and ``salt_i`` derived from ``(seed, i)``.

    ``permutation`` mode works on an explicit finite universe whose
    elements are indexed ``1..N``; function ``i`` is a permutation listing
    indices in order and the MinHash of a set is the first listed index
    that belongs to it.
    """

    def __init__(self, seed: int = 0, count: int = 20, mode: str = "universal",
                 universe=None, permutations=None):
        if count < 1:
            raise ValueError("a hash family needs at least one function")
        if mode not in ("universal", "permutation"):
            raise ValueError(f"unknown hash mode {mode!r}")
        self.seed = int(seed)
        self.count = int(count)
        self.mode = mode
        seed_arr = _as_u64(self.seed)
        self._key = _mix64(seed_arr ^ _U64(0x5851F42D4C957F2D))
        self._salts = _mix64(_mix64(seed_arr) + np.arange(1, self.count + 1, dtype=np.uint64))
        self.universe = None
        self._index = None
        self._ranks = None
        if mode == "permutation":
            if universe is None:
                if permutations is None:
                    raise ValueError("permutation mode needs a universe")
                universe = range(1, len(permutations[0]) + 1)
            self.universe = tuple(universe)
            size = len(self.universe)
            self._index = {u: i + 1 for i, u in enumerate(self.universe)}
            if permutations is None:
                rng = np.random.default_rng(self.seed)
                permutations = [rng.permutation(size) + 1 for _ in range(self.count)]
            if len(permutations) != self.count:
                raise ValueError("need one permutation per hash function")
            ranks = np.full((self.count, size + 1), np.iinfo(np.int64).max, dtype=np.int64)
            for i, perm in enumerate(permutations):
                perm = [int(p) for p in perm]
                if sorted(perm) != list(range(1, size + 1)):
                    raise ValueError(f"permutation {i} is not a permutation of 1..{size}")
                ranks[i, perm] = np.arange(size)
            self._ranks = ranks
            self._orders = np.array([list(p) for p in permutations], dtype=np.int64)

    @classmethod
    def from_permutations(cls, permutations, universe=None) -> "HashFamily":
        return cls(0, len(permutations), "permutation", universe, permutations)

    def __repr__(self):
        return f"HashFamily(seed={self.seed}, count={self.count}, mode={self.mode!r})"

    def __eq__(self, other):
        if not isinstance(other, HashFamily):
            return NotImplemented
        same = (self.seed, self.count, self.mode, self.universe) == (
            other.seed, other.count, other.mode, other.universe)
        if same and self.mode == "permutation":
            same = np.array_equal(self._ranks, other._ranks)
        return same

    def tokens(self, elements) -> np.ndarray:
        """64-bit tokens of hashable elements (universal mode)."""
        out = np.empty(len(elements), dtype=np.uint64)
        for i, e in enumerate(elements):
            if isinstance(e, (bytes, bytearray)):
                out[i] = int.from_bytes(hashlib.blake2b(e, digest_size=8).digest(), "little")
            elif isinstance(e, (int, np.integer)):
                out[i] = int(e) & 0xFFFFFFFFFFFFFFFF
            else:
                raise TypeError(f"cannot hash element of type {type(e).__name__}")
        return out

    def hash_tokens(self, tokens: np.ndarray) -> np.ndarray:
        """All functions applied to all tokens, shape ``(count, len(tokens))``."""
        base = _mix64(np.asarray(tokens, dtype=np.uint64) ^ self._key)
        return _mix64(base[None, :] ^ self._salts[:, None])

    def indices(self, elements) -> np.ndarray:
        """1-based universe indices of elements (permutation mode)."""
        try:
            return np.array([self._index[e] for e in elements], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"element {exc.args[0]!r} outside the permutation universe") from None

    def minhash_indices(self, idx: np.ndarray) -> np.ndarray:
        """Permutation-mode MinHash of a set given by universe indices."""
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("MinHash of an empty set")
        if idx.min() < 1 or idx.max() >= self._ranks.shape[1]:
            raise ValueError("index outside the permutation universe")
        first = self._ranks[:, idx].min(axis=1)
        return self._orders[np.arange(self.count), first].astype(np.uint64)


def minhash(elements, family: HashFamily) -> np.ndarray:
    """``count``-long MinHash vector of a finite set.

    Universal mode returns the minimal hashed value per function;
    permutation mode returns the index of the first member under each
    permutation.
    """
    elements = list(dict.fromkeys(elements))
    if not elements:
        raise ValueError("MinHash of an empty set")
    if family.mode == "permutation":
        return family.minhash_indices(family.indices(elements))
    return family.hash_tokens(family.tokens(elements)).min(axis=1)


@dataclass(frozen=True)
class Signature:
    values: np.ndarray
    flavor: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.flavor not in ("SS", "RMH"):
            raise ValueError(f"unknown signature flavor {self.flavor!r}")
        values = np.array(self.values, dtype=np.uint64).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "params", dict(sorted(self.params.items())))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Signature):
            return NotImplemented
        return self.compatible(other) and np.array_equal(self.values, other.values)

    __hash__ = None

    def compatible(self, other: "Signature") -> bool:
        return (self.flavor, self.params, self.seed) == (other.flavor, other.params, other.seed)

    def to_record(self, tree_id) -> dict:
        return {
            "tree_id": tree_id,
            "flavor": self.flavor,
            "params": self.params,
            "seed": self.seed,
            "values": [str(int(v)) for v in self.values],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Signature":
        return cls(
            np.array([int(v) for v in rec["values"]], dtype=np.uint64),
            rec["flavor"], rec["params"], int(rec["seed"]),
        )


class SubpathMultiset:
    """Length-``t`` subpaths of a labeled tree, one per original node.

    Each entry is a ``t``-tuple ordered from the most ancestral position
    down to the node itself; a position is :data:`DUMMY` or the node's
    sorted label tuple (possibly empty for an unlabeled internal node).
    """

    __slots__ = ("t", "entries")

    def __init__(self, t: int, entries):
        self.t = t
        self.entries = tuple(entries)
        for e in self.entries:
            if len(e) != t:
                raise ValueError(f"subpath {e!r} does not have {t} positions")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        if not isinstance(other, SubpathMultiset):
            return NotImplemented
        return self.t == other.t and self.counts() == other.counts()

    __hash__ = None

    def __repr__(self):
        return f"SubpathMultiset(t={self.t}, entries={len(self.entries)})"

    def counts(self) -> Counter:
        return Counter(self.entries)

    def distinct(self) -> set:
        return set(self.entries)


def generate_subpaths(ltree: LabeledMergeTree, t: int) -> SubpathMultiset:
    """Collect the subpath multiset with a depth-first sweep.

    ``t - 1`` dummy nodes are stacked above the root; the DFS keeps the
    current root path in an array, and when a node finishes the top ``t``
    entries of that array are emitted (the pop-``t``/push-``t-1`` step done
    in place).
    """
    if t < 1:
        raise ValueError("subpath length t must be >= 1")
    tree = ltree.tree
    labels = ltree.node_labels
    kids = tree.children
    path = [DUMMY] * (t - 1)
    out = []
    stack = [(tree.root, 0)]
    path.append(labels[tree.root])
    while stack:
        u, i = stack[-1]
        if i < len(kids[u]):
            stack[-1] = (u, i + 1)
            c = kids[u][i]
            stack.append((c, 0))
            path.append(labels[c])
        else:
            stack.pop()
            out.append(tuple(path[-t:]))
            path.pop()
    return SubpathMultiset(t, out)


_SEP = b"\xff"
_DUMMY_BYTES = b"\x00"


def encode_subpath(subpath) -> bytes:
    """Canonical byte encoding hashed by SS signatures.

    Positions appear most-ancestral first, separated by ``0xFF``; a dummy
    is the single byte ``0x00``, a label group is its length followed by
    its sorted labels, all little-endian ``u32``.
    """
    parts = []
    for pos in subpath:
        if pos is DUMMY:
            parts.append(_DUMMY_BYTES)
        else:
            group = sorted(pos)
            parts.append(struct.pack(f"<I{len(group)}I", len(group), *group))
    return _SEP.join(parts)


def ss_signature(ltree: LabeledMergeTree, t: int, family: HashFamily) -> Signature:
    if family.mode != "universal":
        raise ValueError("subpath signatures need a universal-mode hash family")
    subpaths = generate_subpaths(ltree, t).distinct()
    encoded = sorted(encode_subpath(sp) for sp in subpaths)
    values = family.hash_tokens(family.tokens(encoded)).min(axis=1)
    return Signature(values, "SS", {"k": family.count, "t": int(t)}, family.seed)


def _rmh_pool(rows: np.ndarray, family: HashFamily) -> np.ndarray:
    """q-MinHash of each column of ``rows``; result[i] hashes column i."""
    m, q = rows.shape
    if family.mode == "permutation":
        ranks = family._ranks[:, rows.astype(np.int64)]  # (funcs, m, q)
        first = ranks.min(axis=1)                        # (funcs, q)
        out = family._orders[np.arange(family.count)[:, None], first]
        return out.T.astype(np.uint64)
    h = family.hash_tokens(rows.ravel()).reshape(family.count, m, q)
    return h.min(axis=1).T


def recursive_minhash(tree: MergeTree, node_sets, family: HashFamily) -> np.ndarray:
    """Recursive MinHash of a tree whose leaves carry element sets.

    Leaves are q-MinHashed on their sets.  An internal node stacks the
    vectors handed up by its children (one per leaf child, ``q`` per
    internal child), pools the ``i``-th components into set ``i`` and
    q-MinHashes every pooled set, handing ``q`` vectors to its parent.  Sets
    on internal nodes are ignored.  Returns the root's ``q`` vectors as a
    ``(q, q)`` array (row ``i`` hashes pooled set ``i``); a single-leaf tree
    repeats its leaf vector ``q`` times.
    """
    q = family.count
    kids = tree.children
    out: list[np.ndarray | None] = [None] * len(tree)
    for u in reversed(tree.order):
        if not kids[u]:
            if not node_sets[u]:
                raise ValueError(f"leaf {u} has no labels")
            out[u] = minhash(node_sets[u], family)[None, :]
            continue
        rows = np.vstack([out[c] for c in kids[u]])
        for c in kids[u]:
            out[c] = None
        out[u] = _rmh_pool(rows, family)
    top = out[tree.root]
    if top.shape[0] == 1:
        top = np.repeat(top, q, axis=0)
    return top


def rmh_signature(ltree: LabeledMergeTree, family: HashFamily) -> Signature:
    """RMH signature of length ``q**2`` (``q = family.count``).

    Only leaf labels are hashed; scalar values act through the tree shape
    alone.
    """
    top = recursive_minhash(ltree.tree, ltree.node_labels, family)
    return Signature(top.ravel(), "RMH", {"q": family.count}, family.seed)


def hamming_similarity(a: Signature, b: Signature) -> float:
    """Fraction of agreeing positions; ``1 - similarity`` is the distance."""
    if not a.compatible(b) or len(a) != len(b):
        raise ValueError(
            f"incomparable signatures: {a.flavor}{a.params}/seed {a.seed} vs "
            f"{b.flavor}{b.params}/seed {b.seed}"
        )
    return float(np.mean(a.values == b.values))


def write_signatures(path, items) -> None:
    """Write ``(tree_id, Signature)`` pairs as JSON lines."""
    with open(path, "w") as fh:
        for tree_id, sig in items:
            fh.write(json.dumps(sig.to_record(tree_id)) + "\n")


def read_signatures(path) -> list[tuple[object, Signature]]:
    items = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            rec = json.loads(line)
            items.append((rec["tree_id"], Signature.from_record(rec)))
    return items
