"""Banded LSH over signatures, collision matrices and their export."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .signatures import Signature, hamming_similarity

__all__ = [
    "LshIndex",
    "PairMatrix",
    "build_index",
    "candidate_pairs",
    "binary_matrix",
    "similarity_matrix",
    "collision_probability",
]


class LshIndex:
    """``b`` band tables keyed by the exact content of ``r`` signature rows.

    Band ``i`` owns rows ``[r*i, r*(i+1))``.  Keys are the raw row bytes, so
    two trees share a bucket only when all ``r`` values agree.
    """

    def __init__(self, k: int, r: int):
        if r < 1 or k < 1:
            raise ValueError("k and r must be positive")
        if k % r:
            raise ValueError(f"r={r} does not divide signature length k={k}")
        self.k = k
        self.r = r
        self.b = k // r
        self.bands: list[dict[bytes, list]] = [defaultdict(list) for _ in range(self.b)]
        self.ids: list = []
        self._seen: set = set()
        self._meta = None

    @property
    def entries(self) -> int:
        return len(self.ids)

    def __repr__(self):
        return f"LshIndex(k={self.k}, r={self.r}, b={self.b}, entries={self.entries})"

    def insert(self, tree_id, values: np.ndarray) -> None:
        if tree_id in self._seen:
            raise ValueError(f"tree id {tree_id!r} already indexed")
        values = np.ascontiguousarray(values, dtype=np.uint64)
        if values.shape != (self.k,):
            raise ValueError(f"signature length {values.size} != k={self.k}")
        self._seen.add(tree_id)
        self.ids.append(tree_id)
        r = self.r
        for i, table in enumerate(self.bands):
            table[values[r * i:r * (i + 1)].tobytes()].append(tree_id)

    def buckets(self):
        for table in self.bands:
            for members in table.values():
                if len(members) > 1:
                    yield members

    def query(self, values: np.ndarray) -> set:
        """Ids sharing at least one band with ``values``."""
        values = np.ascontiguousarray(values, dtype=np.uint64)
        r = self.r
        found = set()
        for i, table in enumerate(self.bands):
            found.update(table.get(values[r * i:r * (i + 1)].tobytes(), ()))
        return found


def build_index(signatures, r: int) -> LshIndex:
    """Index a sequence of ``(tree_id, Signature)`` pairs."""
    signatures = list(signatures)
    if not signatures:
        raise ValueError("no signatures to index")
    first = signatures[0][1]
    for tid, sig in signatures:
        if not sig.compatible(first) or len(sig) != len(first):
            raise ValueError(f"signature for {tid!r} is incompatible with the collection")
    index = LshIndex(len(first), r)
    index._meta = (first.flavor, first.params, first.seed)
    for tid, sig in signatures:
        index.insert(tid, sig.values)
    return index


def candidate_pairs(index: LshIndex) -> set[tuple]:
    """Unordered id pairs (``(a, b)`` with ``a < b``) sharing a bucket in any band."""
    pairs = set()
    for members in index.buckets():
        for a, b in combinations(sorted(members), 2):
            pairs.add((a, b))
    return pairs


def collision_probability(s: float, r: int, b: int) -> float:
    """Probability ``1 - (1 - s**r)**b`` that a pair becomes a candidate."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"similarity must lie in [0, 1], got {s}")
    if r < 1 or b < 1:
        raise ValueError("r and b must be positive")
    return 1.0 - (1.0 - s**r) ** b


@dataclass(frozen=True)
class PairMatrix:
    data: np.ndarray
    kind: str = "binary-collision"

    def __post_init__(self):
        if self.kind not in ("binary-collision", "similarity", "distance"):
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        data = np.array(self.data, dtype=np.uint8 if self.kind == "binary-collision" else np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("pair matrix must be square")
        if not np.array_equal(data, data.T):
            raise ValueError("pair matrix must be symmetric")
        diag = np.diag(data)
        if self.kind == "binary-collision" and not np.all(diag == 1):
            raise ValueError("binary matrix needs a unit diagonal")
        if self.kind == "distance" and not np.all(diag == 0):
            raise ValueError("distance matrix needs a zero diagonal")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def to_csv(self, path) -> None:
        if self.kind == "binary-collision":
            rows = [",".join(str(int(v)) for v in row) for row in self.data]
        else:
            rows = [",".join(repr(float(v)) for v in row) for row in self.data]
        Path(path).write_text("\n".join(rows) + "\n")

    def to_pgm(self, path) -> None:
        """8-bit binary PGM: 1 is black and 0 white; real data scale linearly."""
        if self.kind == "binary-collision":
            img = np.where(self.data == 1, 0, 255).astype(np.uint8)
        else:
            lo, hi = float(self.data.min()), float(self.data.max())
            span = hi - lo if hi > lo else 1.0
            img = np.round(255.0 * (1.0 - (self.data - lo) / span)).astype(np.uint8)
        header = f"P5\n{self.n} {self.n}\n255\n".encode("ascii")
        Path(path).write_bytes(header + img.tobytes())

    @classmethod
    def from_csv(cls, path, kind: str = "binary-collision") -> "PairMatrix":
        text = Path(path).read_text().strip()
        rows = [[float(x) for x in line.split(",")] for line in text.splitlines()]
        return cls(np.array(rows), kind)


def binary_matrix(pairs, n: int) -> PairMatrix:
    m = np.eye(n, dtype=np.uint8)
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"pair ({a}, {b}) out of range for n={n}")
        m[a, b] = m[b, a] = 1
    return PairMatrix(m, "binary-collision")


def similarity_matrix(signatures) -> PairMatrix:
    """Pairwise Hamming similarity of a list of compatible signatures."""
    sigs = [s.values if isinstance(s, Signature) else np.asarray(s) for s in signatures]
    if signatures and isinstance(signatures[0], Signature):
        for s in signatures[1:]:
            hamming_similarity(signatures[0], s)  # raises on mismatch
    X = np.vstack(sigs) if sigs else np.empty((0, 0), dtype=np.uint64)
    sim = (X[:, None, :] == X[None, :, :]).mean(axis=2)
    return PairMatrix(sim, "similarity")
