"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .field import ScalarField
from .signatures import Signature
from .tree import LabeledMergeTree, LabeledTree


def check_fields(X) -> list[ScalarField]:
    fields = list(X)
    if not fields:
        raise ValueError("expected at least one scalar field")
    for i, f in enumerate(fields):
        if not isinstance(f, ScalarField):
            raise TypeError(f"item {i} is {type(f).__name__}, expected ScalarField")
    return fields


def check_trees(X) -> list[LabeledMergeTree]:
    trees = list(X)
    if not trees:
        raise ValueError("expected at least one labeled merge tree")
    for i, t in enumerate(trees):
        if not isinstance(t, (LabeledMergeTree, LabeledTree)):
            raise TypeError(f"item {i} is {type(t).__name__}, expected LabeledMergeTree")
    return trees


def check_signatures(X) -> np.ndarray:
    """Signature matrix ``(n_trees, k)`` of dtype uint64.

    Accepts a 2D array or a sequence of mutually compatible
    :class:`Signature` objects.
    """
    if isinstance(X, np.ndarray):
        if X.dtype != np.uint64:
            if not np.issubdtype(X.dtype, np.integer) or (X.size and X.min() < 0):
                raise ValueError("signature matrix must hold unsigned 64-bit hash values")
            X = X.astype(np.uint64)
        return check_array(X, dtype=None, ensure_all_finite=False)
    items = list(X)
    if not items:
        raise ValueError("expected at least one signature")
    if all(isinstance(s, Signature) for s in items):
        first = items[0]
        for i, s in enumerate(items):
            if not s.compatible(first) or len(s) != len(first):
                raise ValueError(f"signature {i} is incompatible with signature 0")
        return np.vstack([s.values for s in items])
    return check_signatures(np.asarray(items))


def check_positive_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
