"""scikit-learn style wrappers around the merge-tree LSH pipeline.

The three stages compose with :class:`sklearn.pipeline.Pipeline`::

    pipe = make_pipeline(
        MergeTreeBuilder(direction="superlevel", epsilon=0.02, labeling="euclidean"),
        SubpathSignature(t=4, k=20, seed=0),
        MergeTreeLSH(r=1),
    )
    pipe.fit(fields)
    pipe[-1].candidate_pairs_
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_fields, check_positive_int, check_signatures, check_trees
from .field import compute_merge_tree, grid_positions
from .lsh import LshIndex, PairMatrix, binary_matrix, candidate_pairs, similarity_matrix
from .signatures import HashFamily, Signature, rmh_signature, ss_signature
from .tree import assign_labels, simplify_by_persistence

__all__ = ["MergeTreeBuilder", "SubpathSignature", "RecursiveMinHash", "MergeTreeLSH"]


class MergeTreeBuilder(TransformerMixin, BaseEstimator):
    """Scalar fields -> simplified labeled merge trees.

    With ``labeling="euclidean"`` the reference is the first field seen by
    :meth:`fit`, labeled by mesh index, unless ``reference`` is given as a
    ``(LabeledMergeTree, positions)`` pair.
    """

    def __init__(self, direction="sublevel", epsilon=0.0, labeling="mesh-index",
                 label_saddles=False, reference=None):
        self.direction = direction
        self.epsilon = epsilon
        self.labeling = labeling
        self.label_saddles = label_saddles
        self.reference = reference

    def _tree(self, field):
        tree = compute_merge_tree(field, self.direction)
        return simplify_by_persistence(tree, self.epsilon)

    def fit(self, X, y=None):
        fields = check_fields(X)
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.labeling not in ("mesh-index", "euclidean"):
            raise ValueError(f"unknown labeling {self.labeling!r}")
        if self.labeling == "euclidean":
            if self.reference is not None:
                self.reference_, self.reference_positions_ = self.reference
            else:
                self.reference_ = assign_labels(
                    self._tree(fields[0]), "mesh-index", label_saddles=self.label_saddles
                )
                self.reference_positions_ = grid_positions(fields[0])
        else:
            self.reference_ = None
            self.reference_positions_ = None
        self.n_fields_fit_ = len(fields)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_fields_fit_")
        return [self._label(f) for f in check_fields(X)]

    def _label(self, field):
        tree = self._tree(field)
        if self.labeling == "mesh-index":
            return assign_labels(tree, "mesh-index", label_saddles=self.label_saddles)
        return assign_labels(
            tree, "euclidean", reference=self.reference_, positions=grid_positions(field),
            reference_positions=self.reference_positions_,
        )


class _SignatureTransformer(TransformerMixin, BaseEstimator):
    flavor = ""

    def fit(self, X=None, y=None):
        self._check_params()
        self.family_ = self._family()
        self.n_features_out_ = self._length()
        return self

    def signatures(self, X) -> list[Signature]:
        check_is_fitted(self, "family_")
        return [self._sign(t) for t in check_trees(X)]

    def transform(self, X) -> np.ndarray:
        sigs = self.signatures(X)
        return np.vstack([s.values for s in sigs])


class SubpathSignature(_SignatureTransformer):
    """Labeled merge trees -> ``(n_trees, k)`` subpath MinHash signatures."""

    flavor = "SS"

    def __init__(self, t=4, k=20, seed=0):
        self.t = t
        self.k = k
        self.seed = seed

    def _check_params(self):
        check_positive_int("t", self.t)
        check_positive_int("k", self.k)

    def _family(self):
        return HashFamily(self.seed, self.k)

    def _length(self):
        return self.k

    def _sign(self, tree):
        return ss_signature(tree, self.t, self.family_)


class RecursiveMinHash(_SignatureTransformer):
    """Labeled merge trees -> ``(n_trees, q**2)`` recursive MinHash signatures."""

    flavor = "RMH"

    def __init__(self, q=2, seed=0):
        self.q = q
        self.seed = seed

    def _check_params(self):
        check_positive_int("q", self.q)

    def _family(self):
        return HashFamily(self.seed, self.q)

    def _length(self):
        return self.q * self.q

    def _sign(self, tree):
        return rmh_signature(tree, self.family_)


class MergeTreeLSH(BaseEstimator):
    """Banded LSH over a signature matrix.

    After :meth:`fit`, ``candidate_pairs_`` holds the colliding row pairs
    and ``index_`` the band tables; :meth:`predict` reports, for new
    signatures, which fitted rows they collide with.
    """

    def __init__(self, r=1):
        self.r = r

    def fit(self, X, y=None):
        S = check_signatures(X)
        r = check_positive_int("r", self.r)
        index = LshIndex(S.shape[1], r)
        for i, row in enumerate(S):
            index.insert(i, row)
        self.index_ = index
        self.signatures_ = S
        self.n_samples_fit_ = S.shape[0]
        self.b_ = index.b
        self.candidate_pairs_ = candidate_pairs(index)
        return self

    def predict(self, X) -> list[set[int]]:
        check_is_fitted(self, "index_")
        S = check_signatures(X)
        if S.shape[1] != self.index_.k:
            raise ValueError(f"expected signatures of length {self.index_.k}, got {S.shape[1]}")
        return [self.index_.query(row) for row in S]

    def collision_matrix(self) -> PairMatrix:
        check_is_fitted(self, "index_")
        return binary_matrix(self.candidate_pairs_, self.n_samples_fit_)

    def similarity_matrix(self) -> PairMatrix:
        check_is_fitted(self, "index_")
        return similarity_matrix(list(self.signatures_))
