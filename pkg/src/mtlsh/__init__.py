"""Locality-sensitive hashing for labeled merge trees."""

__version__ = "0.1.0"

from .field import (
    FieldFormatError, ScalarField, compute_merge_tree, generate_moving_gaussian,
    load_field, save_field,
)
from .tree import (
    LabeledMergeTree, LabeledTree, MergeTree, assign_labels, induced_matrix, lca,
    simplify_by_persistence,
)
from .signatures import (
    DUMMY, HashFamily, Signature, SubpathMultiset, encode_subpath, generate_subpaths,
    hamming_similarity, minhash, recursive_minhash, rmh_signature, ss_signature,
)
from .lsh import (
    LshIndex, PairMatrix, binary_matrix, build_index, candidate_pairs,
    collision_probability, similarity_matrix,
)
from .baselines import distance_matrix, interleaving_distance, precision_recall, ted_oracle
from .estimators import MergeTreeBuilder, MergeTreeLSH, RecursiveMinHash, SubpathSignature

__all__ = [
    "FieldFormatError", "ScalarField", "compute_merge_tree", "generate_moving_gaussian",
    "load_field", "save_field",
    "LabeledMergeTree", "LabeledTree", "MergeTree", "assign_labels", "induced_matrix", "lca",
    "simplify_by_persistence",
    "DUMMY", "HashFamily", "Signature", "SubpathMultiset", "encode_subpath",
    "generate_subpaths", "hamming_similarity", "minhash", "recursive_minhash",
    "rmh_signature", "ss_signature",
    "LshIndex", "PairMatrix", "binary_matrix", "build_index", "candidate_pairs",
    "collision_probability", "similarity_matrix",
    "distance_matrix", "interleaving_distance", "precision_recall", "ted_oracle",
    "MergeTreeBuilder", "MergeTreeLSH", "RecursiveMinHash", "SubpathSignature",
]
