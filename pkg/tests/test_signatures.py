import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtlsh.datasets import balanced_tree, random_merge_tree, random_small_tree
from mtlsh.signatures import (
    DUMMY, HashFamily, Signature, encode_subpath, generate_subpaths, hamming_similarity,
    minhash, read_signatures, recursive_minhash, rmh_signature, ss_signature,
    write_signatures,
)
from mtlsh.tree import LabeledMergeTree, LabeledTree, MergeTree

from oracles import enumerate_subpaths, jaccard, rmh_by_permutations, universal_hash

PERMS = [
    (3, 2, 4, 1, 5, 6, 7, 8, 9, 10),
    (4, 5, 3, 6, 8, 9, 10, 2, 1, 7),
    (1, 3, 5, 2, 4, 7, 9, 6, 8, 10),
    (1, 4, 7, 6, 5, 3, 8, 2, 9, 10),
]
A, B, C, D, E = 1, 2, 3, 4, 5
S1, S2, S3 = {A, B, C}, {B, E}, {D, E, A}


def star(sets):
    n = len(sets)
    tree = MergeTree([n] * n + [-1], [float(i) for i in range(n)] + [float(n)])
    return tree, [sorted(s) for s in sets] + [[]]


def caterpillar(height):
    """Spine of ``height`` edges, one extra leaf hanging off every spine node."""
    parent, values, labels = [-1], [100.0], [[]]
    spine = 0
    for h in range(height):
        leaf = len(parent)
        parent.append(spine)
        values.append(values[spine] - 1.5)
        labels.append([leaf])
        if h < height - 1:
            nxt = len(parent)
            parent.append(spine)
            values.append(values[spine] - 1.0)
            labels.append([])
            spine = nxt
    return LabeledMergeTree(MergeTree(parent, values), labels)


def relabel_nodes(lt, perm):
    """Same tree with node indices permuted by ``perm`` (old -> new)."""
    t = lt.tree
    n = len(t)
    inv = [0] * n
    for old, new in enumerate(perm):
        inv[new] = old
    parent = [perm[t.parent[inv[i]]] if t.parent[inv[i]] >= 0 else -1 for i in range(n)]
    values = [t.values[inv[i]] for i in range(n)]
    vids = [t.vertex_ids[inv[i]] for i in range(n)]
    labels = [lt.node_labels[inv[i]] for i in range(n)]
    return LabeledMergeTree(MergeTree(parent, values, vids), labels)


class TestHashFamily:
    def test_deterministic(self):
        a, b = HashFamily(42, 8), HashFamily(42, 8)
        assert a == b
        toks = a.tokens([1, 2, b"xyz"])
        np.testing.assert_array_equal(a.hash_tokens(toks), b.hash_tokens(toks))

    def test_seed_matters(self):
        toks = np.arange(10, dtype=np.uint64)
        assert not np.array_equal(HashFamily(1, 4).hash_tokens(toks),
                                  HashFamily(2, 4).hash_tokens(toks))

    def test_frozen_values(self):
        # computed with the scalar splitmix64 oracle, pinned so signatures stay reproducible
        h = HashFamily(0, 2).hash_tokens(np.array([0, 1], dtype=np.uint64))
        assert h.tolist() == [[17055114173916765164, 14465468287456227039],
                              [9698266460347754035, 18273005744497675480]]
        fam = HashFamily(7, 3)
        assert fam.tokens([b"xyz"]).tolist() == [11903863977274058319]
        assert int(fam.hash_tokens(fam.tokens([b"xyz"]))[2, 0]) == 14620689465014782545

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**64 - 1), st.integers(1, 6), st.integers(0, 2**64 - 1))
    def test_matches_scalar_oracle(self, seed, count, token):
        h = HashFamily(seed, count).hash_tokens(np.array([token], dtype=np.uint64))
        assert h[:, 0].tolist() == [universal_hash(seed, i, token) for i in range(count)]

    def test_errors(self):
        with pytest.raises(ValueError):
            HashFamily(0, 0)
        with pytest.raises(ValueError):
            HashFamily(0, 2, mode="md5")
        with pytest.raises(ValueError, match="universe"):
            HashFamily(0, 2, mode="permutation")
        with pytest.raises(ValueError, match="not a permutation"):
            HashFamily.from_permutations([(1, 1, 2)])
        with pytest.raises(TypeError):
            HashFamily(0, 2).tokens([1.5])

    def test_random_permutations_seeded(self):
        a = HashFamily(3, 4, "permutation", universe=range(1, 11))
        b = HashFamily(3, 4, "permutation", universe=range(1, 11))
        assert a == b


class TestMinHash:
    def test_first_permutation_example(self):
        fam = HashFamily.from_permutations(PERMS[:1])
        assert [int(minhash(s, fam)[0]) for s in (S1, S2, S3)] == [3, 2, 4]

    def test_consistent_first_level_values(self):
        # h_i(S_j) for the four permutations; h_2(S_3) is excluded because the
        # expected table lists 1 although pi_2 reaches 4 before 1
        expected = {
            (0, 0): 3, (0, 1): 2, (0, 2): 4,
            (1, 0): 3, (1, 1): 5,
            (2, 0): 1, (2, 1): 5, (2, 2): 1,
            (3, 0): 1, (3, 1): 5, (3, 2): 1,
        }
        fam = HashFamily.from_permutations(PERMS)
        got = {j: minhash(s, fam) for j, s in enumerate((S1, S2, S3))}
        for (i, j), v in expected.items():
            assert int(got[j][i]) == v
        assert int(got[2][1]) == 4

    def test_second_level_from_expected_pools(self):
        fam = HashFamily.from_permutations(PERMS)
        pools = [{3, 2, 4}, {3, 5, 1}, {1, 5}, {1, 5}]
        rows = [minhash(s, fam).tolist() for s in pools]
        assert sum(rows, []) == [3, 4, 3, 4, 3, 5, 1, 1, 1, 5, 1, 1, 1, 5, 1, 1]

    def test_universal_is_min_hash(self):
        fam = HashFamily(5, 6)
        elems = [3, 9, 27]
        expect = fam.hash_tokens(fam.tokens(elems)).min(axis=1)
        np.testing.assert_array_equal(minhash(elems, fam), expect)
        np.testing.assert_array_equal(minhash(elems + elems, fam), expect)

    def test_empty_set(self):
        with pytest.raises(ValueError, match="empty"):
            minhash([], HashFamily(0, 2))

    def test_outside_universe(self):
        with pytest.raises(ValueError, match="outside"):
            minhash([11], HashFamily.from_permutations(PERMS))

    @settings(max_examples=15, deadline=None)
    @given(st.sets(st.integers(0, 60), min_size=1, max_size=30),
           st.sets(st.integers(0, 60), min_size=1, max_size=30))
    def test_jaccard_estimate(self, a, b):
        fam = HashFamily(11, 2000)
        s = jaccard(a, b, range(61))
        est = float(np.mean(minhash(a, fam) == minhash(b, fam)))
        assert abs(est - s) <= 4 * np.sqrt(s * (1 - s) / 2000) + 1e-12


class TestSubpaths:
    def test_single_node(self):
        lt = LabeledMergeTree(MergeTree([-1], [0.0]), [[1]])
        assert generate_subpaths(lt, 3).distinct() == {(DUMMY, DUMMY, (1,))}

    def test_path_example(self):
        # root r(3) -> a(2) -> b(1)
        lt = LabeledMergeTree(MergeTree([-1, 0, 1], [3.0, 2.0, 1.0]), [[3], [2], [1]])
        assert generate_subpaths(lt, 2).distinct() == {(DUMMY, (3,)), ((3,), (2,)), ((2,), (1,))}

    def test_multi_label_group(self):
        lt = LabeledMergeTree(MergeTree([1, -1], [0.0, 1.0]), [[7, 2], []])
        assert ((), (2, 7)) in generate_subpaths(lt, 2).distinct()

    def test_bad_t(self):
        with pytest.raises(ValueError):
            generate_subpaths(balanced_tree(3), 0)

    def test_multiset_keeps_duplicates(self):
        lt = random_small_tree(6, seed=2, alphabet=1)
        ms = generate_subpaths(lt, 1)
        assert ms.counts() == {((1,),): 6}

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**16), st.integers(1, 3))
    def test_matches_enumeration(self, n, t, seed, alphabet):
        lt = random_small_tree(n, seed, alphabet)
        ms = generate_subpaths(lt, t)
        assert len(ms) == n
        assert ms.counts() == enumerate_subpaths(lt, t)
        assert all(len(e) == t for e in ms)


class TestEncoding:
    def test_exact_bytes(self):
        enc = encode_subpath((DUMMY, (2, 1), ()))
        assert enc == b"\x00" + b"\xff" + struct.pack("<III", 2, 1, 2) + b"\xff" + struct.pack("<I", 0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.one_of(st.none(), st.lists(st.integers(0, 300), max_size=3).map(
        lambda x: tuple(sorted(set(x))))), min_size=1, max_size=4), st.data())
    def test_injective(self, a, data):
        b = data.draw(st.lists(st.one_of(st.none(), st.lists(st.integers(0, 300), max_size=3).map(
            lambda x: tuple(sorted(set(x))))), min_size=len(a), max_size=len(a)))
        assert (encode_subpath(a) == encode_subpath(b)) == (tuple(a) == tuple(b))


class TestSubpathSignature:
    def test_deterministic(self):
        lt = random_merge_tree(7, seed=4)
        fam = HashFamily(9, 20)
        a, b = ss_signature(lt, 4, fam), ss_signature(lt, 4, HashFamily(9, 20))
        assert a == b
        assert len(a) == 20 and a.flavor == "SS" and a.params == {"k": 20, "t": 4}

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 2**16), st.randoms(use_true_random=False))
    def test_node_order_invariant(self, n, seed, rnd):
        lt = random_merge_tree(n, seed, max_arity=3)
        perm = list(range(len(lt)))
        rnd.shuffle(perm)
        other = relabel_nodes(lt, perm)
        fam = HashFamily(1, 16)
        assert ss_signature(lt, 3, fam) == ss_signature(other, 3, fam)

    def test_disjoint_labels_rarely_match(self):
        # every node labeled, so no subpath can be shared
        a = caterpillar(4)
        groups = [[x + 1000 for x in g] or [2000 + i] for i, g in enumerate(a.node_labels)]
        a = LabeledMergeTree(a.tree, [g or [3000 + i] for i, g in enumerate(a.node_labels)])
        b = LabeledMergeTree(a.tree, groups)
        sa, sb = generate_subpaths(a, 4).distinct(), generate_subpaths(b, 4).distinct()
        assert jaccard(sa, sb, sa | sb) == 0.0
        rates = [hamming_similarity(ss_signature(a, 4, HashFamily(s, 20)),
                                    ss_signature(b, 4, HashFamily(s, 20))) for s in range(100)]
        assert np.mean(rates) < 0.01

    def test_unlabeled_saddles_are_shared_structure(self):
        a = random_merge_tree(8, seed=1, labels=range(1, 9))
        b = random_merge_tree(8, seed=1, labels=range(101, 109))
        sa, sb = generate_subpaths(a, 4).distinct(), generate_subpaths(b, 4).distinct()
        assert (DUMMY, DUMMY, DUMMY, ()) in sa & sb

    def test_estimates_subpath_jaccard(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = random_small_tree(int(rng.integers(3, 11)), rng, alphabet=3)
            b = random_small_tree(int(rng.integers(3, 11)), rng, alphabet=3)
            sa, sb = generate_subpaths(a, 2).distinct(), generate_subpaths(b, 2).distinct()
            s = jaccard(sa, sb, sa | sb)
            fam = HashFamily(int(rng.integers(2**32)), 2000)
            est = hamming_similarity(ss_signature(a, 2, fam), ss_signature(b, 2, fam))
            assert abs(est - s) <= 4 * np.sqrt(s * (1 - s) / 2000) + 1e-12

    def test_needs_universal_family(self):
        with pytest.raises(ValueError, match="universal"):
            ss_signature(balanced_tree(3), 2, HashFamily.from_permutations(PERMS))


class TestRecursiveMinHash:
    def test_star_second_stage_layout(self):
        tree, sets = star([S1, S2, S3])
        fam = HashFamily.from_permutations(PERMS)
        out = recursive_minhash(tree, sets, fam)
        first = np.vstack([minhash(s, fam) for s in (S1, S2, S3)])
        for i in range(4):
            np.testing.assert_array_equal(out[i], minhash(set(first[:, i].tolist()), fam))

    def test_single_leaf_repeats(self):
        lt = LabeledMergeTree(MergeTree([-1], [0.0]), [[4, 8, 15]])
        fam = HashFamily(2, 3)
        sig = rmh_signature(lt, fam)
        np.testing.assert_array_equal(sig.values, np.tile(minhash([4, 8, 15], fam), 3))

    @pytest.mark.parametrize("height", range(1, 11))
    def test_length_is_q_squared(self, height):
        lt = caterpillar(height)
        assert lt.tree.height == height
        for q in (1, 2, 3, 5):
            assert len(rmh_signature(lt, HashFamily(0, q))) == q * q

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 9), st.integers(1, 4), st.integers(0, 2**16))
    def test_matches_plain_recursion(self, n, q, seed):
        rng = np.random.default_rng(seed)
        labels = rng.choice(np.arange(1, 21), size=n, replace=False).tolist()
        lt = random_merge_tree(n, rng, labels=labels, max_arity=3)
        perms = [tuple((rng.permutation(20) + 1).tolist()) for _ in range(q)]
        fam = HashFamily.from_permutations(perms)
        assert rmh_signature(lt, fam).values.tolist() == rmh_by_permutations(
            lt.tree, lt.node_labels, perms)

    def test_values_do_not_enter(self):
        lt = random_merge_tree(6, seed=8)
        shifted = LabeledMergeTree(lt.tree.with_values(np.array(lt.tree.values) * 2 + 5),
                                   lt.node_labels)
        fam = HashFamily(4, 3)
        assert rmh_signature(lt, fam) == rmh_signature(shifted, fam)

    def test_leaf_without_labels(self):
        tree = MergeTree([1, -1], [0.0, 1.0])
        with pytest.raises(ValueError, match="no labels"):
            recursive_minhash(tree, [[], [1]], HashFamily(0, 2))


class TestSignatureRecords:
    def test_similarity_to_self(self):
        s = ss_signature(balanced_tree(7), 3, HashFamily(0, 10))
        assert hamming_similarity(s, s) == 1.0

    def test_incomparable(self):
        lt = balanced_tree(7)
        a = ss_signature(lt, 3, HashFamily(0, 4))
        b = rmh_signature(lt, HashFamily(0, 2))
        c = ss_signature(lt, 3, HashFamily(1, 4))
        for other in (b, c):
            with pytest.raises(ValueError, match="incomparable"):
                hamming_similarity(a, other)

    def test_bad_flavor(self):
        with pytest.raises(ValueError):
            Signature(np.zeros(2), "XX")

    def test_file_round_trip(self, tmp_path):
        lt = balanced_tree(15)
        sigs = [ss_signature(lt, 4, HashFamily(3, 5)), rmh_signature(lt, HashFamily(3, 2))]
        write_signatures(tmp_path / "s.jsonl", enumerate(sigs))
        back = read_signatures(tmp_path / "s.jsonl")
        assert [tid for tid, _ in back] == [0, 1]
        assert [s for _, s in back] == sigs
        first = (tmp_path / "s.jsonl").read_text().splitlines()[0]
        assert '"values": ["' in first  # u64 as decimal strings
