"""The eight acceptance criteria, each at its stated tolerance and time budget.

Every test prints one PASS/FAIL line (also repeated in the terminal
summary) before asserting.
"""

import itertools
import time
from collections import defaultdict

import numpy as np

from mtlsh.baselines import interleaving_distance, precision_recall, ted_oracle
from mtlsh.cli import build_trees, sign_trees
from mtlsh.datasets import balanced_tree, class_benchmark, random_merge_tree, random_small_tree
from mtlsh.field import ScalarField, compute_merge_tree, generate_moving_gaussian
from mtlsh.lsh import LshIndex, build_index, candidate_pairs, collision_probability
from mtlsh.signatures import (
    HashFamily, generate_subpaths, minhash, recursive_minhash, rmh_signature, ss_signature,
)
from mtlsh.tree import LabeledMergeTree, MergeTree

from oracles import canonical_tree, jaccard, sweep_merge_tree_1d


def _fit_exponent(xs, ts):
    return float(np.polyfit(np.log(xs), np.log(ts), 1)[0])


def _shape(lt):
    """Labeled unordered shape: equal iff the trees are identical for edit distance."""
    def enc(u):
        return (lt.node_labels[u], tuple(sorted(enc(c) for c in lt.tree.children[u])))
    return enc(lt.tree.root)


def _best_time(fn, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def test_1_permutation_worked_example(criterion):
    t0 = time.perf_counter()
    perms = [
        (3, 2, 4, 1, 5, 6, 7, 8, 9, 10),
        (4, 5, 3, 6, 8, 9, 10, 2, 1, 7),
        (1, 3, 5, 2, 4, 7, 9, 6, 8, 10),
        (1, 4, 7, 6, 5, 3, 8, 2, 9, 10),
    ]
    a, b, c, d, e = 1, 2, 3, 4, 5
    sets = [{a, b, c}, {b, e}, {d, e, a}]
    expected_first = [[3, 2, 4], [3, 5, 1], [1, 5, 1], [1, 5, 1]]  # h_i(S_j), row i
    expected = [3, 4, 3, 4, 3, 5, 1, 1, 1, 5, 1, 1, 1, 5, 1, 1]

    fam = HashFamily.from_permutations(perms)
    tree = MergeTree([3, 3, 3, -1], [0.0, 1.0, 2.0, 3.0])
    got = recursive_minhash(tree, [sorted(s) for s in sets] + [[]], fam).ravel().tolist()
    first = np.vstack([minhash(s, fam) for s in sets]).T.tolist()
    elapsed = time.perf_counter() - t0

    bad_first = [(i + 1, j + 1, first[i][j], expected_first[i][j])
                 for i in range(4) for j in range(3) if first[i][j] != expected_first[i][j]]
    ok = got == expected and not bad_first and elapsed < 1.0
    detail = f"signature {got}"
    if not ok:
        detail += (f" vs expected {expected}; first-level mismatches (i, j, got, expected): "
                   f"{bad_first}; {elapsed:.3f}s")
    criterion(1, ok, detail)
    assert ok


def test_2_minhash_jaccard_estimator(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    k = 2000
    fam = HashFamily(17, k)
    inside = 0
    for _ in range(1000):
        pool = rng.choice(10**6, size=120, replace=False)
        nc, na, nb = rng.integers(1, 41, size=3)
        core = pool[:nc]
        A = set(core.tolist()) | set(pool[40:40 + na].tolist())
        B = set(core.tolist()) | set(pool[80:80 + nb].tolist())
        s = jaccard(A, B, sorted(A | B))
        est = float(np.mean(minhash(A, fam) == minhash(B, fam)))
        inside += abs(est - s) < 3 * np.sqrt(s * (1 - s) / k)
    elapsed = time.perf_counter() - t0
    ok = inside >= 990 and elapsed < 30
    criterion(2, ok, f"{inside}/1000 pairs within 3 sigma (need 990), {elapsed:.1f}s")
    assert ok


def test_3_banding_curve(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    trials = 10_000
    worst = 0.0
    rows = []
    for s in (0.1, 0.5, 0.9):
        for r, b in ((1, 20), (2, 10), (4, 5)):
            k = r * b
            idx = LshIndex(k, r)
            x = rng.integers(0, 2**63, size=(trials, k), dtype=np.uint64)
            fresh = rng.integers(0, 2**63, size=(trials, k), dtype=np.uint64)
            y = np.where(rng.random((trials, k)) < s, x, fresh)
            for i in range(trials):
                idx.insert(2 * i, x[i])
                idx.insert(2 * i + 1, y[i])
            pairs = candidate_pairs(idx)
            freq = sum((2 * i, 2 * i + 1) in pairs for i in range(trials)) / trials
            gap = abs(freq - collision_probability(s, r, b))
            worst = max(worst, gap)
            rows.append(f"s={s} r={r} b={b}: {freq:.4f}")
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.02 and elapsed < 30
    criterion(3, ok, f"max |empirical - analytic| = {worst:.4f} (limit 0.02), {elapsed:.1f}s")
    assert ok, rows


def test_4_subpath_edit_distance_bound(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    checked, violations = 0, []
    for t in (2, 3):
        buckets = defaultdict(dict)
        while sum(len(v) * (len(v) - 1) // 2 for v in buckets.values()) < 300:
            tree = random_small_tree(int(rng.integers(2, 9)), rng, alphabet=2)
            key = frozenset(generate_subpaths(tree, t).counts().items())
            buckets[key].setdefault(_shape(tree), tree)
        candidates = [p for v in buckets.values() for p in itertools.combinations(v.values(), 2)]
        for i in rng.choice(len(candidates), size=100, replace=False):
            t1, t2 = candidates[i]
            assert generate_subpaths(t1, t) == generate_subpaths(t2, t)
            n = len(t1)
            bound = n - min(t - 1, t1.tree.height + 1)
            dist = ted_oracle(t1, t2)
            checked += 1
            if dist > bound:
                violations.append((t, n, dist, bound))
    elapsed = time.perf_counter() - t0
    ok = checked == 200 and not violations and elapsed < 60
    criterion(4, ok, f"{checked} pairs, {len(violations)} bound violations {violations[:5]}, "
                     f"{elapsed:.1f}s")
    assert ok


def test_5_moving_gaussian_clustering(criterion):
    t0 = time.perf_counter()
    phases = [{1, 11, 12}, {2, 3, 4, 8, 9, 10}, {5, 6, 7}]
    phase = {s - 1: i for i, p in enumerate(phases) for s in p}
    all_pairs = list(itertools.combinations(range(12), 2))
    within = [p for p in all_pairs if phase[p[0]] == phase[p[1]]]
    cross = [p for p in all_pairs if phase[p[0]] != phase[p[1]]]
    settings = {"RMH": dict(q=2, r=4), "SS": dict(k=8, t=4, r=4)}
    rates = {name: [0.0, 0.0] for name in settings}
    for seed in range(10):
        fields = generate_moving_gaussian(12, (64, 64), seed=seed)
        trees = build_trees(fields, "superlevel", 0.02, "euclidean")
        for name, kw in settings.items():
            kw = dict(kw)
            r = kw.pop("r")
            sigs = sign_trees(trees, name, seed=seed, **kw)
            pairs = candidate_pairs(build_index(list(enumerate(sigs)), r))
            rates[name][0] += sum(p in pairs for p in within) / len(within) / 10
            rates[name][1] += sum(p in pairs for p in cross) / len(cross) / 10
    elapsed = time.perf_counter() - t0
    ratios = {n: w / c if c else np.inf for n, (w, c) in rates.items()}
    ok = all(v >= 2 for v in ratios.values()) and elapsed < 60
    detail = ", ".join(f"{n} within {w:.3f} cross {c:.3f} ratio {ratios[n]:.2f}"
                       for n, (w, c) in rates.items())
    criterion(5, ok, f"{detail}, {elapsed:.1f}s")
    assert ok


def test_6_precision_recall_trend(criterion):
    t0 = time.perf_counter()
    rs = (1, 2, 4)
    sums = {f: np.zeros((len(rs), 2)) for f in ("SS", "RMH")}
    for seed in range(20):
        trees, classes = class_benchmark(5, 10, seed=seed)
        ss_fam = HashFamily(seed, 20)
        rmh_fam = HashFamily(seed, 4)  # q = 4 gives k = 16, the square nearest 20 from below
        sigs = {
            "SS": [ss_signature(t, 4, ss_fam) for t in trees],
            "RMH": [rmh_signature(t, rmh_fam) for t in trees],
        }
        for flavor, sg in sigs.items():
            for i, r in enumerate(rs):
                pairs = candidate_pairs(build_index(list(enumerate(sg)), r))
                sums[flavor][i] += precision_recall(pairs, classes)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 120
    parts = []
    for flavor, s in sums.items():
        mean = s / 20
        p, rec = mean[:, 0], mean[:, 1]
        ok &= bool(np.all(np.diff(p) >= 0) and np.all(np.diff(rec) <= 0))
        parts.append(f"{flavor} precision {np.round(p, 3).tolist()} recall {np.round(rec, 3).tolist()}")
    criterion(6, ok, "; ".join(parts) + f" over r=1,2,4, {elapsed:.1f}s")
    assert ok


def test_7_runtime_scaling(criterion):
    t0 = time.perf_counter()
    ns = [1_000, 3_000, 10_000, 30_000, 100_000]
    fam = HashFamily(0, 20)
    trees = {n: balanced_tree(n) for n in ns}
    ss_n = [_best_time(lambda: ss_signature(trees[n], 4, fam)) for n in ns]
    e_n = _fit_exponent(ns, ss_n)

    # k grid large enough that per-hash work, not per-node overhead, dominates
    base = balanced_tree(1023)
    qs = [16, 24, 32, 48, 64]
    ks = [q * q for q in qs]
    ss_k = [_best_time(lambda: ss_signature(base, 4, HashFamily(0, k))) for k in ks]
    rmh_k = [_best_time(lambda: rmh_signature(base, HashFamily(0, q))) for q in qs]
    e_ss_k = _fit_exponent(ks, ss_k)
    e_rmh_k = _fit_exponent(ks, rmh_k)
    elapsed = time.perf_counter() - t0
    ok = e_n <= 1.2 and e_ss_k <= 1.2 and e_rmh_k > 1.0 and elapsed < 300
    criterion(7, ok, f"SS vs n exponent {e_n:.2f} (<= 1.2), SS vs k {e_ss_k:.2f} (<= 1.2), "
                     f"RMH vs k {e_rmh_k:.2f} (> 1), {elapsed:.1f}s")
    assert ok


def test_8_baseline_correctness(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_triangle = -np.inf
    axioms = True
    for _ in range(500):
        n = int(rng.integers(1, 9))
        a, b, c = (random_merge_tree(n, rng, max_arity=3) for _ in range(3))
        ab, ba = interleaving_distance(a, b), interleaving_distance(b, a)
        bc, ac = interleaving_distance(b, c), interleaving_distance(a, c)
        axioms &= ab >= 0 and ab == ba and interleaving_distance(a, a) == 0
        worst_triangle = max(worst_triangle, ac - ab - bc)
    shift_err = 0.0
    for _ in range(100):
        t = random_merge_tree(int(rng.integers(1, 9)), rng)
        cshift = float(rng.uniform(-5, 5))
        moved = LabeledMergeTree(t.tree.with_values(np.array(t.tree.values) + cshift), t.node_labels)
        shift_err = max(shift_err, abs(interleaving_distance(t, moved) - abs(cshift)))

    fields = mismatches = 0
    for n in range(1, 9):
        for vals in itertools.product((0.0, 1.0, 2.0, 3.0, 4.0), repeat=n):
            tree = compute_merge_tree(ScalarField((n, 1, 1), (1.0, 1.0, 1.0), vals))
            fields += 1
            if canonical_tree(tree) != sweep_merge_tree_1d(vals):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = (axioms and worst_triangle <= 1e-12 and shift_err <= 1e-12 and mismatches == 0
          and elapsed < 120)
    criterion(8, ok, f"pseudometric axioms {'hold' if axioms else 'fail'}, worst triangle excess "
                     f"{worst_triangle:.2e}, shift error {shift_err:.2e}, {mismatches}/{fields} "
                     f"merge-tree mismatches, {elapsed:.1f}s")
    assert ok
