import itertools

import numpy as np
import pytest

from amfkit.cluster import (
    correlation_distance,
    cut_prototypes,
    distance_matrix,
    minimax_cluster,
)
from amfkit.errors import (
    DegenerateSeries,
    InsufficientOverlap,
    InvalidDistance,
)


def random_distance(rng, n):
    a = rng.random((n, n))
    d = (a + a.T) / 2
    np.fill_diagonal(d, 0.0)
    return d


def brute_minimax(dist, members):
    """Literal evaluation of the minimax radius over every candidate center."""
    best = None
    for x in members:
        worst = max(dist[x, y] for y in members)
        if best is None or worst < best[0] or (worst == best[0] and x < best[1]):
            best = (worst, x)
    return best


class TestCorrelationDistance:
    def test_identical_series(self):
        a = np.random.default_rng(0).standard_normal(30)
        assert correlation_distance(a, a) == pytest.approx(0.0, abs=1e-14)

    def test_negated_series(self):
        a = np.random.default_rng(1).standard_normal(30)
        assert correlation_distance(a, -a) == pytest.approx(0.0, abs=1e-14)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = rng.standard_normal(40)
            b = 0.6 * a + rng.standard_normal(40)
            ma, mb = sum(a) / 40, sum(b) / 40
            cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
            va = sum((x - ma) ** 2 for x in a)
            vb = sum((y - mb) ** 2 for y in b)
            oracle = 1 - abs(cov / (va * vb) ** 0.5)
            assert correlation_distance(a, b) == pytest.approx(oracle, abs=1e-12)

    def test_pairwise_complete_over_masks(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(60)
        b = 0.8 * a + 0.3 * rng.standard_normal(60)
        a_masked, b_masked = a.copy(), b.copy()
        a_masked[:10] = np.nan
        b_masked[50:] = np.nan
        expected = correlation_distance(a[10:50], b[10:50])
        assert correlation_distance(a_masked, b_masked) == pytest.approx(expected, abs=1e-14)

    def test_zero_variance(self):
        with pytest.raises(DegenerateSeries):
            correlation_distance(np.ones(10), np.arange(10.0))

    def test_insufficient_overlap(self):
        a = np.full(10, np.nan)
        a[:2] = 1.0
        with pytest.raises(InsufficientOverlap):
            correlation_distance(a, np.arange(10.0))


class TestMinimaxCluster:
    def test_two_points(self):
        tree = minimax_cluster(["a", "b"], np.array([[0.0, 0.3], [0.3, 0.0]]))
        merge = tree.merges[0]
        assert merge.height == 0.3
        assert merge.prototype == 0  # lowest index wins the tie

    def test_three_point_first_merge(self):
        d = np.array([[0, 0.1, 0.3], [0.1, 0, 0.2], [0.3, 0.2, 0]])
        tree = minimax_cluster(["x", "y", "z"], d)
        assert set(tree.merges[0].members) == {0, 1}
        assert tree.merges[0].height == 0.1
        # union radius: center y reaches everything within 0.2
        assert tree.merges[1].height == 0.2
        assert tree.merges[1].prototype == 1

    def test_matches_exhaustive_search_small(self):
        rng = np.random.default_rng(4)
        for n in (3, 4, 5, 6, 7):
            for _ in range(8):
                d = random_distance(rng, n)
                tree = minimax_cluster([str(i) for i in range(n)], d)
                # replay agglomeration with an independent brute-force step
                clusters = {i: (i,) for i in range(n)}
                for step, merge in enumerate(tree.merges):
                    best = None
                    for a, b in itertools.combinations(sorted(clusters), 2):
                        u = tuple(sorted(clusters[a] + clusters[b]))
                        r, proto = brute_minimax(d, u)
                        lo, hi = sorted((min(clusters[a]), min(clusters[b])))
                        key = (r, lo, hi)
                        if best is None or key < best[0]:
                            best = (key, a, b, u, r, proto)
                    _, a, b, u, r, proto = best
                    assert merge.height == pytest.approx(r, abs=1e-12)
                    assert tuple(merge.members) == u
                    assert merge.prototype == proto
                    del clusters[a], clusters[b]
                    clusters[n + step] = u

    def test_no_inversions_random(self):
        rng = np.random.default_rng(5)
        for n in (10, 25, 60, 200):
            d = random_distance(rng, n)
            tree = minimax_cluster([str(i) for i in range(n)], d)
            heights = [m.height for m in tree.merges]
            assert all(h2 >= h1 - 1e-15 for h1, h2 in zip(heights, heights[1:]))

    def test_prototype_attains_minimax_radius(self):
        rng = np.random.default_rng(6)
        d = random_distance(rng, 50)
        tree = minimax_cluster([str(i) for i in range(50)], d)
        for merge in tree.merges:
            r, proto = brute_minimax(d, merge.members)
            assert merge.height == pytest.approx(r, abs=1e-12)
            assert merge.prototype == proto

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        d = random_distance(rng, 20)
        t1 = minimax_cluster([str(i) for i in range(20)], d)
        t2 = minimax_cluster([str(i) for i in range(20)], d)
        assert t1 == t2

    @pytest.mark.parametrize(
        "matrix",
        [
            np.array([[0.0, 0.5], [0.4, 0.0]]),        # asymmetric
            np.array([[0.0, -0.1], [-0.1, 0.0]]),      # negative
            np.array([[0.1, 0.5], [0.5, 0.0]]),        # nonzero diagonal
            np.array([[0.0, 1.5], [1.5, 0.0]]),        # above 1
        ],
    )
    def test_invalid_distance(self, matrix):
        with pytest.raises(InvalidDistance):
            minimax_cluster(["a", "b"], matrix)


class TestCutPrototypes:
    def _tree(self, rng, n=12):
        return minimax_cluster([f"s{i}" for i in range(n)], random_distance(rng, n))

    def test_threshold_above_max_height(self):
        tree = self._tree(np.random.default_rng(8))
        heights = [m.height for m in tree.merges]
        ps = cut_prototypes(tree, min(max(heights) + 0.01, 0.999))
        if max(heights) < 0.999:
            assert len(ps) == 1

    def test_threshold_below_min_height(self):
        tree = self._tree(np.random.default_rng(9))
        eps = tree.merges[0].height / 2
        ps = cut_prototypes(tree, eps)
        assert len(ps) == tree.n_leaves
        assert all(ps.assignment[leaf] == leaf for leaf in tree.leaves)

    def test_two_block_structure(self):
        rng = np.random.default_rng(10)
        n = 120
        f1, f2 = rng.standard_normal(n), rng.standard_normal(n)
        cols = []
        for k in range(4):
            cols.append(f1 + 0.25 * rng.standard_normal(n))
        for k in range(4):
            cols.append(f2 + 0.25 * rng.standard_normal(n))
        series = np.column_stack(cols)
        names = [f"b{k}" for k in range(8)]
        tree = minimax_cluster(names, distance_matrix(series))
        ps = cut_prototypes(tree, 0.5)
        assert len(ps) == 2
        groups = {m: set() for m in ps.members}
        for leaf, proto in ps.assignment.items():
            groups[proto].add(leaf)
        blocks = sorted(frozenset(g) for g in groups.values())
        assert {frozenset({"b0", "b1", "b2", "b3"}), frozenset({"b4", "b5", "b6", "b7"})} == set(blocks)

    def test_radius_bound_within_threshold(self):
        rng = np.random.default_rng(11)
        d = random_distance(rng, 15)
        names = [f"s{i}" for i in range(15)]
        tree = minimax_cluster(names, d)
        ps = cut_prototypes(tree, 0.5)
        for leaf, proto in ps.assignment.items():
            i, j = names.index(leaf), names.index(proto)
            assert d[i, j] <= 0.5 + 1e-12

    def test_invalid_threshold(self):
        tree = self._tree(np.random.default_rng(12))
        with pytest.raises(ValueError):
            cut_prototypes(tree, 0.0)
