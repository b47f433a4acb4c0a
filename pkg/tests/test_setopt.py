"""Set-optimization oracles and the reliability subgraph primitives."""

import itertools

import numpy as np
import pytest

from motkit.core import DenseTensor, DualWeights, MotError
from motkit.oracles import argmin_dense, min_dense, oracle_argmin, smin_dense
from motkit.setopt import (
    SetOptCost,
    SetOracle,
    UGraph,
    min_weight_connected_subgraph,
    min_weight_disconnected_subgraph,
    setopt_min,
    setopt_smin,
    stoer_wagner_mincut,
)


def explicit_oracle(n, k, members):
    """Enumeration-backed set oracle over an explicit member set."""
    members = [tuple(j) for j in members]

    def min_fn(p):
        return min(-sum(p[i, j[i]] for i in range(k)) for j in members)

    def smin_fn(p, eta):
        vals = [-sum(p[i, j[i]] for i in range(k)) for j in members]
        vals = np.asarray(vals)
        shift = vals.min()
        return shift - np.log(np.exp(-eta * (vals - shift)).sum()) / eta

    return SetOracle(n=n, k=k, min_fn=min_fn, smin_fn=smin_fn,
                     contains=lambda j: tuple(j) in set(members))


def indicator_tensor(n, k, members):
    vals = np.ones((n,) * k)
    for j in members:
        vals[tuple(j)] = 0.0
    return DenseTensor(n, k, vals)


class TestSetoptMin:
    def test_zero_weights(self):
        c = SetOptCost(explicit_oracle(2, 2, [(0, 1)]))
        assert setopt_min(c, DualWeights.zeros(2, 2)) == 0.0

    def test_far_member_capped_by_outside_tuple(self):
        # member (1,1) scores 10 under these weights; the best non-member
        # tuple pays cost 1 for objective 1
        c = SetOptCost(explicit_oracle(2, 2, [(1, 1)]))
        p = DualWeights(np.array([[0.0, -5.0], [0.0, -5.0]]))
        assert setopt_min(c, p) == pytest.approx(1.0)

    def test_full_set_returns_x(self):
        full = list(itertools.product(range(2), repeat=3))
        c = SetOptCost(explicit_oracle(2, 3, full))
        rng = np.random.default_rng(40)
        p = DualWeights(rng.normal(size=(3, 2)))
        assert setopt_min(c, p) == pytest.approx(-p.p.max(axis=1).sum())

    def test_matches_enumeration_randomized(self):
        rng = np.random.default_rng(41)
        for _ in range(60):
            k = int(rng.integers(2, 6))
            all_tuples = list(itertools.product(range(2), repeat=k))
            size = int(rng.integers(1, 2 ** k))
            members = [all_tuples[i] for i in
                       rng.choice(len(all_tuples), size=size, replace=False)]
            c = SetOptCost(explicit_oracle(2, k, members))
            t = indicator_tensor(2, k, members)
            p = DualWeights(rng.normal(size=(k, 2)))
            assert setopt_min(c, p) == pytest.approx(min_dense(t, p), abs=1e-9)

    def test_argmin_via_reduction(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            k = 3
            all_tuples = list(itertools.product(range(2), repeat=k))
            members = [all_tuples[i] for i in rng.choice(8, size=3, replace=False)]
            c = SetOptCost(explicit_oracle(2, k, members))
            t = indicator_tensor(2, k, members)
            p = DualWeights(rng.normal(size=(k, 2)))
            ans = oracle_argmin(c, p)
            ref = argmin_dense(t, p)
            assert ans.value == pytest.approx(ref.value, abs=1e-9)
            assert ans.tuple == ref.tuple


class TestSetoptSmin:
    def test_single_member_hand_value(self):
        c = SetOptCost(explicit_oracle(2, 2, [(0, 0)]))
        got = setopt_smin(c, DualWeights.zeros(2, 2), eta=1.0)
        assert got == pytest.approx(-np.log(1 + 3 * np.exp(-1.0)))

    def test_full_set_equals_plain_softmin(self):
        full = list(itertools.product(range(2), repeat=2))
        c = SetOptCost(explicit_oracle(2, 2, full))
        rng = np.random.default_rng(43)
        p = DualWeights(rng.normal(size=(2, 2)))
        t = DenseTensor(2, 2, np.zeros((2, 2)))
        assert setopt_smin(c, p, 1.7) == pytest.approx(smin_dense(t, p, 1.7), abs=1e-9)

    def test_matches_enumeration_randomized(self):
        rng = np.random.default_rng(44)
        for _ in range(40):
            k = int(rng.integers(2, 4))
            all_tuples = list(itertools.product(range(2), repeat=k))
            size = int(rng.integers(1, 2 ** k))
            members = [all_tuples[i] for i in
                       rng.choice(len(all_tuples), size=size, replace=False)]
            c = SetOptCost(explicit_oracle(2, k, members))
            t = indicator_tensor(2, k, members)
            p = DualWeights(rng.normal(size=(k, 2)))
            eta = float(rng.uniform(0.2, 4.0))
            assert setopt_smin(c, p, eta) == pytest.approx(
                smin_dense(t, p, eta), abs=1e-9)


def enumerate_subgraph_min(g, x, want_connected):
    best = np.inf
    for keep in itertools.product([False, True], repeat=g.ne):
        if g.is_connected(keep=keep) == want_connected:
            best = min(best, sum(x[i] for i in range(g.ne) if keep[i]))
    return best


class TestSubgraphOracles:
    def test_triangle_mst(self):
        g = UGraph(3, [(0, 1), (1, 2), (0, 2)])
        assert min_weight_connected_subgraph(g, [1.0, 1.0, 1.0]) == pytest.approx(2.0)

    def test_all_nonpositive_takes_everything(self):
        g = UGraph(3, [(0, 1), (1, 2), (0, 2)])
        assert min_weight_connected_subgraph(g, [-1.0, -2.0, 0.0]) == pytest.approx(-3.0)

    def test_path_forced_positive_edge(self):
        g = UGraph(3, [(0, 1), (1, 2)])
        assert min_weight_connected_subgraph(g, [-1.0, 3.0]) == pytest.approx(2.0)

    def test_disconnected_all_nonnegative(self):
        g = UGraph(3, [(0, 1), (1, 2)])
        assert min_weight_disconnected_subgraph(g, [0.5, 1.0]) == pytest.approx(0.0)

    def test_disconnected_path_negative(self):
        g = UGraph(3, [(0, 1), (1, 2)])
        assert min_weight_disconnected_subgraph(g, [-1.0, -1.0]) == pytest.approx(-1.0)

    def test_disconnected_triangle(self):
        g = UGraph(3, [(0, 1), (1, 2), (0, 2)])
        assert min_weight_disconnected_subgraph(g, [-3.0, -1.0, -1.0]) == pytest.approx(-3.0)

    def test_errors(self):
        with pytest.raises(MotError):
            min_weight_connected_subgraph(UGraph(3, [(0, 1)]), [1.0])
        with pytest.raises(MotError):
            min_weight_disconnected_subgraph(UGraph(1, []), [])

    def test_matches_enumeration_randomized(self):
        rng = np.random.default_rng(45)
        trials = 0
        while trials < 40:
            nv = int(rng.integers(2, 5))
            ne = int(rng.integers(1, 8))
            edges = []
            for _ in range(ne):
                u, v = rng.choice(nv, size=2, replace=False)
                edges.append((int(u), int(v)))
            g = UGraph(nv, edges)
            x = rng.normal(size=ne) * 2
            if g.is_connected():
                got = min_weight_connected_subgraph(g, x)
                want = enumerate_subgraph_min(g, x, want_connected=True)
                assert got == pytest.approx(want, abs=1e-9)
            got = min_weight_disconnected_subgraph(g, x)
            want = enumerate_subgraph_min(g, x, want_connected=False)
            assert got == pytest.approx(want, abs=1e-9)
            trials += 1


class TestStoerWagner:
    def test_two_vertices(self):
        value, side = stoer_wagner_mincut(UGraph(2, [(0, 1)]), [5.0])
        assert value == pytest.approx(5.0)
        assert side in ([0], [1])

    def test_triangle(self):
        g = UGraph(3, [(0, 1), (1, 2), (0, 2)])
        value, _ = stoer_wagner_mincut(g, [3.0, 1.0, 1.0])
        assert value == pytest.approx(2.0)

    def test_four_cycle(self):
        g = UGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        value, _ = stoer_wagner_mincut(g, [1.0, 1.0, 1.0, 1.0])
        assert value == pytest.approx(2.0)

    def test_parallel_edges_aggregate(self):
        g = UGraph(2, [(0, 1), (0, 1)])
        value, _ = stoer_wagner_mincut(g, [1.0, 2.5])
        assert value == pytest.approx(3.5)

    def test_disconnected_returns_zero(self):
        g = UGraph(3, [(0, 1)])
        value, side = stoer_wagner_mincut(g, [1.0])
        assert value == 0.0
        assert side == [2] or set(side) == {0, 1}
