"""Set-optimization costs C_j = 1[j not in S] and their oracles.

When minimizing a weighted objective over the member set S is tractable,
the indicator cost admits MIN (and AMIN/SMIN given the matching set
oracle).  The concrete set oracles provided here serve network
reliability: minimum-weight connected spanning subgraph (MST after
contracting nonpositive edges) and minimum-weight disconnected subgraph
(global min-cut after deleting nonnegative edges).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from .core import DualWeights, MotError
from .oracles import AMIN, MIN, SMIN, StructuredCost


@dataclass(frozen=True)
class UGraph:
    """Undirected multigraph: vertex count plus an edge list (u, v)."""

    nv: int
    edges: tuple

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if u == v:
                raise MotError("self-loops are not allowed")
            if not (0 <= u < self.nv and 0 <= v < self.nv):
                raise MotError("edge endpoint out of range")
        object.__setattr__(self, "edges", edges)

    @property
    def ne(self) -> int:
        return len(self.edges)

    def is_connected(self, keep=None) -> bool:
        """Connectivity of (V, subset of E); ``keep`` is an edge-index mask."""
        g = nx.Graph()
        g.add_nodes_from(range(self.nv))
        for idx, (u, v) in enumerate(self.edges):
            if keep is None or keep[idx]:
                g.add_edge(u, v)
        return nx.is_connected(g) if self.nv else True


@dataclass
class SetOracle:
    """Weighted-minimization handles over an implicit member set S.

    ``min_fn(p)`` returns min over j in S of  -sum_i p[i, j_i]  exactly;
    ``amin_fn(p, eps)`` the same within eps; ``smin_fn(p, eta)`` its
    softmin.  ``contains(j)`` tests membership (used for pointwise cost
    evaluation).  Optional handles are None when unavailable.
    """

    n: int
    k: int
    min_fn: object = None
    amin_fn: object = None
    smin_fn: object = None
    contains: object = None


class SetOptCost(StructuredCost):
    """StructuredCost for C_j = 1[j not in S], served by a SetOracle."""

    def __init__(self, oracle: SetOracle):
        self.oracle = oracle
        self.n = oracle.n
        self.k = oracle.k
        self.cmax = 1.0
        caps = set()
        if oracle.min_fn is not None:
            caps |= {MIN, AMIN}
        elif oracle.amin_fn is not None:
            caps.add(AMIN)
        if oracle.smin_fn is not None:
            caps.add(SMIN)
        self.capabilities = frozenset(caps)

    def cost_entry(self, j) -> float:
        if self.oracle.contains is None:
            raise MotError("set oracle provides no membership test")
        return 0.0 if self.oracle.contains(tuple(j)) else 1.0

    def min_value(self, p: DualWeights) -> float:
        if self.oracle.min_fn is None:
            return super().min_value(p)
        return setopt_min(self, p)

    def amin(self, p: DualWeights, eps: float) -> float:
        if self.oracle.min_fn is not None:
            return setopt_min(self, p)
        if self.oracle.amin_fn is not None:
            return setopt_min(self, p, eps=eps)
        return super().amin(p, eps)

    def smin(self, p: DualWeights, eta: float) -> float:
        if self.oracle.smin_fn is None:
            return super().smin(p, eta)
        return setopt_smin(self, p, eta)


def setopt_min(c: SetOptCost, p: DualWeights, eps: float | None = None) -> float:
    """MIN for the indicator cost from the set oracle.

    a = best objective inside S (cost 0 there); x = best unconstrained
    weight sum (any tuple outside S pays cost 1).  Return a when it beats
    x, else the better of a and 1 + x.
    """
    if not p.is_finite():
        raise MotError("setopt MIN requires finite dual weights")
    if eps is None:
        a = float(c.oracle.min_fn(p.p))
    else:
        a = float(c.oracle.amin_fn(p.p, eps))
    x = float(-p.p.max(axis=1).sum())
    return a if a <= x else min(a, 1.0 + x)


def setopt_smin(c: SetOptCost, p: DualWeights, eta: float) -> float:
    """SMIN for the indicator cost from the set SMIN oracle (log domain).

    With x = sum over all tuples of e^{eta . sum p} and a = the same sum
    restricted to S, the full softmin mixes a at weight (1 - e^{-eta})
    with x at weight e^{-eta}.
    """
    if eta <= 0:
        raise MotError("SMIN requires eta > 0")
    with np.errstate(divide="ignore"):
        log_x = float(sum(logsumexp(eta * p.p[i]) for i in range(c.k)))
    s_set = float(c.oracle.smin_fn(p.p, eta))
    log_a = -eta * s_set
    log_total = np.logaddexp(log_x - eta, np.log1p(-np.exp(-eta)) + log_a)
    return float(-log_total / eta)


# ---------------------------------------------------------------------------
# reliability set oracles


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def min_weight_connected_subgraph(g: UGraph, x) -> float:
    """min over spanning-connected H of sum_{e in H} x_e.

    Nonpositive edges join every optimum; contract them and complete the
    remainder with a minimum spanning tree over the positive weights.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != g.ne:
        raise MotError("weight count does not match edge count")
    if not g.is_connected():
        raise MotError("graph is disconnected: no connected subgraph exists")
    uf = _UnionFind(g.nv)
    total = 0.0
    for idx, (u, v) in enumerate(g.edges):
        if x[idx] <= 0:
            total += x[idx]
            uf.union(u, v)
    h = nx.Graph()
    h.add_nodes_from({uf.find(v) for v in range(g.nv)})
    for idx, (u, v) in enumerate(g.edges):
        if x[idx] > 0:
            a, b = uf.find(u), uf.find(v)
            if a == b:
                continue
            if not h.has_edge(a, b) or h[a][b]["weight"] > x[idx]:
                h.add_edge(a, b, weight=x[idx])  # cheapest parallel edge
    mst = nx.minimum_spanning_tree(h)
    return total + float(sum(w for _, _, w in mst.edges(data="weight")))


def min_weight_disconnected_subgraph(g: UGraph, x) -> float:
    """min over disconnected H of sum_{e in H} x_e.

    Nonnegative edges never help; take all negative edges and, if that is
    still connected, pay for the cheapest cut (weights -x_e) to break it.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != g.ne:
        raise MotError("weight count does not match edge count")
    if g.nv < 2:
        raise MotError("no disconnected subgraph exists on fewer than 2 vertices")
    neg = x < 0
    total_neg = float(x[neg].sum())
    if not g.is_connected(keep=neg):
        return total_neg
    sub = UGraph(g.nv, [e for idx, e in enumerate(g.edges) if neg[idx]])
    cut_value, _ = stoer_wagner_mincut(sub, -x[neg])
    return total_neg + cut_value


def stoer_wagner_mincut(g: UGraph, w) -> tuple[float, list]:
    """Global minimum cut under positive edge weights (parallel edges summed)."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != g.ne:
        raise MotError("weight count does not match edge count")
    if g.nv < 2:
        raise MotError("min cut needs at least two vertices")
    if np.any(w <= 0):
        raise MotError("min cut requires positive weights")
    h = nx.Graph()
    h.add_nodes_from(range(g.nv))
    for idx, (u, v) in enumerate(g.edges):
        if h.has_edge(u, v):
            h[u][v]["weight"] += w[idx]
        else:
            h.add_edge(u, v, weight=w[idx])
    if not nx.is_connected(h):
        comp = min(nx.connected_components(h), key=min)
        return 0.0, sorted(comp)
    value, (side, _) = nx.stoer_wagner(h)
    return float(value), sorted(side)
