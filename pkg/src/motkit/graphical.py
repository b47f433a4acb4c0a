"""Graphical-structure costs: C decomposes as a sum of local factors.

A cost with scopes of bounded junction-tree width admits polynomial-time
oracles: MIN/ARGMIN by min-sum message passing (the mode of a graphical
model) and SMIN by sum-product message passing in the log domain (its
partition function).  The junction tree is built with the min-fill
elimination heuristic and verified against the running-intersection
property; a width cap refuses silently-exponential instances.

Variable indices are 0-based; factor tables are dense over their scope
in row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from .core import DualWeights, MotError, TreewidthCapError
from .oracles import AMIN, ARGMIN, MIN, SMIN, OracleAnswerArg, StructuredCost

DEFAULT_WIDTH_CAP = 6


@dataclass(frozen=True)
class Factor:
    """A local cost term f_S over a sorted scope of variables."""

    scope: tuple
    table: np.ndarray

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        if len(scope) < 1 or len(set(scope)) != len(scope):
            raise MotError("factor scope must be a nonempty set of variables")
        if list(scope) != sorted(scope):
            raise MotError("factor scope must be sorted")
        table = np.asarray(self.table, dtype=float)
        if table.ndim != len(scope):
            raise MotError("factor table rank must equal scope size")
        if not np.all(np.isfinite(table)):
            raise MotError("factor tables must be finite")
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "table", table)


@dataclass(frozen=True)
class JunctionTree:
    bags: tuple          # tuple of sorted var tuples
    edges: tuple         # tree edges (bag index pairs)
    factor_bag: tuple    # factor index -> bag index
    width: int

    def neighbors(self):
        adj = {u: [] for u in range(len(self.bags))}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj


def _min_fill_order(graph: nx.Graph):
    """Elimination order by the min-fill heuristic; ties to smallest index."""
    g = graph.copy()
    order = []
    cliques = []
    while g.number_of_nodes():
        best, best_fill = None, None
        for v in sorted(g.nodes):
            nbrs = list(g.neighbors(v))
            fill = sum(1 for i, a in enumerate(nbrs) for b in nbrs[i + 1:]
                       if not g.has_edge(a, b))
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = list(g.neighbors(best))
        cliques.append(tuple(sorted([best] + nbrs)))
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                g.add_edge(a, b)
        g.remove_node(best)
        order.append(best)
    return order, cliques


def build_junction_tree(scopes, k: int, width_cap: int = DEFAULT_WIDTH_CAP) -> JunctionTree:
    """Min-fill elimination -> cliques -> maximum spanning tree on overlaps."""
    scopes = [tuple(sorted(int(v) for v in s)) for s in scopes]
    if not scopes:
        raise MotError("at least one scope is required")
    covered = set()
    for s in scopes:
        if not s or min(s) < 0 or max(s) >= k:
            raise MotError(f"scope {s} out of range for k={k}")
        covered.update(s)
    if covered != set(range(k)):
        raise MotError("scopes must cover every variable")

    graph = nx.Graph()
    graph.add_nodes_from(range(k))
    for s in scopes:
        for i, a in enumerate(s):
            for b in s[i + 1:]:
                graph.add_edge(a, b)
    _, cliques = _min_fill_order(graph)

    # keep maximal cliques only: largest first, drop subsets (deterministic order)
    bags = []
    for c in sorted(set(cliques), key=lambda c: (-len(c), c)):
        if not any(set(c) <= set(b) for b in bags):
            bags.append(c)
    bags.sort()
    width = max(len(b) for b in bags) - 1
    if width > width_cap:
        raise TreewidthCapError(f"junction tree width {width} exceeds cap {width_cap}")

    tree = nx.Graph()
    tree.add_nodes_from(range(len(bags)))
    for u in range(len(bags)):
        for v in range(u + 1, len(bags)):
            tree.add_edge(u, v, weight=len(set(bags[u]) & set(bags[v])))
    mst = nx.maximum_spanning_tree(tree) if len(bags) > 1 else tree
    edges = tuple(sorted(tuple(sorted(e)) for e in mst.edges))

    factor_bag = []
    for s in scopes:
        home = next((b for b, bag in enumerate(bags) if set(s) <= set(bag)), None)
        if home is None:
            raise MotError(f"no bag contains scope {s}")  # cannot happen
        factor_bag.append(home)

    jt = JunctionTree(tuple(bags), edges, tuple(factor_bag), width)
    _verify_running_intersection(jt, k)
    return jt


def _verify_running_intersection(jt: JunctionTree, k: int) -> None:
    adj = jt.neighbors()
    for var in range(k):
        holders = [b for b, bag in enumerate(jt.bags) if var in bag]
        if not holders:
            raise MotError(f"variable {var} appears in no bag")
        # BFS within the holder-induced subgraph must reach every holder
        seen = {holders[0]}
        stack = [holders[0]]
        holder_set = set(holders)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v in holder_set and v not in seen:
                    seen.add(v)
                    stack.append(v)
        if seen != holder_set:
            raise MotError(f"running intersection violated for variable {var}")


def _embed(table: np.ndarray, scope, bag_vars, n: int) -> np.ndarray:
    """View a table over ``scope`` as broadcastable over sorted ``bag_vars``."""
    pos = {v: a for a, v in enumerate(bag_vars)}
    perm = sorted(range(len(scope)), key=lambda a: pos[scope[a]])
    t = np.transpose(table, perm) if len(scope) > 1 else table
    shape = [n if v in set(scope) else 1 for v in bag_vars]
    return t.reshape(shape)


class GraphicalCost(StructuredCost):
    """StructuredCost over C_j = sum_S f_S(j_S), oracle-served via a junction tree."""

    capabilities = frozenset({MIN, ARGMIN, AMIN, SMIN})

    def __init__(self, n: int, k: int, factors, width_cap: int = DEFAULT_WIDTH_CAP):
        self.n = int(n)
        self.k = int(k)
        self.factors = [f if isinstance(f, Factor) else Factor(*f) for f in factors]
        for f in self.factors:
            if f.table.shape != (self.n,) * len(f.scope):
                raise MotError(f"factor table shape {f.table.shape} does not match n={n}")
        self.jt = build_junction_tree([f.scope for f in self.factors], self.k, width_cap)
        self.cmax = float(sum(np.abs(f.table).max() for f in self.factors))
        # static per-bag sums of assigned factor tables
        self._static = []
        for b, bag in enumerate(self.jt.bags):
            tab = np.zeros((self.n,) * len(bag))
            for fi, f in enumerate(self.factors):
                if self.jt.factor_bag[fi] == b:
                    tab = tab + _embed(f.table, f.scope, bag, self.n)
            self._static.append(tab)
        # unary of variable v is absorbed into the first bag containing v
        self._unary_bag = [next(b for b, bag in enumerate(self.jt.bags) if v in bag)
                           for v in range(self.k)]
        self._adj = self.jt.neighbors()

    # -- pointwise cost -----------------------------------------------------
    def cost_entry(self, j) -> float:
        j = tuple(j)
        return float(sum(f.table[tuple(j[v] for v in f.scope)] for f in self.factors))

    # -- message passing core ----------------------------------------------
    def _bag_tables(self, scale: float, unaries: np.ndarray):
        """scale * static factor sums plus per-variable unary rows."""
        tables = []
        for b, bag in enumerate(self.jt.bags):
            tab = scale * self._static[b] if scale != 1.0 else self._static[b].copy()
            for v in bag:
                if self._unary_bag[v] == b:
                    tab = tab + _embed(unaries[v], (v,), bag, self.n)
            tables.append(tab)
        return tables

    def _upward(self, tables, reduce_lse: bool, target_var: int | None):
        """One rooted collect pass; returns root belief reduced to the
        target variable's axis (or to a scalar if target_var is None)."""
        nbags = len(self.jt.bags)
        if target_var is None:
            root = 0
        else:
            root = self._unary_bag[target_var]
        order, parent = [root], {root: None}
        for u in order:
            for v in self._adj[u]:
                if v not in parent:
                    parent[v] = u
                    order.append(v)

        def reduce_axes(tab, axes):
            if not axes:
                return tab
            if reduce_lse:
                return logsumexp(tab, axis=tuple(axes))
            return np.min(tab, axis=tuple(axes))

        msgs = {}
        for u in reversed(order):
            tab = tables[u]
            for v in self._adj[u]:
                if v != parent[u]:
                    sep_vars, msg = msgs[v]
                    tab = tab + _embed(msg, sep_vars, self.jt.bags[u], self.n)
            if parent[u] is None:
                bag = self.jt.bags[u]
                if target_var is None:
                    return float(reduce_axes(tab, list(range(len(bag)))))
                keep = bag.index(target_var)
                axes = [a for a in range(len(bag)) if a != keep]
                return reduce_axes(tab, axes)
            bag = self.jt.bags[u]
            pbag = set(self.jt.bags[parent[u]])
            sep = tuple(v for v in bag if v in pbag)
            axes = [a for a, v in enumerate(bag) if v not in pbag]
            msgs[u] = (sep, reduce_axes(tab, axes))
        raise MotError("empty junction tree")  # unreachable

    # -- oracles ------------------------------------------------------------
    def min_value(self, p: DualWeights) -> float:
        if not p.is_finite():
            raise MotError("MIN requires finite dual weights")
        unaries = -p.p
        return float(self._upward(self._bag_tables(1.0, unaries), False, None))

    def argmin(self, p: DualWeights) -> OracleAnswerArg:
        """Exact minimizer, lexicographically smallest among ties.

        Conditions the variables one at a time: the min-marginal of the
        current variable is computed by a rooted min-sum pass, the smallest
        atom attaining the global minimum is fixed via a +inf mask, and the
        pass repeats for the next variable (k passes total).
        """
        if not p.is_finite():
            raise MotError("ARGMIN requires finite dual weights")
        unaries = -p.p.copy()
        value = None
        chosen = []
        for s in range(self.k):
            margs = self._upward(self._bag_tables(1.0, unaries), False, s)
            m = float(np.min(margs))
            if value is None:
                value = m
            tol = 1e-9 * (1.0 + abs(value))
            if m < value - tol - 1e-6:
                raise MotError("min-marginal dropped below the global minimum")
            j = int(np.flatnonzero(margs <= value + tol)[0])
            chosen.append(j)
            mask = np.full(self.n, np.inf)
            mask[j] = 0.0
            unaries[s] = unaries[s] + mask
        jt = tuple(chosen)
        direct = self.cost_entry(jt) - float(sum(p.p[i, jt[i]] for i in range(self.k)))
        return OracleAnswerArg(jt, direct)

    def amin(self, p: DualWeights, eps: float) -> float:
        return self.min_value(p)  # exact answer is a valid approximation

    def smin(self, p: DualWeights, eta: float) -> float:
        if eta <= 0:
            raise MotError("SMIN requires eta > 0")
        unaries = eta * p.p  # +eta p_i in the log-domain potential
        logz = self._upward(self._bag_tables(-eta, unaries), True, None)
        return -logz / eta


def graphical_from_json(obj) -> GraphicalCost:
    """Build from {"n":…, "k":…, "factors":[{"scope":[…], "table":[…]}]}.

    Scope indices are 0-based; tables are flat row-major over the scope.
    """
    try:
        n, k = int(obj["n"]), int(obj["k"])
        factors = []
        for f in obj["factors"]:
            scope = tuple(int(v) for v in f["scope"])
            table = np.asarray(f["table"], dtype=float).reshape((n,) * len(scope))
            factors.append(Factor(scope, table))
    except (KeyError, TypeError, ValueError) as exc:
        raise MotError(f"invalid graphical cost payload: {exc}") from exc
    return GraphicalCost(n, k, factors)
