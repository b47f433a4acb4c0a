"""Problem builders and drivers for the showcase applications.

Four applications, each mapping a domain problem onto a structured cost
and an engine: generalized Euler flows (pairwise squared distances along
a time cycle -> graphical cost, treewidth 2), network reliability under
correlation uncertainty (connectivity indicator -> set-optimization cost
with graph oracles), worst-case risk estimation (compounded returns ->
low-rank cost), and Frank-Wolfe projection of a low-rank-plus-sparse
tensor onto the transportation polytope (LP steps served by MWU).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import (
    SolveReport,
    colgen_solve,
    mwu_round,
    mwu_solve,
    sinkhorn_solve,
)
from .core import Marginals, MotError, SparsePlan, plan_cost
from .graphical import GraphicalCost
from .lowrank import LowRankFactors, LowRankPlusSparseCost, SparseComponent
from .setopt import (
    SetOptCost,
    SetOracle,
    UGraph,
    min_weight_connected_subgraph,
    min_weight_disconnected_subgraph,
)

__all__ = [
    "EulerFlowProblem",
    "build_euler_flow_cost",
    "euler_flow_marginals",
    "euler_flow_maps",
    "euler_sigma",
    "euler_grid_problem",
    "ReliabilityProblem",
    "ReliabilityResult",
    "network_reliability",
    "RiskProblem",
    "build_risk_cost",
    "risk_solve",
    "worst_case_profit",
    "ProjectionProblem",
    "FwResult",
    "fw_project",
]


# ---------------------------------------------------------------------------
# generalized Euler flows


@dataclass(frozen=True)
class EulerFlowProblem:
    """Incompressible-flow benchmark: n sites, k timesteps, end map sigma.

    ``sigma`` maps site indices at time 1 to target sites at time k; it
    must be a bijection unless ``allow_non_bijective`` is set (the
    double-cover benchmark map folds the interval and is 2-to-1 on any
    grid, so it cannot satisfy the default invariant).
    """

    points: np.ndarray           # (n, d) site coordinates
    sigma: tuple                 # index map on [n]
    k: int
    allow_non_bijective: bool = False

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise MotError("points must be an (n, d) array with d >= 1")
        sigma = tuple(int(s) for s in self.sigma)
        n = pts.shape[0]
        if len(sigma) != n or any(not 0 <= s < n for s in sigma):
            raise MotError("sigma must map [n] into [n]")
        if not self.allow_non_bijective and len(set(sigma)) != n:
            raise MotError("sigma must be a bijection")
        if self.k < 2 or n < 2:
            raise MotError("euler flow requires n >= 2 and k >= 2")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.points.shape[0]


def build_euler_flow_cost(pr: EulerFlowProblem) -> GraphicalCost:
    """Cycle-structured graphical cost: consecutive-time squared
    distances plus the sigma-twisted closing factor between times 1 and k
    (junction tree width 2)."""
    n, k = pr.n, pr.k
    diff = pr.points[:, None, :] - pr.points[None, :, :]
    sq = (diff ** 2).sum(axis=-1)            # sq[a, b] = ||x_a - x_b||^2
    factors = [((t, t + 1), sq) for t in range(k - 1)]
    factors.append(((0, k - 1), sq[list(pr.sigma), :]))
    return GraphicalCost(n, k, factors)


def euler_flow_marginals(pr: EulerFlowProblem) -> Marginals:
    return Marginals.uniform(pr.n, pr.k)


def euler_flow_maps(plan: SparsePlan, k: int) -> np.ndarray:
    """Per-timestep pairwise transport maps from a sparse plan.

    Returns a (k, n, n) array: slice t < k-1 is the (t, t+1) pairwise
    marginal; slice k-1 couples time k back to time 1 (the cycle edge).
    """
    n = plan.n
    maps = np.zeros((k, n, n))
    for jt, v in plan.entries():
        for t in range(k - 1):
            maps[t, jt[t], jt[t + 1]] += v
        maps[k - 1, jt[k - 1], jt[0]] += v
    return maps


def euler_sigma(spec, n: int) -> tuple:
    """Benchmark end maps on the periodic grid x_j = j / n.

    shift-half: x -> x + 1/2 mod 1 (nearest grid shift for odd n);
    double-cover: x -> min(2x, 2 - 2x) (not a bijection); reverse:
    x -> 1 - x; identity; or an explicit index list.
    """
    if isinstance(spec, str):
        if spec == "shift-half":
            return tuple((j + n // 2) % n for j in range(n))
        if spec == "double-cover":
            return tuple(min(2 * j, 2 * n - 2 * j) % n for j in range(n))
        if spec == "reverse":
            return tuple((n - j) % n for j in range(n))
        if spec == "identity":
            return tuple(range(n))
        raise MotError(f"unknown permutation spec {spec!r}")
    return tuple(int(s) for s in spec)


def euler_grid_problem(n: int, k: int, spec) -> EulerFlowProblem:
    """Benchmark instance on the 1-d periodic grid x_j = j / n."""
    points = (np.arange(n, dtype=float) / n).reshape(-1, 1)
    sigma = euler_sigma(spec, n)
    return EulerFlowProblem(points, sigma, k,
                            allow_non_bijective=(spec == "double-cover"))


# ---------------------------------------------------------------------------
# network reliability


@dataclass(frozen=True)
class ReliabilityProblem:
    """Edge-marginal network reliability: which coupling of the edge
    states extremizes the probability that the network is connected."""

    graph: UGraph
    q: np.ndarray                # per-edge operation probabilities
    mode: str                    # worst | best

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        if q.shape[0] != self.graph.ne:
            raise MotError("one reliability per edge is required")
        if np.any(q < 0) or np.any(q > 1):
            raise MotError("edge reliabilities must lie in [0, 1]")
        if self.mode not in ("worst", "best"):
            raise MotError("mode must be 'worst' or 'best'")
        if self.graph.nv < 2:
            raise MotError("reliability needs at least two vertices")
        object.__setattr__(self, "q", q)

    def marginals(self) -> Marginals:
        """Atom 0 = edge failed, atom 1 = edge operates."""
        mu = np.stack([1.0 - self.q, self.q], axis=1)
        return Marginals(mu)


@dataclass(frozen=True)
class ReliabilityResult:
    probability: float
    plan: SparsePlan
    report: SolveReport


def _subgraph_set_oracle(g: UGraph, connected: bool) -> SetOracle:
    """Set oracle over {H : H (dis)connected} for edge-state tuples.

    A tuple j encodes H = {e : j_e = 1}; its oracle weight is
    -sum_e p[e, j_e] = -sum_e p[e, 0] + sum_{e in H} (p[e,0] - p[e,1]),
    so membership minimization reduces to the weighted subgraph oracles.
    """
    solver = (min_weight_connected_subgraph if connected
              else min_weight_disconnected_subgraph)

    def min_fn(p):
        base = -float(p[:, 0].sum())
        return base + solver(g, p[:, 0] - p[:, 1])

    def contains(j):
        return g.is_connected(keep=[bool(b) for b in j]) == connected

    return SetOracle(n=2, k=g.ne, min_fn=min_fn, contains=contains)


def build_reliability_cost(pr: ReliabilityProblem) -> SetOptCost:
    """best mode: C = 1[H disconnected] (member set = connected
    subgraphs); worst mode: C = 1[H connected] (member set =
    disconnected subgraphs)."""
    return SetOptCost(_subgraph_set_oracle(pr.graph, connected=(pr.mode == "best")))


def network_reliability(pr: ReliabilityProblem, engine: str = "colgen",
                        eps: float = 0.05) -> ReliabilityResult:
    """Extremal connectivity probability over couplings of the edge states.

    best: rho_max = 1 - min P[H disconnected]; worst: rho_min =
    min P[H connected].  Returns the probability and the extremal
    coupling over edge-state tuples.
    """
    m = pr.marginals()
    if pr.mode == "best" and not pr.graph.is_connected():
        plan = mwu_round(SparsePlan.empty(2, pr.graph.ne), m)
        report = SolveReport(value=1.0, plan=plan, iterations=0, oracle_calls=0,
                             wall_time=0.0, status="optimal")
        return ReliabilityResult(0.0, plan, report)
    sc = build_reliability_cost(pr)
    if engine == "colgen":
        report = colgen_solve(sc, m)
    elif engine == "mwu":
        report = mwu_solve(sc, m, eps)
    else:
        raise MotError(f"unsupported reliability engine {engine!r}")
    prob = 1.0 - report.value if pr.mode == "best" else report.value
    prob = min(1.0, max(0.0, prob))
    return ReliabilityResult(prob, report.plan, report)


# ---------------------------------------------------------------------------
# risk estimation


MAX_RISK_RANK = 4


@dataclass(frozen=True)
class RiskProblem:
    """Worst-case expected profit of r stocks compounded over k years.

    ``atoms[i, l]`` are the possible (positive) return factors of stock i
    in year l and ``probs[i, l]`` their known marginal distribution; the
    joint coupling across all rk coordinates is adversarial.
    """

    atoms: np.ndarray            # (r, k, n) positive return factors
    probs: np.ndarray            # (r, k, n) marginal distributions

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if atoms.ndim != 3 or probs.shape != atoms.shape:
            raise MotError("atoms and probs must be matching (r, k, n) arrays")
        if np.any(atoms <= 0):
            raise MotError("return atoms must be positive")
        if np.any(probs < 0) or not np.allclose(probs.sum(axis=2), 1.0, atol=1e-9):
            raise MotError("each return distribution must be normalized")
        if atoms.shape[0] > MAX_RISK_RANK:
            raise MotError(f"at most {MAX_RISK_RANK} stocks are supported")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def r(self) -> int:
        return self.atoms.shape[0]

    @property
    def years(self) -> int:
        return self.atoms.shape[1]

    @property
    def n(self) -> int:
        return self.atoms.shape[2]

    def marginals(self) -> Marginals:
        """One marginal per (stock, year) coordinate, stock-major order."""
        r, k, n = self.atoms.shape
        return Marginals(self.probs.reshape(r * k, n))


def build_risk_cost(pr: RiskProblem) -> LowRankPlusSparseCost:
    """Total profit sum_i prod_l rho_{i,l} as a rank-r cost over [n]^{rk}.

    Factor i carries the atom values on its own (i, l) coordinates and
    all-ones on every other stock's coordinates.
    """
    r, k, n = pr.atoms.shape
    u = np.ones((r, r * k, n))
    for i in range(r):
        u[i, i * k:(i + 1) * k, :] = pr.atoms[i]
    rmax = float(np.prod(pr.atoms.max(axis=2), axis=1).sum())
    R = LowRankFactors(u, rmax=rmax)
    return LowRankPlusSparseCost(R, SparseComponent.empty(r * k))


def risk_solve(pr: RiskProblem, engine: str = "sinkhorn",
               eps: float = 0.1, value_samples: int | None = None) -> SolveReport:
    sc = build_risk_cost(pr)
    m = pr.marginals()
    if engine == "sinkhorn":
        if value_samples is None:
            # sampling the value costs k conditional marginals per draw;
            # keep the total work flat as the horizon grows
            value_samples = max(1000, 40000 // sc.k)
        return sinkhorn_solve(sc, m, eps, value_samples=value_samples)
    if engine == "mwu":
        return mwu_solve(sc, m, eps)
    raise MotError(f"unsupported risk engine {engine!r}")


def worst_case_profit(pr: RiskProblem, engine: str = "sinkhorn",
                      eps: float = 0.1) -> float:
    """eps-approximate minimum expected total profit over all couplings."""
    return risk_solve(pr, engine, eps).value


# ---------------------------------------------------------------------------
# Frank-Wolfe projection onto the transportation polytope


@dataclass(frozen=True)
class ProjectionProblem:
    """Project Q = R + S (low-rank plus sparse, entrywise >= 0) onto the
    plans with the given marginals, in squared Frobenius distance."""

    R: LowRankFactors
    S: SparseComponent
    m: Marginals
    eps: float

    def __post_init__(self):
        if self.S.k != self.R.k:
            raise MotError("R and S must share the coordinate count")
        if (self.m.k, self.m.n) != (self.R.k, self.R.n):
            raise MotError("marginals must match the tensor shape")
        if self.eps <= 0:
            raise MotError("projection requires eps > 0")
        rng = np.random.default_rng(0)
        for _ in range(100):     # nonnegativity audit on a fixed sample
            j = tuple(int(a) for a in rng.integers(0, self.R.n, self.R.k))
            if self.R.entry(j) + self.S.entry(j) < -1e-9:
                raise MotError(f"Q has a negative entry at {j}")


@dataclass(frozen=True)
class FwResult:
    plan: SparsePlan
    objective: float             # ||P - Q||^2, computed exactly
    gap: float                   # certified duality gap at the returned plan
    iterations: int


def _negate_lowrank(R: LowRankFactors) -> LowRankFactors:
    u = R.u.copy()
    u[:, 0, :] *= -1.0
    return LowRankFactors(u, rmax=float(R.rmax))


def _lowrank_sq_norm(R: LowRankFactors) -> float:
    """||R||_F^2 = sum_{l,l'} prod_m <u_{l,m}, u_{l',m}>."""
    gram = np.einsum("amj,bmj->abm", R.u, R.u)
    return float(np.prod(gram, axis=2).sum())


def _projection_objective(entries: dict, pr: ProjectionProblem) -> float:
    """||P - Q||^2 = ||P||^2 - 2<P,Q> + ||Q||^2 without enumeration."""
    q_entry = lambda j: pr.R.entry(j) + pr.S.entry(j)
    pp = sum(v * v for v in entries.values())
    pq = sum(v * q_entry(j) for j, v in entries.items())
    qq = _lowrank_sq_norm(pr.R)
    for j, v in zip(map(tuple, pr.S.indices), pr.S.values):
        qq += 2.0 * v * pr.R.entry(j) + v * v
    return pp - 2.0 * pq + qq


def fw_project(pr: ProjectionProblem) -> FwResult:
    """Frank-Wolfe projection with MWU linear-minimization steps.

    Each step minimizes <P - Q, D> over the polytope via mwu_solve at
    accuracy eps/4 (the gradient cost P - Q is again low-rank plus
    sparse); the step size is 2/(t+2) and T = ceil(8/eps).  The returned
    gap adds the LP accuracy to the Frank-Wolfe inner product, so it
    never understates the true suboptimality of the returned plan.
    """
    m, eps = pr.m, pr.eps
    eps_lp = eps / 4.0
    T = math.ceil(8.0 / eps)
    neg_R = _negate_lowrank(pr.R)
    s_entries = {tuple(j): float(v) for j, v in zip(pr.S.indices, pr.S.values)}

    init = mwu_round(SparsePlan.empty(pr.R.n, pr.R.k), m)
    entries = {tuple(j): float(v) for j, v in init.entries()}
    gap = math.inf
    t = 0
    for t in range(T + 1):
        # sparse half of the gradient: P - S on the union of supports
        diff = {j: -v for j, v in s_entries.items()}
        for j, v in entries.items():
            diff[j] = v - s_entries.get(j, 0.0)
        keys = list(diff.keys())
        sparse = SparseComponent(pr.R.k, np.asarray(keys, dtype=np.intp).reshape(-1, pr.R.k),
                                 np.asarray([diff[j] for j in keys])) if keys \
            else SparseComponent.empty(pr.R.k)
        grad_cost = LowRankPlusSparseCost(neg_R, sparse)
        rep = mwu_solve(grad_cost, m, eps_lp)
        p_val = sum(v * grad_cost.cost_entry(j) for j, v in entries.items())
        # certified lower bound on the LP minimum keeps the gap sound even
        # when the inner solve stalls short of its accuracy target
        lp_lb = rep.lower_bound if rep.lower_bound is not None \
            else rep.value - eps_lp
        gap = 2.0 * (p_val - lp_lb)
        if gap <= eps or t == T:
            break
        gamma = 2.0 / (t + 2.0)
        merged = {j: (1.0 - gamma) * v for j, v in entries.items()}
        for j, v in rep.plan.entries():
            j = tuple(j)
            merged[j] = merged.get(j, 0.0) + gamma * float(v)
        entries = {j: v for j, v in merged.items() if v > 0.0}

    idx = np.asarray(list(entries.keys()), dtype=np.intp).reshape(-1, pr.R.k)
    plan = SparsePlan(pr.R.n, pr.R.k, idx, np.asarray(list(entries.values())))
    return FwResult(plan=plan, objective=_projection_objective(entries, pr),
                    gap=float(gap), iterations=t)
