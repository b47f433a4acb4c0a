"""The three MOT solver engines: SINKHORN, MWU, and COLGEN.

SINKHORN runs multimarginal matrix scaling against the MARG oracle and
returns the plan implicitly through scaling vectors (plus a rank-one
rounding correction that restores exact feasibility).  MWU runs the
multiplicative-weights feasibility test for the polytope
{P : marginals mu, <C,P> <= lambda} against the ARGAMIN oracle, wrapped
in a binary search on lambda with certified lower bounds.  COLGEN runs
column generation on the exact LP against the ARGMIN oracle and returns
a sparse vertex with an optimality certificate.

All engines report through SolveReport; only capability negotiation and
cost-entry evaluation are assumed beyond the declared oracle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    CapabilityError,
    ConvergenceError,
    DegenerateSupportError,
    DualWeights,
    Marginals,
    MotError,
    SparsePlan,
    plan_cost,
)
from .oracles import (
    AMIN,
    ARGAMIN,
    ARGMIN,
    MARG,
    MIN,
    SMIN,
    OracleAnswerArg,
    StructuredCost,
    argamin_gap,
    oracle_argamin,
    oracle_argmin,
    oracle_marg,
)
from .simplex import StandardFormLP, lp_solve

__all__ = [
    "ScaledPlan",
    "MwuState",
    "SolveReport",
    "sinkhorn_solve",
    "sample_scaled_plan",
    "mwu_potential_derivative",
    "mwu_feasibility",
    "MwuFeasResult",
    "mwu_solve",
    "mwu_round",
    "colgen_solve",
]


@dataclass
class ScaledPlan:
    """Implicit plan P = (tensor-prod d_i) * exp(-eta C) + (tensor-prod v_i)."""

    d: np.ndarray  # (k, n) scaling vectors
    v: np.ndarray  # (k, n) rounding vectors
    eta: float
    cost: StructuredCost

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        for name, arr in (("d", self.d), ("v", self.v)):
            if arr.shape != (self.cost.k, self.cost.n):
                raise MotError(f"{name} must have shape (k, n)")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise MotError(f"{name} must be finite and nonnegative")

    def scaled_marginal(self, i: int) -> np.ndarray:
        """i-th marginal of the scaled component only."""
        return np.asarray(oracle_marg(self.cost, self.d, self.eta, i), dtype=float)

    def marginal(self, i: int) -> np.ndarray:
        out = self.scaled_marginal(i)
        norms = [self.v[s].sum() for s in range(self.cost.k)]
        prod = 1.0
        for s in range(self.cost.k):
            if s != i:
                prod *= norms[s]
        return out + self.v[i] * prod

    def total_mass(self) -> float:
        return float(self.marginal(0).sum())


@dataclass
class MwuState:
    """Snapshot of the MWU iterate used by the potential machinery."""

    plan: SparsePlan
    marg_cache: np.ndarray       # (k, n) marginals of plan
    cost_estimate: float         # running estimate of <C, P>
    lam: float                   # target value lambda
    eps: float
    eta_mwu: float               # mass threshold 2 log(nk+1)/eps
    mu: Marginals = None         # target marginals

    def __post_init__(self):
        self.marg_cache = np.asarray(self.marg_cache, dtype=float)


@dataclass
class SolveReport:
    """Engine output: value, plan, and run accounting."""

    value: float
    plan: object                 # SparsePlan or ScaledPlan
    iterations: int
    oracle_calls: int
    wall_time: float
    status: str                  # optimal | approx | infeasible-certificate
    lower_bound: float | None = None   # certified bound on OPT, when available


# ---------------------------------------------------------------------------
# SINKHORN


def sinkhorn_solve(sc: StructuredCost, m: Marginals, eps: float,
                   max_sweeps: int = 5000, value_samples: int = 10000) -> SolveReport:
    """Multimarginal scaling against MARG, with rank-one rounding.

    eta = min(2 k log n / eps, backend cap); the scaling loop visits the
    marginals round-robin and stops once the aggregate l1 marginal error
    over a sweep is at most eps / (8 cmax).  The rounding step shrinks d
    entrywise and adds a product correction v so the output is exactly
    feasible.  The reported value is a fixed-seed sampled estimate of
    <C, P>.
    """
    t_start = time.perf_counter()
    if eps <= 0:
        raise MotError("sinkhorn requires eps > 0")
    if not (sc.supports(MARG) or sc.supports(SMIN)):
        raise CapabilityError("SINKHORN requires a MARG (or SMIN) oracle")
    if not np.isfinite(sc.cmax):
        raise MotError("sinkhorn requires finite cmax")
    n, k = sc.n, sc.k
    mu = m.mu
    eta = 2.0 * k * math.log(max(n, 2)) / eps
    eta = min(eta, sc.eta_max())
    calls = [0]

    def marg(d, i):
        calls[0] += 1
        out = np.asarray(oracle_marg(sc, d, eta, i), dtype=float)
        return np.maximum(out, 0.0)

    # zero target mass forces a zero scaling entry
    d = np.where(mu > 0, 1.0, 0.0)
    tol = eps / (8.0 * max(sc.cmax, 1e-12))
    sweep_err = np.full(k, np.inf)
    iters = 0
    converged = False
    for sweep in range(max_sweeps):
        for i in range(k):
            mt = marg(d, i)
            if np.any((mt == 0.0) & (mu[i] > 0)):
                raise DegenerateSupportError(
                    f"scaled marginal {i} vanished where the target is positive"
                )
            sweep_err[i] = float(np.abs(mt - mu[i]).sum())
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(mu[i] > 0, mu[i] / np.where(mt > 0, mt, 1.0), 0.0)
            d[i] *= ratio
            iters += 1
        if sweep_err.sum() <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"sinkhorn: marginal error {sweep_err.sum():.3g} > {tol:.3g} "
            f"after {max_sweeps} sweeps (eta={eta:.3g})"
        )

    # Step 2: shrink d so the scaled marginals are dominated by mu, then
    # fill the deficit with a product term
    for i in range(k):
        mt = marg(d, i)
        with np.errstate(invalid="ignore", divide="ignore"):
            shrink = np.where(mt > 0, np.minimum(1.0, mu[i] / np.where(mt > 0, mt, 1.0)), 1.0)
        d[i] *= shrink
    v = np.empty((k, n))
    for i in range(k):
        v[i] = np.maximum(mu[i] - marg(d, i), 0.0)
    norms = v.sum(axis=1)
    if norms[0] <= 1e-15:
        v[:] = 0.0
    else:
        rest = float(np.prod(norms[1:])) if k > 1 else 1.0
        if rest <= 0:
            v[:] = 0.0
        else:
            v[0] /= rest
    sp = ScaledPlan(d=d, v=v, eta=eta, cost=sc)

    samples = sample_scaled_plan(sp, rng_seed=123456789, count=value_samples)
    value = float(np.mean([sc.cost_entry(j) for j in samples])) if samples else 0.0
    return SolveReport(value=value, plan=sp, iterations=iters,
                       oracle_calls=calls[0],
                       wall_time=time.perf_counter() - t_start, status="approx")


def sample_scaled_plan(sp: ScaledPlan, rng_seed: int, count: int) -> list:
    """i.i.d. tuples from P / m(P), deterministic given the seed.

    The scaled component is sampled coordinate-by-coordinate through
    conditional marginals (one-hot masking of d, with prefix caching);
    the product component factorizes.
    """
    rng = np.random.default_rng(rng_seed)
    sc, k, n = sp.cost, sp.cost.k, sp.cost.n
    scaled_mass = float(sp.scaled_marginal(0).sum())
    norms = sp.v.sum(axis=1)
    prod_mass = float(np.prod(norms)) if np.all(norms > 0) else 0.0
    total = scaled_mass + prod_mass
    if total <= 0:
        raise MotError("cannot sample from an all-zero plan")

    cache: dict = {}

    def conditional(prefix: tuple) -> np.ndarray:
        if prefix in cache:
            return cache[prefix]
        i = len(prefix)
        d = sp.d.copy()
        for s, js in enumerate(prefix):
            row = np.zeros(n)
            row[js] = sp.d[s, js]
            d[s] = row
        w = np.maximum(np.asarray(oracle_marg(sc, d, sp.eta, i), dtype=float), 0.0)
        s = w.sum()
        if s <= 0:
            raise MotError("conditional marginal vanished while sampling")
        w = w / s
        cache[prefix] = w
        return w

    prod_dists = [sp.v[i] / norms[i] if norms[i] > 0 else None for i in range(k)]
    out = []
    use_scaled = rng.random(count) < (scaled_mass / total)
    for t in range(count):
        if use_scaled[t] or prod_mass <= 0:
            prefix = ()
            for i in range(k):
                w = conditional(prefix)
                ji = int(rng.choice(n, p=w))
                prefix = prefix + (ji,)
            out.append(prefix)
        else:
            out.append(tuple(int(rng.choice(n, p=prod_dists[i])) for i in range(k)))
    return out


# ---------------------------------------------------------------------------
# MWU


def _mwu_terms(marg_cache, cost_estimate, lam, mu):
    """Shared softmax bookkeeping: shift t0, scaled terms, and Z."""
    support = mu > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(support, marg_cache / np.where(support, mu, 1.0), -np.inf)
    e0 = cost_estimate / lam
    t0 = max(e0, float(x[support].max()) if support.any() else -np.inf)
    a = math.exp(e0 - t0)
    ex = np.where(support, np.exp(x - t0), 0.0)
    z = a + float(ex.sum())
    return support, x, a, ex, z, t0


def mwu_potential_derivative(st: MwuState, sc: StructuredCost, j) -> float:
    """Directional derivative V_j of the softmax potential at the iterate.

    V_j = (C_j - sum_i p_i[j_i]) * e^{c~/lam} / lam
          / (e^{c~/lam} + sum_{s,t} e^{m_s[t]/mu_s[t]})
    with p_i[j] = -(lam / e^{c~/lam}) e^{m_i[j]/mu_i[j]} / mu_i[j], all
    computed under a shared max-shift.
    """
    j = tuple(j)
    mu = st.mu.mu
    support, x, a, ex, z, _ = _mwu_terms(st.marg_cache, st.cost_estimate, st.lam, mu)
    num = a * sc.cost_entry(j) / st.lam
    for i, ji in enumerate(j):
        if not support[i, ji]:
            return float("inf")
        num += ex[i, ji] / mu[i, ji]
    return float(num / z)


@dataclass
class MwuFeasResult:
    """Outcome of the lambda-feasibility test."""

    status: str                  # feasible | infeasible | stalled
    plan: SparsePlan | None
    iterations: int
    oracle_calls: int
    value: float | None = None   # exact <C, P> of the returned plan


class _RescaledCost(StructuredCost):
    """Affine view C' = (C + 3 cmax) / (2 cmax) with entries in [1, 2].

    Oracle queries translate through the weight map
    p = 2 cmax p' - (3 cmax / k) 1, under which
    C - sum p = 2 cmax (C' - sum p').
    """

    def __init__(self, inner: StructuredCost):
        if inner.cmax <= 0:
            raise MotError("rescaling requires cmax > 0")
        self.inner = inner
        self.n = inner.n
        self.k = inner.k
        self.cmax = 2.0
        self.scale = 2.0 * inner.cmax
        caps = set()
        if inner.supports(MIN):
            caps |= {MIN, ARGMIN, AMIN, ARGAMIN}
        if inner.supports(ARGMIN):
            caps |= {ARGMIN, ARGAMIN}
        if inner.supports(AMIN) or inner.supports(SMIN):
            caps.add(AMIN)
        if inner.supports(ARGAMIN):
            caps.add(ARGAMIN)
        self.capabilities = frozenset(caps)

    def _map_weights(self, p: DualWeights) -> DualWeights:
        shift = 3.0 * self.inner.cmax / self.k
        return DualWeights(self.scale * p.p - shift, bound=None)

    def cost_entry(self, j) -> float:
        return (self.inner.cost_entry(j) + 3.0 * self.inner.cmax) / self.scale

    def eta_max(self):
        return self.inner.eta_max() * self.scale

    def amin_accuracy(self, eps):
        from .oracles import _AminShim
        return _AminShim(self.inner).amin_accuracy(eps * self.scale) / self.scale

    def min_value(self, p):
        from .oracles import oracle_min
        return oracle_min(self.inner, self._map_weights(p)) / self.scale

    def argmin(self, p):
        ans = oracle_argmin(self.inner, self._map_weights(p))
        return OracleAnswerArg(ans.tuple, ans.value / self.scale)

    def amin(self, p, eps):
        from .oracles import oracle_amin
        return oracle_amin(self.inner, self._map_weights(p), eps * self.scale) / self.scale

    def argamin(self, p, eps):
        ans = oracle_argamin(self.inner, self._map_weights(p), eps * self.scale)
        return OracleAnswerArg(ans.tuple, ans.value / self.scale)


def mwu_feasibility(sc: StructuredCost, m: Marginals, lam: float, eps: float,
                    max_iters: int = 20_000_000) -> MwuFeasResult:
    """Multiplicative-weights emptiness test for {P feasible, <C,P> <= lam}.

    Requires cost entries in [1, 2] (mwu_solve rescales).  The potential
    derivative of each candidate direction is evaluated exactly (the
    running cost is tracked through cost_entry), so the infeasibility
    certificate min_j V_j > 1 is sound regardless of oracle accuracy;
    oracle accuracy only affects the ability to find good directions.
    """
    if not (0 < eps <= 0.5):
        raise MotError("mwu feasibility requires eps in (0, 1/2]")
    n, k = sc.n, sc.k
    mu = m.mu
    eta = 2.0 * math.log(n * k + 1.0) / eps
    thresh = 1.0 + eps / 3.0
    support = mu > 0
    inv_mu = np.where(support, 1.0 / np.where(support, mu, 1.0), 0.0)
    mass = 0.0
    cost = 0.0
    entries: dict = {}
    cache: list = []          # candidate tuples
    cache_step: list = []     # per-tuple step size eps*min(lam/C_j, min mu)
    sticky = 0                # index of the last accepted direction
    cache_mat = np.empty((0, k), dtype=np.intp)
    cache_cost = np.empty(0)
    rows = np.arange(k)
    oracle_calls = 0
    it = 0

    # incremental softmax state relative to a lazily renormalized shift:
    # ex = exp(x - t_ref) over the support, where x = m_i(P)/mu_i
    t_ref = 0.0
    x = np.where(support, 0.0, -np.inf)
    ex = support.astype(float)
    sum_ex = float(ex.sum())
    max_x = 0.0

    def value_of(jt, cj):
        a = math.exp(cost / lam - t_ref)
        num = a * cj / lam
        for i in range(k):
            num += ex[i, jt[i]] * inv_mu[i, jt[i]]
        return num, a, a + sum_ex

    while mass < eta and it < max_iters:
        if max(max_x, cost / lam) - t_ref > 500.0:
            t_ref = max(max_x, cost / lam)
            with np.errstate(invalid="ignore"):
                ex = np.where(support, np.exp(np.where(support, x - t_ref, 0.0)), 0.0)
            sum_ex = float(ex.sum())

        jt = None
        if cache:
            # sticky candidate first: the last accepted tuple usually
            # remains a valid direction for many iterations
            num, a, z = value_of(cache[sticky], cache_cost[sticky])
            if num <= thresh * z:
                jt, cj, vrel = cache[sticky], float(cache_cost[sticky]), num / z
                step = cache_step[sticky]
            else:
                w = ex * inv_mu
                vals = a * cache_cost / lam + w[rows[None, :], cache_mat].sum(axis=1)
                best = int(np.argmin(vals))
                if vals[best] <= thresh * z:
                    sticky = best
                    jt = cache[best]
                    cj = float(cache_cost[best])
                    vrel = float(vals[best]) / z
                    step = cache_step[best]
        if jt is None:
            oracle_calls += 1
            a = math.exp(cost / lam - t_ref)
            z = a + sum_ex
            w = ex * inv_mu
            if a == 0.0 or (t_ref - cost / lam) > 600.0:
                # the cost term is negligible at double precision: the
                # bottleneck objective separates across coordinates
                jt = tuple(int(np.argmin(np.where(support[i], w[i], np.inf)))
                           for i in range(k))
                gap = 0.0
            else:
                with np.errstate(over="ignore"):
                    p = -np.where(support, (lam / a) * w, 1e300)
                p = np.maximum(p, -1e300)
                p -= p.max(axis=1, keepdims=True)
                eps_arg = max(1e-9, (eps / 3.0) * lam * z / a)
                ans = oracle_argamin(sc, DualWeights(p, bound=None), eps_arg)
                jt = tuple(ans.tuple)
                gap = argamin_gap(sc, eps_arg)
            cj = sc.cost_entry(jt)
            vj, a, z = value_of(jt, cj)
            if vj > thresh * z:
                # certify only if the oracle's suboptimality cannot hide
                # a direction with derivative <= 1
                if vj - a * gap / lam > z:
                    return MwuFeasResult("infeasible", None, it, oracle_calls)
                return MwuFeasResult("stalled", None, it, oracle_calls)
            vrel = vj / z
            step = eps * min(lam / cj, min(mu[i, jt[i]] for i in range(k)))
            sticky = len(cache)
            cache.append(jt)
            cache_step.append(step)
            cache_mat = np.vstack([cache_mat, np.asarray(jt, dtype=np.intp)])
            cache_cost = np.append(cache_cost, cj)

        # batch identical steps; the allowed exponent drift grows with the
        # margin below the acceptance threshold (each step drifts <= eps)
        margin = -math.log(max(vrel, 1e-300) / thresh)
        drift = 0.05 + 0.5 * max(0.0, margin)
        nsteps = max(1, min(int(drift / eps), int((eta - mass) / step) + 1))
        delta = step * nsteps
        entries[jt] = entries.get(jt, 0.0) + delta
        cost += cj * delta
        mass += delta
        it += nsteps
        for i in range(k):
            ji = jt[i]
            xi = x[i, ji] + delta * inv_mu[i, ji]
            x[i, ji] = xi
            new = math.exp(min(xi - t_ref, 700.0))
            sum_ex += new - ex[i, ji]
            ex[i, ji] = new
            if xi > max_x:
                max_x = xi

        # early exit: the iterate already rescales into the polytope
        ratio = max(cost / lam, max_x)
        if ratio > 0 and mass / ratio >= 1.0 - 4.0 * eps:
            partial = {j: v / ratio for j, v in entries.items()}
            plan = _round_entries(partial, m)
            value = plan_cost(plan, sc.cost_entry)
            return MwuFeasResult("feasible", plan, it, oracle_calls, value=value)
    if mass >= eta:
        # theory guarantees the rescaled iterate is near-feasible here
        ratio = max(cost / lam, max_x, 1e-300)
        partial = {j: v / ratio for j, v in entries.items()}
        plan = _round_entries(partial, m)
        value = plan_cost(plan, sc.cost_entry)
        return MwuFeasResult("feasible", plan, it, oracle_calls, value=value)
    return MwuFeasResult("stalled", None, it, oracle_calls)


def _round_entries(partial: dict, m: Marginals) -> SparsePlan:
    """Greedy rounding of a dominated partial plan onto the polytope."""
    k, n = m.k, m.n
    mu = m.mu
    marg = np.zeros((k, n))
    entries = dict(partial)
    rows = np.arange(k)
    for jt, v in entries.items():
        marg[rows, list(jt)] += v
    # clip tiny overshoot from floating rescale
    passes = 0
    while 1.0 - marg[0].sum() > 1e-12:
        if passes > n * k:
            raise MotError("rounding failed to terminate within nk passes")
        deficit = mu - marg
        jt = tuple(int(np.argmax(deficit[i])) for i in range(k))
        alpha = float(min(deficit[i][jt[i]] for i in range(k)))
        if alpha <= 0:
            raise MotError("rounding precondition violated: no joint deficiency")
        entries[jt] = entries.get(jt, 0.0) + alpha
        marg[rows, list(jt)] += alpha
        passes += 1
    idx = np.asarray(list(entries.keys()), dtype=np.intp).reshape(-1, k)
    vals = np.asarray(list(entries.values()))
    keep = vals > 0
    return SparsePlan(n, k, idx[keep], vals[keep])


def mwu_round(partial: SparsePlan, m: Marginals) -> SparsePlan:
    """Complete a marginal-dominated partial plan to exact feasibility.

    Adds at most nk entries, each at the argmax-deficiency tuple (first
    index on ties).  With an empty partial plan this is a greedy
    northwest-corner-style construction with at most nk - k + 1 entries.
    """
    if partial.n != m.n or partial.k != m.k:
        raise MotError("partial plan dimensions do not match the marginals")
    for i in range(m.k):
        if np.any(partial.marginal(i) > m.mu[i] + 1e-12):
            raise MotError("partial plan marginals must be dominated by the target")
    entries = {tuple(row): float(v)
               for row, v in zip(partial.indices, partial.masses)}
    return _round_entries(entries, m)


def mwu_solve(sc: StructuredCost, m: Marginals, eps: float,
              max_iters: int = 20_000_000) -> SolveReport:
    """MWU with binary search on the target value.

    The cost is rescaled to [1, 2]; each feasibility call either yields a
    feasible plan (whose exact cost tightens the upper bracket) or an
    infeasibility certificate (which raises the certified lower bracket).
    Terminates once the bracket is within the eps budget.
    """
    t_start = time.perf_counter()
    if eps <= 0:
        raise MotError("mwu requires eps > 0")
    if not any(sc.supports(c) for c in (AMIN, ARGAMIN, MIN, ARGMIN, SMIN)):
        raise CapabilityError("MWU requires an (approximate) min oracle")
    if sc.cmax == 0:
        plan = mwu_round(SparsePlan.empty(sc.n, sc.k), m)
        return SolveReport(value=plan_cost(plan, sc.cost_entry), plan=plan, iterations=0,
                           oracle_calls=0, wall_time=time.perf_counter() - t_start,
                           status="optimal", lower_bound=0.0)
    rc = _RescaledCost(sc)
    eps_r = eps / rc.scale                      # budget in rescaled units
    eps_feas = min(0.5, max(eps_r / 16.0, 1e-7))
    lam_lo, lam_hi = 1.0, 2.0                   # bracket on lambda itself
    best_plan = None
    best_val = math.inf
    iters = 0
    calls = 0
    # first pass at the ceiling always yields a plan; a feasible run at
    # lam returns cost <= lam + 8*eps_feas, so shrinking the lambda
    # bracket to eps_r/2 puts the best plan within eps_r of optimal
    lam = 2.0
    for _ in range(48):
        res = mwu_feasibility(rc, m, lam, eps_feas, max_iters=max_iters)
        iters += res.iterations
        calls += res.oracle_calls
        if res.status == "feasible":
            if res.value < best_val:
                best_val = res.value
                best_plan = res.plan
            lam_hi = min(lam_hi, lam, res.value)
        elif res.status == "infeasible":
            lam_lo = max(lam_lo, lam)
        else:
            break
        if best_plan is not None and best_val - lam_lo <= eps_r:
            break
        if lam_hi - lam_lo <= eps_r / 2.0:
            break
        lam = 0.5 * (lam_lo + lam_hi)
    if best_plan is None:
        raise ConvergenceError("mwu failed to produce any feasible plan")
    value = plan_cost(best_plan, sc.cost_entry)
    # lam_lo only rises on sound infeasibility certificates, so it maps
    # back to a certified lower bound on the unscaled optimum
    return SolveReport(value=value, plan=best_plan, iterations=iters,
                       oracle_calls=calls, wall_time=time.perf_counter() - t_start,
                       status="approx",
                       lower_bound=rc.scale * lam_lo - 3.0 * sc.cmax)


# ---------------------------------------------------------------------------
# COLGEN


def colgen_solve(sc: StructuredCost, m: Marginals, max_iters: int = 10000,
                 tol: float = 1e-7) -> SolveReport:
    """Column generation on the exact LP with ARGMIN pricing.

    The restricted master over the current columns is solved by the dense
    simplex; its duals price a new column through ARGMIN.  Termination at
    reduced cost >= -tol certifies dual feasibility, so the returned
    vertex is optimal with at most nk - k + 1 nonzero entries.
    """
    t_start = time.perf_counter()
    if not (sc.supports(ARGMIN) or sc.supports(MIN)):
        raise CapabilityError("COLGEN requires an exact ARGMIN (or MIN) oracle")
    n, k = sc.n, sc.k
    init = mwu_round(SparsePlan.empty(n, k), m)
    columns = [tuple(row) for row in init.indices]
    present = set(columns)
    costs = [sc.cost_entry(j) for j in columns]
    last_used = [0] * len(columns)
    prune_cap = 2 * n * k + 64   # master size that triggers column pruning
    prune_age = 40               # iterations a column may idle outside the basis
    calls = 0
    status = "approx"
    sol = None
    warm = None
    for it in range(1, max_iters + 1):
        ncols = len(columns)
        A = np.zeros((n * k, ncols))
        for col, jt in enumerate(columns):
            for i in range(k):
                A[i * n + jt[i], col] = 1.0
        sol = lp_solve(StandardFormLP(A, m.mu.reshape(-1), np.asarray(costs)),
                       warm_basis=warm)
        if sol.status != "optimal":
            raise MotError(f"restricted master LP unexpectedly {sol.status}")
        p = DualWeights(sol.duals.reshape(k, n), bound=None)
        calls += 1
        ans = oracle_argmin(sc, p)
        if ans.value >= -tol:
            status = "optimal"
            break
        jt = tuple(ans.tuple)
        if jt in present:
            # numerically re-proposed column: duals cannot improve further
            status = "optimal" if ans.value >= -10 * tol else "approx"
            break
        for b in sol.basis:
            if b < ncols:
                last_used[b] = it
        if ncols >= prune_cap:
            # retire columns that have sat outside the basis for a while;
            # the pricing oracle regenerates any that become relevant again
            basic = {b for b in sol.basis if b < ncols}
            keep = [c for c in range(ncols)
                    if c in basic or it - last_used[c] <= prune_age]
            if len(keep) < ncols:
                remap = {old: new for new, old in enumerate(keep)}
                columns = [columns[c] for c in keep]
                costs = [costs[c] for c in keep]
                last_used = [last_used[c] for c in keep]
                present = set(columns)
                nkeep = len(keep)
                sol.basis = [remap[b] if b < ncols else nkeep + (b - ncols)
                             for b in sol.basis]
        # previous optimal basis stays primal feasible after appending a
        # column; shift its artificial indices past the new column
        prev = len(columns)
        warm = [b if b < prev else b + 1 for b in sol.basis]
        present.add(jt)
        columns.append(jt)
        costs.append(sc.cost_entry(jt))
        last_used.append(it)
    idx = np.asarray(columns, dtype=np.intp).reshape(-1, k)
    keep = sol.x > 1e-12
    plan = SparsePlan(n, k, idx[keep], sol.x[keep])
    return SolveReport(value=float(sol.value), plan=plan, iterations=it,
                       oracle_calls=calls, wall_time=time.perf_counter() - t_start,
                       status=status)
