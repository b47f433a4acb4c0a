"""End-to-end acceptance gate: one numbered check per shipped guarantee.

Each test prints exactly one ``[PASS]``/``[FAIL]`` line for its check
(visible with ``pytest -s`` or on failure); all tolerances are stated
inline next to the comparisons they gate.  Reference values come from
enumeration, the brute-force LP, or closed forms -- never from the code
under test.
"""

import itertools
import math
import time

import numpy as np
import pytest

from motkit.algorithms import (
    colgen_solve,
    mwu_solve,
    sample_scaled_plan,
    sinkhorn_solve,
)
from motkit.apps import (
    ReliabilityProblem,
    RiskProblem,
    build_euler_flow_cost,
    build_risk_cost,
    euler_flow_marginals,
    euler_grid_problem,
    fw_project,
    network_reliability,
    worst_case_profit,
    ProjectionProblem,
)
from motkit.core import (
    DenseTensor,
    DualWeights,
    Marginals,
    check_feasible,
    entropy,
    plan_cost,
    softmin,
)
from motkit.graphical import Factor, GraphicalCost
from motkit.lowrank import (
    LowRankFactors,
    LowRankPlusSparseCost,
    SparseComponent,
    lr_smin,
    _factored_values,
)
from motkit.oracles import (
    DenseCost,
    min_dense,
    oracle_amin,
    oracle_argmin,
    oracle_min,
    oracle_smin,
    smin_dense,
)
from motkit.setopt import SetOptCost, SetOracle, UGraph
from motkit.simplex import StandardFormLP, brute_force_mot, lp_solve, mot_constraints


def _verdict(num, label, errors, detail=""):
    ok = not errors
    extra = f" ({detail})" if detail else ""
    line = f"[{'PASS' if ok else 'FAIL'}] {num:02d} {label}{extra}"
    print(line)
    assert ok, line + " :: " + "; ".join(errors[:5])


# -- shared instance builders ------------------------------------------------


def dense_of(sc, n, k):
    vals = np.empty((n,) * k)
    for j in np.ndindex(*(n,) * k):
        vals[j] = sc.cost_entry(j)
    return DenseTensor(n, k, vals)


def random_graphical(rng):
    n = int(rng.integers(2, 5))
    k = int(rng.integers(2, 5))
    if k == 2:
        scopes = [(0, 1)]
    elif rng.random() < 0.5:
        scopes = [(i, i + 1) for i in range(k - 1)]
    else:
        scopes = [(i, i + 1) for i in range(k - 1)] + [(0, k - 1)]
    factors = [Factor(tuple(s), rng.normal(size=(n,) * len(s))) for s in scopes]
    return GraphicalCost(n, k, factors)


def explicit_set_oracle(n, k, members):
    members = [tuple(j) for j in members]
    member_set = set(members)

    def min_fn(p):
        return min(-sum(p[i, j[i]] for i in range(k)) for j in members)

    def smin_fn(p, eta):
        vals = np.asarray([-sum(p[i, j[i]] for i in range(k)) for j in members])
        shift = vals.min()
        return shift - np.log(np.exp(-eta * (vals - shift)).sum()) / eta

    return SetOracle(n=n, k=k, min_fn=min_fn, smin_fn=smin_fn,
                     contains=lambda j: tuple(j) in member_set)


def random_setopt(rng):
    n = int(rng.integers(2, 4))
    k = int(rng.integers(2, 5))
    size = check = n ** k
    count = int(rng.integers(1, min(check, 12) + 1))
    lin = rng.choice(size, size=count, replace=False)
    members = [tuple(np.unravel_index(l, (n,) * k)) for l in lin]
    return SetOptCost(explicit_set_oracle(n, k, members))


def random_lowrank(rng):
    n = int(rng.integers(2, 4))
    k = int(rng.integers(2, 4))
    r = int(rng.integers(1, 3))
    s = int(rng.integers(0, 4))
    u = rng.normal(size=(r, k, n)) * 0.1 ** (1.0 / k)
    R = LowRankFactors(u)
    if s:
        lin = rng.choice(n ** k, size=s, replace=False)
        idx = np.array(np.unravel_index(lin, (n,) * k)).T
        S = SparseComponent(k, idx, rng.normal(size=s) * 0.3)
    else:
        S = SparseComponent.empty(k)
    return LowRankPlusSparseCost(R, S)


def random_marginals(rng, n, k):
    mu = rng.random((k, n)) + 0.2
    mu /= mu.sum(axis=1, keepdims=True)
    return Marginals(mu)


def scaled_plan_dense(sp):
    """Explicit tensor of an implicit plan, evaluated against the exact
    cost the scaling ran on (the certified perturbed cost for low-rank)."""
    sc = sp.cost
    n, k = sc.n, sc.k
    if isinstance(sc, LowRankPlusSparseCost):
        L, _ = sc._get_lift(sp.eta)
        cost_at = lambda j: -math.log(L.entry(j)) / sp.eta + sc.S.entry(j)
    else:
        cost_at = sc.cost_entry
    out = np.empty((n,) * k)
    for j in np.ndindex(*(n,) * k):
        w = math.exp(-sp.eta * cost_at(j))
        out[j] = w * np.prod([sp.d[i, j[i]] for i in range(k)]) + \
            np.prod([sp.v[i, j[i]] for i in range(k)])
    return out


# -- 1: oracle equivalence sweep --------------------------------------------


class TestAcceptance:
    def test_01_oracle_equivalence_sweep(self):
        rng = np.random.default_rng(20260801)
        errors = []
        t0 = time.perf_counter()
        count = 0
        for trial in range(100):
            # graphical: MIN / ARGMIN exact, SMIN within 1e-9 relative
            sc = random_graphical(rng)
            t = dense_of(sc, sc.n, sc.k)
            p = DualWeights(rng.normal(size=(sc.k, sc.n)))
            eta = float(rng.uniform(0.5, 5.0))
            want = min_dense(t, p)
            if abs(oracle_min(sc, p) - want) > 1e-9:
                errors.append(f"graphical MIN off at trial {trial}")
            ans = oracle_argmin(sc, p)
            obj = t.at(ans.tuple) - sum(p.p[i, ans.tuple[i]] for i in range(sc.k))
            if abs(ans.value - want) > 1e-9 or abs(obj - want) > 1e-9:
                errors.append(f"graphical ARGMIN off at trial {trial}")
            ws = smin_dense(t, p, eta)
            if abs(oracle_smin(sc, p, eta) - ws) > 1e-9 * max(1.0, abs(ws)):
                errors.append(f"graphical SMIN off at trial {trial}")
            count += 1

            # set-opt: MIN / ARGMIN exact, SMIN within 1e-9 relative
            sc = random_setopt(rng)
            t = dense_of(sc, sc.n, sc.k)
            p = DualWeights(rng.normal(size=(sc.k, sc.n)) * 0.3)
            want = min_dense(t, p)
            if abs(oracle_min(sc, p) - want) > 1e-9:
                errors.append(f"setopt MIN off at trial {trial}")
            ans = oracle_argmin(sc, p)
            obj = t.at(ans.tuple) - sum(p.p[i, ans.tuple[i]] for i in range(sc.k))
            if abs(ans.value - want) > 1e-9 or abs(obj - want) > 1e-9:
                errors.append(f"setopt ARGMIN off at trial {trial}")
            ws = smin_dense(t, p, eta)
            if abs(oracle_smin(sc, p, eta) - ws) > 1e-9 * max(1.0, abs(ws)):
                errors.append(f"setopt SMIN off at trial {trial}")
            count += 1

            # low-rank: AMIN within eps = 0.1 of the enumerated minimum
            sc = random_lowrank(rng)
            t = dense_of(sc, sc.n, sc.k)
            p = DualWeights(rng.normal(size=(sc.k, sc.n)) * 0.2)
            want = min_dense(t, p)
            if abs(oracle_amin(sc, p, 0.1) - want) > 0.1 + 1e-9:
                errors.append(f"lowrank AMIN off at trial {trial}")
            count += 1
        elapsed = time.perf_counter() - t0
        if count < 300:
            errors.append(f"only {count} instances")
        if elapsed >= 60.0:
            errors.append(f"sweep took {elapsed:.1f}s >= 60s")
        _verdict(1, "oracle equivalence sweep", errors,
                 f"{count} instances, {elapsed:.1f}s")

    # -- 2: exact column generation -----------------------------------------

    def test_02_colgen_exactness(self):
        rng = np.random.default_rng(20260802)
        errors = []
        for trial in range(100):
            for sc in (random_graphical(rng), random_setopt(rng)):
                n, k = sc.n, sc.k
                m = random_marginals(rng, n, k)
                opt, _ = brute_force_mot(dense_of(sc, n, k), m)
                rep = colgen_solve(sc, m)
                if abs(rep.value - opt) > 1e-6:
                    errors.append(f"value gap {abs(rep.value - opt):.2e} at trial {trial}")
                if rep.plan.nnz > n * k - k + 1:
                    errors.append(f"nnz {rep.plan.nnz} > {n * k - k + 1} at trial {trial}")
                if not check_feasible(rep.plan, m):
                    errors.append(f"infeasible plan at trial {trial}")
        _verdict(2, "column generation exact within 1e-6, vertex-sparse", errors,
                 "200 instances")

    # -- 3: scaling engine guarantee ----------------------------------------

    def test_03_sinkhorn_guarantee(self):
        rng = np.random.default_rng(20260803)
        errors = []
        builders = [random_graphical] * 6 + [random_lowrank] * 6
        for trial, build in enumerate(builders):
            sc = build(rng)
            n, k = sc.n, sc.k
            m = random_marginals(rng, n, k)
            t = dense_of(sc, n, k)
            opt, _ = brute_force_mot(t, m)
            rep = sinkhorn_solve(sc, m, eps=0.1)
            sp = rep.plan
            for i in range(k):
                if np.abs(sp.marginal(i) - m.mu[i]).sum() > 1e-7:
                    errors.append(f"marginal {i} infeasible at trial {trial}")
            dense = scaled_plan_dense(sp)
            exact = float((dense * t.values).sum())
            if not (opt - 1e-9 <= exact <= opt + 0.1 + 1e-9):
                errors.append(f"cost {exact:.6f} vs opt {opt:.6f} at trial {trial}")
            samples = sample_scaled_plan(sp, rng_seed=424242, count=10_000)
            vals = np.array([t.at(j) for j in samples])
            est = float(vals.mean()) * float(dense.sum())
            sigma = float(vals.std()) / math.sqrt(len(vals)) + 1e-12
            if abs(est - exact) > 3.0 * sigma + 1e-9:
                errors.append(f"sampled estimate {abs(est - exact):.2e} > 3 sigma "
                              f"{3 * sigma:.2e} at trial {trial}")
        _verdict(3, "sinkhorn eps-guarantee and sampled estimate", errors,
                 "12 instances, eps=0.1")

    # -- 4: multiplicative weights guarantee --------------------------------

    def test_04_mwu_guarantee(self):
        rng = np.random.default_rng(20260804)
        eps = 0.1
        errors = []
        for trial in range(8):
            n = int(rng.integers(2, 4))
            k = int(rng.integers(2, 4))
            t = DenseTensor(n, k, rng.random((n,) * k))
            sc = DenseCost(t)
            m = random_marginals(rng, n, k)
            opt, _ = brute_force_mot(t, m)
            rep = mwu_solve(sc, m, eps)
            if not check_feasible(rep.plan, m):
                errors.append(f"rounded plan infeasible at trial {trial}")
            if not (opt - 1e-9 <= rep.value <= opt + eps + 1e-9):
                errors.append(f"value {rep.value:.4f} vs opt {opt:.4f} at trial {trial}")
            if rep.plan.nnz > 10.0 * n * k / eps ** 2:
                errors.append(f"nnz {rep.plan.nnz} over budget at trial {trial}")
        errors += self._audit_potential_invariant(eps)
        _verdict(4, "mwu eps-guarantee and potential invariant", errors,
                 "8 instances + 3 audited runs, eps=0.1")

    @staticmethod
    def _audit_potential_invariant(eps):
        """Replay greedy mass additions and check, at every iteration, that
        the softmax potential stays within log(nk+1) of (1+eps)^2 times the
        accumulated mass."""
        errors = []
        for seed in (11, 12, 13):
            rng = np.random.default_rng(20260810 + seed)
            n, k = 3, 3
            t = DenseTensor(n, k, 1.0 + rng.random((n,) * k))  # entries in [1, 2]
            sc = DenseCost(t)
            m = random_marginals(rng, n, k)
            opt, _ = brute_force_mot(t, m)
            lam = opt + 0.1
            mu = m.mu
            tuples = list(np.ndindex(*(n,) * k))
            entries = {}
            cost = mass = 0.0
            marg = np.zeros((k, n))
            budget = math.log(n * k + 1.0)
            for it in range(300):
                # exact potential and the best available direction
                terms = [cost / lam] + [marg[i, j] / mu[i, j]
                                        for i in range(k) for j in range(n)]
                phi = float(np.logaddexp.reduce(terms))
                if phi - (1.0 + eps) ** 2 * mass > budget + 1e-9:
                    errors.append(f"potential invariant broken at seed {seed} "
                                  f"iter {it}")
                    break
                z = float(np.exp(np.asarray(terms) - max(terms)).sum())
                best, best_v = None, math.inf
                for j in tuples:
                    num = math.exp(cost / lam - max(terms)) * t.at(j) / lam
                    for i in range(k):
                        num += math.exp(marg[i, j[i]] / mu[i, j[i]] - max(terms)) \
                            / mu[i, j[i]]
                    if num / z < best_v:
                        best, best_v = j, num / z
                if best_v > 1.0 + eps / 3.0:
                    errors.append(f"no admissible direction at seed {seed} iter {it}")
                    break
                cj = t.at(best)
                delta = eps * min(lam / cj, min(mu[i, best[i]] for i in range(k)))
                entries[best] = entries.get(best, 0.0) + delta
                cost += cj * delta
                mass += delta
                for i in range(k):
                    marg[i, best[i]] += delta
        return errors

    # -- 5: softmin sandwich and entropy ceiling ----------------------------

    def test_05_softmin_and_entropy_properties(self):
        rng = np.random.default_rng(20260805)
        errors = []
        sandwich_bad = entropy_bad = 0
        for _ in range(10_000):
            mlen = int(rng.integers(2, 28))
            a = rng.normal(size=mlen) * rng.uniform(0.1, 3.0)
            eta = float(rng.uniform(0.2, 50.0))
            sm = softmin(a, eta)
            lo, hi = float(a.min()) - math.log(mlen) / eta, float(a.min())
            if not (lo - 1e-9 <= sm <= hi + 1e-9):
                sandwich_bad += 1
            n = int(rng.integers(2, 5))
            k = int(rng.integers(2, 5))
            if n ** k <= 256:
                w = rng.dirichlet(np.ones(n ** k) * rng.uniform(0.2, 3.0))
                if entropy(w) > k * math.log(n) + 1e-9:
                    entropy_bad += 1
        # the same sandwich through the dense oracle pair
        for _ in range(500):
            n, k = int(rng.integers(2, 4)), int(rng.integers(2, 4))
            t = DenseTensor(n, k, rng.normal(size=(n,) * k))
            p = DualWeights(rng.normal(size=(k, n)))
            eta = float(rng.uniform(0.5, 20.0))
            mn, sm = min_dense(t, p), smin_dense(t, p, eta)
            if not (mn - k * math.log(n) / eta - 1e-9 <= sm <= mn + 1e-9):
                sandwich_bad += 1
        if sandwich_bad:
            errors.append(f"{sandwich_bad} sandwich violations")
        if entropy_bad:
            errors.append(f"{entropy_bad} entropy ceiling violations")
        _verdict(5, "softmin sandwich and entropy ceiling", errors,
                 "10500 trials, zero violations required")

    # -- 6: Euler flow benchmark --------------------------------------------

    def test_06_euler_flow(self):
        errors = []
        # desk scale: n=15, k=4, half-shift coupling
        pr = euler_grid_problem(15, 4, "shift-half")
        sc = build_euler_flow_cost(pr)
        m = euler_flow_marginals(pr)
        t0 = time.perf_counter()
        rep = colgen_solve(sc, m)
        t_colgen = time.perf_counter() - t0
        if t_colgen >= 60.0:
            errors.append(f"colgen took {t_colgen:.1f}s >= 60s")
        if rep.status != "optimal":
            errors.append(f"colgen status {rep.status}")
        if rep.plan.nnz > 57:  # nk - k + 1
            errors.append(f"nnz {rep.plan.nnz} > 57")
        approx = sinkhorn_solve(sc, m, eps=0.1)
        if abs(approx.value - rep.value) > 0.1 + 1e-9:
            errors.append(f"sinkhorn off by {abs(approx.value - rep.value):.4f}")
        # brute-force cross-check at n=5, k=3
        pr_s = euler_grid_problem(5, 3, "shift-half")
        sc_s = build_euler_flow_cost(pr_s)
        m_s = euler_flow_marginals(pr_s)
        opt, _ = brute_force_mot(dense_of(sc_s, 5, 3), m_s)
        small = colgen_solve(sc_s, m_s)
        if abs(small.value - opt) > 1e-6:
            errors.append(f"small colgen off by {abs(small.value - opt):.2e}")
        small_sk = sinkhorn_solve(sc_s, m_s, eps=0.1)
        if not (opt - 1e-9 <= small_sk.value <= opt + 0.1 + 0.02):
            errors.append(f"small sinkhorn value {small_sk.value:.4f} vs opt {opt:.4f}")
        # scale smoke: n=51, k=6 must merely complete under ten minutes
        pr_l = euler_grid_problem(51, 6, "shift-half")
        sc_l = build_euler_flow_cost(pr_l)
        t0 = time.perf_counter()
        rep_l = colgen_solve(sc_l, euler_flow_marginals(pr_l))
        t_smoke = time.perf_counter() - t0
        if t_smoke >= 600.0:
            errors.append(f"scale smoke took {t_smoke:.0f}s >= 600s")
        if rep_l.status != "optimal":
            errors.append(f"scale smoke status {rep_l.status}")
        _verdict(6, "euler flow benchmark", errors,
                 f"n=15 colgen {t_colgen:.1f}s, n=51 smoke {t_smoke:.0f}s")

    # -- 7: network reliability ---------------------------------------------

    @staticmethod
    def _independent_connectivity(g, q):
        total = 0.0
        for state in itertools.product([0, 1], repeat=g.ne):
            p = np.prod([q[e] if state[e] else 1.0 - q[e] for e in range(g.ne)])
            if g.is_connected(keep=state):
                total += p
        return total

    @staticmethod
    def _brute_reliability(g, q, mode):
        m = Marginals(np.stack([1.0 - np.asarray(q), np.asarray(q)], axis=1))
        vals = np.empty((2,) * g.ne)
        for state in np.ndindex(*(2,) * g.ne):
            conn = g.is_connected(keep=state)
            vals[state] = (1.0 if conn else 0.0) if mode == "worst" else \
                (0.0 if conn else 1.0)
        value, _ = brute_force_mot(DenseTensor(2, g.ne, vals), m)
        return value if mode == "worst" else 1.0 - value

    def test_07_reliability(self):
        rng = np.random.default_rng(20260807)
        errors = []
        checked = 0
        for v in (2, 3, 4):
            all_edges = list(itertools.combinations(range(v), 2))
            for ne in range(1, min(len(all_edges), 6) + 1):
                for edges in itertools.combinations(all_edges, ne):
                    g = UGraph(v, list(edges))
                    if not g.is_connected(keep=[1] * ne):
                        continue
                    q = rng.uniform(0.05, 0.95, size=ne)
                    ind = self._independent_connectivity(g, q)
                    lo = network_reliability(ReliabilityProblem(g, q, "worst"))
                    hi = network_reliability(ReliabilityProblem(g, q, "best"))
                    if abs(lo.probability - self._brute_reliability(g, q, "worst")) > 1e-6:
                        errors.append(f"worst off on {v}v/{edges}")
                    if abs(hi.probability - self._brute_reliability(g, q, "best")) > 1e-6:
                        errors.append(f"best off on {v}v/{edges}")
                    if not (lo.probability <= ind + 1e-9 <= hi.probability + 2e-9):
                        errors.append(f"sandwich broken on {v}v/{edges}")
                    checked += 1
        # closed forms: series min(q1,q2) / max(0, q1+q2-1), parallel of two edges
        g = UGraph(3, [(0, 1), (1, 2)])
        best = network_reliability(ReliabilityProblem(g, [0.8, 0.7], "best"))
        worst = network_reliability(ReliabilityProblem(g, [0.8, 0.7], "worst"))
        if abs(best.probability - 0.7) > 1e-9 or abs(worst.probability - 0.5) > 1e-9:
            errors.append("series closed form off")
        g = UGraph(2, [(0, 1), (0, 1)])
        best = network_reliability(ReliabilityProblem(g, [0.6, 0.3], "best"))
        worst = network_reliability(ReliabilityProblem(g, [0.6, 0.3], "worst"))
        if abs(best.probability - 0.9) > 1e-9 or abs(worst.probability - 0.6) > 1e-9:
            errors.append("parallel closed form off")
        # scale smoke: complete graph on 8 vertices (28 edges), mwu engine
        g8 = UGraph(8, list(itertools.combinations(range(8), 2)))
        q8 = rng.uniform(0.85, 0.99, size=g8.ne)
        t0 = time.perf_counter()
        res = network_reliability(ReliabilityProblem(g8, q8, "worst"), "mwu", eps=0.05)
        t_smoke = time.perf_counter() - t0
        if t_smoke >= 120.0:
            errors.append(f"clique smoke took {t_smoke:.0f}s >= 120s")
        if not (0.0 - 1e-9 <= res.probability <= 1.0 + 1e-9):
            errors.append(f"clique probability {res.probability} out of [0,1]")
        _verdict(7, "network reliability", errors,
                 f"{checked} graphs exhaustive, clique smoke {t_smoke:.0f}s")

    # -- 8: worst-case risk -------------------------------------------------

    def test_08_risk(self):
        errors = []
        # desk scale vs brute force, both engines
        n, k = 5, 4
        atoms = np.tile(1.0 + np.arange(n) / (n - 1) / k, (1, k, 1))
        probs = np.full((1, k, n), 1.0 / n)
        pr = RiskProblem(atoms, probs)
        sc = build_risk_cost(pr)
        opt, _ = brute_force_mot(dense_of(sc, n, k), pr.marginals())
        for engine in ("sinkhorn", "mwu"):
            val = worst_case_profit(pr, engine, eps=0.1)
            if abs(val - opt) > 0.1:
                errors.append(f"{engine} off by {abs(val - opt):.4f}")
        # scale smoke: 3 stocks x 10 years = 30 marginals on 10 atoms
        rng = np.random.default_rng(20260808)
        atoms = rng.uniform(0.8, 1.25, size=(3, 10, 10))
        probs = rng.dirichlet(np.ones(10), size=(3, 10))
        pr_l = RiskProblem(atoms, probs)
        t0 = time.perf_counter()
        val = worst_case_profit(pr_l, "sinkhorn", eps=0.1)
        t_smoke = time.perf_counter() - t0
        lo = sum(atoms[i].min(axis=1).prod() for i in range(3))
        hi = sum(atoms[i].max(axis=1).prod() for i in range(3))
        if t_smoke >= 60.0:
            errors.append(f"scale smoke took {t_smoke:.0f}s >= 60s")
        if not (lo - 1e-9 <= val <= hi + 1e-9):
            errors.append(f"smoke value {val:.4f} outside [{lo:.4f}, {hi:.4f}]")
        _verdict(8, "worst-case risk", errors, f"smoke {t_smoke:.0f}s")

    # -- 9: low-rank lift certification -------------------------------------

    def test_09_lift_certification(self):
        rng = np.random.default_rng(20260809)
        errors = []
        for trial in range(5):
            c = random_lowrank(rng)
            eta = float(rng.uniform(1.0, 8.0))
            p = DualWeights(rng.normal(size=(c.k, c.n)) * 0.3)
            got = lr_smin(c, p, eta)
            audit = c.last_audit
            if audit is None or audit["lift_error"] > audit["eps_tilde"]:
                errors.append(f"lift audit failed at trial {trial}")
            if audit and audit["cost_perturbation"] > audit["eps"] / 2 + 1e-12:
                errors.append(f"perturbation budget broken at trial {trial}")
            # independent sampled sup-errors on fresh tuples
            L, eps_tilde = c._get_lift(eta)
            idx = rng.integers(0, c.n, size=(10_000, c.k))
            r_vals = _factored_values(c.R, idx)
            l_vals = _factored_values(L, idx)
            if np.abs(l_vals - np.exp(-eta * r_vals)).max() > eps_tilde + 1e-15:
                errors.append(f"sampled lift error over budget at trial {trial}")
            pert = np.abs(-np.log(l_vals) / eta - r_vals).max()
            if pert > audit["eps"] / 2 + 1e-12:
                errors.append(f"sampled cost perturbation over eps/2 at trial {trial}")
            # softmin agrees with the dense softmin of the explicit
            # perturbed cost to 1e-8 relative
            vals = np.empty((c.n,) * c.k)
            for j in np.ndindex(*(c.n,) * c.k):
                vals[j] = -math.log(L.entry(j)) / eta + c.S.entry(j)
            want = smin_dense(DenseTensor(c.n, c.k, vals), p, eta)
            if abs(got - want) > 1e-8 * max(1.0, abs(want)):
                errors.append(f"lr_smin off by {abs(got - want):.2e} at trial {trial}")
        _verdict(9, "low-rank lift certification", errors,
                 "5 lifts, 1e4 samples each")

    # -- 10: projection by conditional gradient -----------------------------

    @staticmethod
    def _dense_fw_reference(Q, m, eps_gap):
        n, k = m.n, m.k
        A = mot_constraints(n, k)
        b = m.mu.reshape(-1)
        sol = lp_solve(StandardFormLP(A, b, np.zeros(n ** k)))
        P = sol.x.reshape((n,) * k)
        for t in range(100_000):
            grad = 2.0 * (P - Q)
            sol = lp_solve(StandardFormLP(A, b, grad.reshape(-1)))
            D = sol.x.reshape((n,) * k)
            gap = float((grad * (P - D)).sum())
            if gap <= eps_gap:
                break
            P = P + 2.0 / (t + 2.0) * (D - P)
        return float(((P - Q) ** 2).sum())

    def test_10_fw_projection(self):
        errors = []
        eps = 0.2
        # feasible target: a product of the marginals projects onto itself
        rng = np.random.default_rng(20260810)
        mu = rng.random((2, 3)) + 0.3
        mu /= mu.sum(axis=1, keepdims=True)
        pr = ProjectionProblem(LowRankFactors(mu[None, :, :]),
                               SparseComponent.empty(2), Marginals(mu), eps)
        res = fw_project(pr)
        if not check_feasible(res.plan, pr.m):
            errors.append("feasible-Q plan infeasible")
        if res.objective > eps:
            errors.append(f"feasible-Q objective {res.objective:.4f} > {eps}")
        # corrupted entry: within 2 eps of a tight dense reference run
        m = Marginals.uniform(2, 2)
        corrupt = SparseComponent(2, np.array([[0, 1]]), np.array([1.0]))
        mu2 = m.mu
        pr2 = ProjectionProblem(LowRankFactors(mu2[None, :, :]), corrupt, m, eps)
        res2 = fw_project(pr2)
        Q = mu2[0][:, None] * mu2[1][None, :]
        Q[0, 1] += 1.0
        ref = self._dense_fw_reference(Q, m, eps / 10.0)
        if res2.objective > ref + 2 * eps:
            errors.append(f"corrupted objective {res2.objective:.4f} > ref + 2 eps")
        # the gap certificate never understates the true suboptimality
        for seed in range(4):
            rng = np.random.default_rng(20260820 + seed)
            mu3 = rng.random((2, 2)) + 0.3
            mu3 /= mu3.sum(axis=1, keepdims=True)
            m3 = Marginals(mu3)
            extra = SparseComponent(2, np.array([[0, 0]]),
                                    np.array([rng.uniform(0.2, 1.0)]))
            pr3 = ProjectionProblem(LowRankFactors(mu3[None, :, :]), extra, m3, eps)
            res3 = fw_project(pr3)
            Q3 = mu3[0][:, None] * mu3[1][None, :]
            Q3[0, 0] += extra.values[0]
            best = self._dense_fw_reference(Q3, m3, eps / 50.0)
            if res3.gap + 1e-9 < res3.objective - best:
                errors.append(f"gap understates suboptimality at seed {seed}")
        _verdict(10, "conditional-gradient projection", errors,
                 "feasible, corrupted, and certificate checks")
