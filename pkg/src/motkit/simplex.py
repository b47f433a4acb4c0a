"""Dense two-phase primal simplex and the brute-force MOT baseline.

Solves small standard-form LPs  min c^T x  s.t.  A x = b, x >= 0  with a
tableau implementation.  Bland's rule guards against cycling (entering by
most-negative reduced cost normally, switching to smallest-index after a
streak of degenerate pivots).  Redundant rows -- MOT instances carry k-1
of them -- are handled by keeping Phase-1 artificials in the basis at
level zero.

``brute_force_mot`` expands the n^k-variable transport LP explicitly and
is the exact reference for every engine at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConvergenceError,
    DenseTensor,
    Marginals,
    MotError,
    SparsePlan,
    all_tuples,
    check_brute_cap,
)

_EPS = 1e-10
_DEGENERATE_STREAK = 50  # pivots without objective progress before Bland kicks in
_REFACTOR_EVERY = 200    # pivots between tableau refactorizations


@dataclass
class StandardFormLP:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        m, n = self.A.shape
        if self.b.shape[0] != m or self.c.shape[0] != n:
            raise MotError("LP dimensions are inconsistent")


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    value: float | None = None
    basis: list = field(default_factory=list)
    duals: np.ndarray | None = None


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _choose_entering(zrow: np.ndarray, allowed: np.ndarray, bland: bool):
    red = np.where(allowed, zrow, np.inf)
    neg = red < -1e-9
    if not neg.any():
        return None
    if bland:
        return int(np.flatnonzero(neg)[0])
    return int(np.argmin(red))


def _choose_leaving(T: np.ndarray, basis: np.ndarray, col: int, m: int):
    column = T[:m, col]
    # refuse tiny pivot elements: they blow up the basis condition number
    ok = column > 1e-9
    if not ok.any():
        return None
    # clamp rhs drifted slightly negative so that row exits immediately
    rhs = np.maximum(T[:m, -1], 0.0)
    ratios = np.where(ok, rhs / np.where(ok, column, 1.0), np.inf)
    best = ratios.min()
    # among (near-)ties prefer the largest pivot element for stability;
    # cycling is handled by the rhs perturbation, not the tie-break
    cand = np.flatnonzero(ratios <= best + 1e-9 * (1.0 + abs(best)))
    return int(cand[np.argmax(column[cand])])


def _refactor(Afull, b, obj, basis, m):
    """Rebuild the tableau exactly from the current basis.

    Long pivot sequences on degenerate masters accumulate enough drift in
    the reduced-cost row for phantom entering columns to defeat Bland's
    anti-cycling; recomputing B^{-1}[A | b] restores accuracy.
    """
    B = Afull[:, basis]
    try:
        body = np.linalg.solve(B, np.column_stack([Afull, b]))
    except np.linalg.LinAlgError:
        return None
    T = np.empty((m + 1, Afull.shape[1] + 1))
    T[:m] = body
    T[-1, :-1] = obj
    T[-1, -1] = 0.0
    T[-1] -= obj[basis] @ body
    return T


def _run_simplex(T, basis, allowed, m, cap, refactor=None, perturb=None):
    """Iterate pivots to optimality; returns 'optimal' or 'unbounded'."""
    degen = 0
    since_refactor = 0
    last_obj = T[-1, -1]
    for _ in range(cap):
        col = _choose_entering(T[-1, :-1], allowed, bland=degen >= _DEGENERATE_STREAK)
        if col is None:
            # verify optimality on a fresh tableau only when enough pivots
            # have accumulated for reduced-cost drift to matter
            if refactor is not None and since_refactor >= 40:
                fresh = refactor(basis)
                if fresh is not None:
                    T[:] = fresh
                    since_refactor = 0
                    col = _choose_entering(T[-1, :-1], allowed,
                                           bland=degen >= _DEGENERATE_STREAK)
            if col is None:
                return "optimal"
        if perturb is not None and degen >= 2 * _DEGENERATE_STREAK:
            # stuck on a degenerate plateau: lift every basic variable
            # strictly off zero so the next ratio tests have no ties
            perturb(T, basis)
            degen = 0
            last_obj = -np.inf
        row = _choose_leaving(T, basis, col, m)
        if row is None:
            return "unbounded"
        _pivot(T, basis, row, col)
        since_refactor += 1
        if refactor is not None and since_refactor >= _REFACTOR_EVERY:
            fresh = refactor(basis)
            if fresh is not None:
                T[:] = fresh
                since_refactor = 0
        if T[-1, -1] > last_obj + _EPS:
            degen = 0
            last_obj = T[-1, -1]
        else:
            degen += 1
    raise ConvergenceError("simplex iteration cap reached (numerical stall)")


def lp_solve(lp: StandardFormLP, max_iters: int | None = None,
             warm_basis=None) -> LpSolution:
    """Two-phase primal simplex; returns a vertex solution with exact duals.

    ``warm_basis`` (column indices, length m) skips Phase 1 when it is
    still primal feasible -- e.g. the optimal basis of the same LP before
    extra columns were appended.
    """
    A = lp.A.copy()
    b = lp.b.copy()
    c = lp.c.copy()
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    cap = max_iters if max_iters is not None else 50 * (m + n)

    # Anti-degeneracy: when pivoting stalls on a degenerate plateau, lift
    # the basic variables of the *current* vertex strictly off zero by a
    # tiny random rhs shift along the basic columns (b <- b + A_B inc, so
    # the tableau update is just T[:,-1] += inc and feasibility survives).
    # The accumulated shift lives in w_full so refactorizations stay
    # consistent; the optimal basis is dual feasible for the true LP (c is
    # untouched) and the returned vertex is recomputed from the true rhs.
    b_true = b.copy()
    rng = np.random.default_rng(1234567)
    scale = 1e-8 * max(1.0, float(np.abs(b_true).max()))
    w_full = np.zeros(n + m)

    Afull = np.hstack([A, np.eye(m)])
    obj2 = np.concatenate([c, np.zeros(m)])
    T = None
    basis = None
    allowed = np.ones(n + m, dtype=bool)

    def refactor_for(obj):
        def do(bas):
            return _refactor(Afull, b_true + Afull @ w_full, obj, bas, m)
        return do

    def perturb(T, bas):
        inc = rng.uniform(1.0, 2.0, size=m) * scale
        w_full[bas] += inc
        T[:m, -1] += inc

    if warm_basis is not None and len(warm_basis) == m:
        cand = np.asarray(warm_basis, dtype=np.intp)
        if cand.max() < n + m and len(set(cand.tolist())) == m:
            fresh = _refactor(Afull, b_true, obj2, cand, m)
            if fresh is not None and fresh[:m, -1].min() >= -1e-9 * max(
                    1.0, float(np.abs(b_true).max())):
                T = fresh
                np.clip(T[:m, -1], 0.0, None, out=T[:m, -1])
                basis = cand.copy()

    if T is None:
        # Phase 1: artificial basis, minimize artificial mass
        T = np.zeros((m + 1, n + m + 1))
        T[:m, :n + m] = Afull
        T[:m, -1] = b_true
        basis = np.arange(n, n + m)
        obj = np.zeros(n + m + 1)
        obj[n:n + m] = 1.0
        T[-1] = obj - T[:m].sum(axis=0)  # reduce against the artificial basis
        obj1 = obj[:-1]
        status = _run_simplex(T, basis, allowed, m, cap,
                              refactor=refactor_for(obj1), perturb=perturb)
        if status == "unbounded":  # cannot happen with c >= 0 in phase 1
            raise MotError("phase 1 reported unbounded")
        # decide feasibility from the true artificial mass at this basis
        # (the tableau rhs carries any anti-degeneracy shifts)
        try:
            xB1 = np.linalg.solve(Afull[:, basis], b_true)
        except np.linalg.LinAlgError:
            xB1 = np.linalg.lstsq(Afull[:, basis], b_true, rcond=None)[0]
        art_mass = float(np.maximum(xB1[basis >= n], 0.0).sum())
        if art_mass > 1e-8 * max(1.0, float(np.abs(b_true).max())):
            return LpSolution(status="infeasible")

        # drive artificials out of the basis where a real pivot exists;
        # rows where none exists are redundant and keep a zero-level artificial
        for r in range(m):
            if basis[r] >= n:
                pivots = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
                if pivots.size:
                    _pivot(T, basis, r, int(pivots[0]))

        # Phase 2 on the original objective
        T[-1, :] = 0.0
        T[-1, :n] = c
        in_basis_real = [r for r in range(m) if basis[r] < n]
        for r in in_basis_real:
            T[-1] -= c[basis[r]] * T[r]

    # artificials may not (re-)enter in phase 2
    allowed[n:] = False
    status = _run_simplex(T, basis, allowed, m, cap,
                          refactor=refactor_for(obj2), perturb=perturb)
    if status == "unbounded":
        return LpSolution(status="unbounded")

    # vertex and duals from the final basis on the unperturbed rhs
    # (artificial column of a redundant row r is e_r with zero cost)
    B = np.zeros((m, m))
    cB = np.zeros(m)
    for r in range(m):
        if basis[r] < n:
            B[:, r] = A[:, basis[r]]
            cB[r] = c[basis[r]]
        else:
            B[basis[r] - n, r] = 1.0
    try:
        xB = np.linalg.solve(B, b_true)
        duals = np.linalg.solve(B.T, cB)
    except np.linalg.LinAlgError:
        xB = np.linalg.lstsq(B, b_true, rcond=None)[0]
        duals = np.linalg.lstsq(B.T, cB, rcond=None)[0]
    x = np.zeros(n)
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = max(float(xB[r]), 0.0)
    value = float(c @ x)
    duals[flip] *= -1.0
    return LpSolution(status="optimal", x=x, value=value,
                      basis=[int(j) for j in basis], duals=duals)


def mot_constraints(n: int, k: int) -> np.ndarray:
    """The nk x n^k marginal constraint matrix of the transport polytope."""
    size = check_brute_cap(n, k)
    tuples = all_tuples(n, k)
    A = np.zeros((n * k, size))
    cols = np.arange(size)
    for i in range(k):
        A[i * n + tuples[:, i], cols] = 1.0
    return A


def brute_force_mot(t: DenseTensor, m: Marginals) -> tuple[float, SparsePlan]:
    """Exact MOT optimum via the explicit n^k-variable LP."""
    if (t.n, t.k) != (m.n, m.k):
        raise MotError("cost tensor and marginals dimensions differ")
    A = mot_constraints(t.n, t.k)
    lp = StandardFormLP(A, m.mu.reshape(-1), t.values.reshape(-1))
    sol = lp_solve(lp)
    if sol.status != "optimal":
        raise MotError(f"transport LP unexpectedly {sol.status}")
    support = np.flatnonzero(sol.x > 1e-12)
    idx = np.array(np.unravel_index(support, (t.n,) * t.k)).T
    plan = SparsePlan(t.n, t.k, idx.reshape(-1, t.k), sol.x[support])
    return sol.value, plan
