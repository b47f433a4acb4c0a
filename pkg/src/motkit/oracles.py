"""Dual-feasibility oracles and the reductions between their variants.

A cost tensor is exposed to the solver engines only through whichever of
the oracles MIN / ARGMIN / AMIN / ARGAMIN / SMIN / MARG its structure
supports:

  MIN(p)        exact  min_j  C_j - sum_i p_i[j_i]
  AMIN(p, eps)  the same within additive eps
  SMIN(p, eta)  softmin_eta of the same objective
  ARGMIN/ARGAMIN  also return a minimizing tuple
  MARG(d, eta, i) i-th marginal of (tensor-prod d) * exp(-eta C)

This module defines the abstract cost interface, a brute-force dense
backend (the test oracle), and the generic reductions: ARGMIN from MIN by
coordinate masking, ARGAMIN from AMIN, SMIN <-> MARG, and AMIN from
SMIN/MIN.  Dispatch helpers pick a native oracle when present and fall
back to a reduction otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    NEG_INF,
    CapabilityError,
    DenseTensor,
    DualWeights,
    MotError,
    OracleViolationError,
    linear_to_tuple,
    softmin,
)

MIN = "min"
ARGMIN = "argmin"
AMIN = "amin"
ARGAMIN = "argamin"
SMIN = "smin"
MARG = "marg"

ALL_ORACLES = frozenset({MIN, ARGMIN, AMIN, ARGAMIN, SMIN, MARG})


@dataclass(frozen=True)
class OracleAnswerArg:
    """A minimizing tuple together with its (possibly approximate) value."""

    tuple: tuple
    value: float


class StructuredCost:
    """A cost over [n]^k exposed through a bundle of oracles.

    Subclasses set ``n``, ``k``, ``cmax`` and override the oracle methods
    they can answer, listing them in ``capabilities``.  ``cost_entry``
    (pointwise evaluation of C) is required by MWU and by cost reporting
    and is not an oracle in the dual-feasibility sense.
    """

    n: int
    k: int
    cmax: float
    capabilities: frozenset = frozenset()

    def supports(self, name: str) -> bool:
        return name in self.capabilities

    def cost_entry(self, j) -> float:
        raise NotImplementedError

    def eta_max(self) -> float:
        """Largest regularization the backend can evaluate accurately."""
        return float("inf")

    def amin_accuracy(self, eps: float) -> float:
        """Accuracy AMIN actually achieves when asked for ``eps``.

        Backends whose AMIN routes through a capped regularization cannot
        honor arbitrarily small eps; reductions layered on top consult
        this to widen their tolerances instead of flagging spurious
        oracle violations.
        """
        return eps

    # oracle methods; subclasses override the supported subset
    def min_value(self, p: DualWeights) -> float:
        raise CapabilityError(f"{type(self).__name__} does not support MIN")

    def argmin(self, p: DualWeights) -> OracleAnswerArg:
        raise CapabilityError(f"{type(self).__name__} does not support ARGMIN")

    def amin(self, p: DualWeights, eps: float) -> float:
        raise CapabilityError(f"{type(self).__name__} does not support AMIN")

    def argamin(self, p: DualWeights, eps: float) -> OracleAnswerArg:
        raise CapabilityError(f"{type(self).__name__} does not support ARGAMIN")

    def smin(self, p: DualWeights, eta: float) -> float:
        raise CapabilityError(f"{type(self).__name__} does not support SMIN")

    def marg(self, d: np.ndarray, eta: float, i: int) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} does not support MARG")


# ---------------------------------------------------------------------------
# dense brute-force backend


def _dense_objective(t: DenseTensor, p: DualWeights) -> np.ndarray:
    """C_j - sum_i p_i[j_i] over the full tensor (masked entries -> +inf)."""
    if (p.k, p.n) != (t.k, t.n):
        raise MotError("dual weight dimensions do not match the cost")
    obj = t.values.copy()
    for i in range(t.k):
        shape = [1] * t.k
        shape[i] = t.n
        with np.errstate(invalid="ignore"):
            obj = obj - p.p[i].reshape(shape)
    # C - (-inf) = +inf: a masked coordinate excludes the tuple
    return obj


def min_dense(t: DenseTensor, p: DualWeights) -> float:
    """Exact MIN by enumeration (requires finite p)."""
    if not p.is_finite():
        raise MotError("min_dense requires finite dual weights")
    return float(_dense_objective(t, p).min())


def argmin_dense(t: DenseTensor, p: DualWeights) -> OracleAnswerArg:
    obj = _dense_objective(t, p).reshape(-1)
    lin = int(np.argmin(obj))  # first occurrence = lexicographically smallest
    return OracleAnswerArg(linear_to_tuple(lin, t.n, t.k), float(obj[lin]))

def smin_dense(t: DenseTensor, p: DualWeights, eta: float) -> float:
    """SMIN by log-sum-exp enumeration; -inf weights exclude their tuples."""
    return softmin(_dense_objective(t, p).reshape(-1), eta)


def marg_dense(t: DenseTensor, d: np.ndarray, eta: float, i: int) -> np.ndarray:
    """i-th marginal of (tensor-prod d) * exp(-eta C), by enumeration."""
    d = np.asarray(d, dtype=float)
    scaled = np.exp(-eta * t.values)
    for s in range(t.k):
        shape = [1] * t.k
        shape[s] = t.n
        scaled = scaled * d[s].reshape(shape)
    axes = tuple(a for a in range(t.k) if a != i)
    return scaled.sum(axis=axes) if axes else scaled


class DenseCost(StructuredCost):
    """Explicit tensor backend supporting every oracle exactly."""

    capabilities = ALL_ORACLES

    def __init__(self, t: DenseTensor, cmax: float | None = None):
        self.tensor = t
        self.n = t.n
        self.k = t.k
        self.cmax = float(np.abs(t.values).max()) if cmax is None else float(cmax)

    def cost_entry(self, j) -> float:
        return self.tensor.at(j)

    def min_value(self, p):
        return min_dense(self.tensor, p)

    def argmin(self, p):
        return argmin_dense(self.tensor, p)

    def amin(self, p, eps):
        return min_dense(self.tensor, p)

    def argamin(self, p, eps):
        return argmin_dense(self.tensor, p)

    def smin(self, p, eta):
        return smin_dense(self.tensor, p, eta)

    def marg(self, d, eta, i):
        return marg_dense(self.tensor, d, eta, i)


# ---------------------------------------------------------------------------
# reductions


def _mask_level(sc: StructuredCost, p: DualWeights) -> float:
    """M large enough that a masked coordinate is never chosen."""
    finite = p.p[np.isfinite(p.p)]
    pmax = float(np.abs(finite).max()) if finite.size else 0.0
    return 2.0 * sc.cmax + 2.0 * sc.k * pmax + 1.0


def _coordinate_descent_argmin(call, sc, p: DualWeights, slack: float,
                               viol_slack: float | None = None):
    """Shared masking loop behind ARGMIN-from-MIN and ARGAMIN-from-AMIN.

    ``call`` answers the (approximate) MIN query for a masked weight
    matrix; ``slack`` is the lexicographic tie tolerance and
    ``viol_slack`` (default ``slack``) the oracle-consistency tolerance.
    A capped backend can have certified accuracy far above the requested
    one; only the consistency check may use that wide bound, or the tie
    rule degenerates into always picking the first index.
    """
    if viol_slack is None:
        viol_slack = slack
    if not p.is_finite():
        raise MotError("argmin reductions require finite dual weights")
    n, k = sc.n, sc.k
    big_m = _mask_level(sc, p)
    work = p.p.copy()
    prev = call(np.copy(work))
    chosen = []
    for s in range(k):
        orig_row = work[s].copy()
        best_val = np.inf
        vals = np.empty(n)
        for j in range(n):
            row = np.full(n, -big_m)
            row[j] = orig_row[j]
            work[s] = row
            vals[j] = call(np.copy(work))
        best_val = float(vals.min())
        if best_val < prev - viol_slack - 1e-6:
            raise OracleViolationError(
                f"restricted min {best_val} below previous stage value {prev} "
                f"beyond tolerance at coordinate {s}"
            )
        # smallest index within the stage tolerance of the best restricted value
        j_star = int(np.flatnonzero(vals <= best_val + slack + 1e-9)[0])
        chosen.append(j_star)
        row = np.full(n, -big_m)
        row[j_star] = orig_row[j_star]
        work[s] = row
        prev = float(vals[j_star])
    return tuple(chosen), prev


def argmin_from_min(sc: StructuredCost, p: DualWeights) -> OracleAnswerArg:
    """Exact ARGMIN via nk MIN calls with coordinate masking."""

    def call(mat):
        return sc.min_value(DualWeights(mat, bound=None))

    jt, val = _coordinate_descent_argmin(call, sc, p, slack=1e-9)
    return OracleAnswerArg(jt, val)


def argamin_from_amin(sc: StructuredCost, p: DualWeights, eps: float) -> OracleAnswerArg:
    """eps-approximate ARGAMIN via nk AMIN calls at accuracy eps/(2k)."""
    if eps <= 0:
        raise MotError("argamin requires eps > 0")
    tau = sc.amin_accuracy(eps / (2.0 * sc.k))

    def call(mat):
        return sc.amin(DualWeights(mat, bound=None), eps / (2.0 * sc.k))

    jt, val = _coordinate_descent_argmin(call, sc, p, slack=eps / sc.k,
                                         viol_slack=2.0 * tau)
    return OracleAnswerArg(jt, val)


def argamin_gap(sc: StructuredCost, eps: float) -> float:
    """Bound on the suboptimality of the tuple oracle_argamin returns.

    Exact routes have no gap; a native ARGAMIN promises eps; the
    AMIN-based coordinate-descent reduction accumulates its per-stage
    tolerance across the k stages.
    """
    if sc.supports(ARGMIN) or sc.supports(MIN):
        return 0.0
    if sc.supports(ARGAMIN):
        return eps
    tau = sc.amin_accuracy(eps / (2.0 * sc.k))
    return 4.0 * sc.k * tau


def smin_from_marg(sc: StructuredCost, p: DualWeights, eta: float) -> float:
    """SMIN via one MARG call: scale by d_i = exp(eta p_i) and sum."""
    if eta <= 0:
        raise MotError("smin requires eta > 0")
    with np.errstate(over="raise"):
        d = np.exp(eta * p.p)  # exp(-inf) = 0
    mu1 = np.asarray(sc.marg(d, eta, 0), dtype=float)
    if np.any(mu1 < -1e-15):
        raise OracleViolationError("MARG returned a negative entry")
    total = float(np.maximum(mu1, 0.0).sum())
    if total <= 0:
        raise MotError("SMIN undefined: every tuple is masked out")
    return -np.log(total) / eta


def marg_from_smin(sc: StructuredCost, d: np.ndarray, eta: float, i: int) -> np.ndarray:
    """MARG via n SMIN calls, one per entry of the requested marginal."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise MotError("scaling vectors must be nonnegative")
    if eta <= 0:
        raise MotError("marg requires eta > 0")
    with np.errstate(divide="ignore"):
        logd = np.log(d)  # log 0 = -inf
    out = np.zeros(sc.n)
    for ell in range(sc.n):
        if d[i, ell] == 0.0:
            continue
        mat = logd / eta
        row = np.full(sc.n, NEG_INF)
        row[ell] = logd[i, ell] / eta
        mat[i] = row
        s = sc.smin(DualWeights(mat, bound=None), eta)
        out[ell] = np.exp(-eta * s)
    return out


def amin_from_smin(sc: StructuredCost, p: DualWeights, eps: float) -> float:
    """AMIN via SMIN at eta = k log(n) / eps (softmin sandwich bound)."""
    if eps <= 0:
        raise MotError("amin requires eps > 0")
    eta = sc.k * np.log(sc.n) / eps if sc.n > 1 else 1.0
    eta = min(eta, sc.eta_max())
    return sc.smin(p, eta)


def amin_from_min(sc: StructuredCost, p: DualWeights, eps: float) -> float:
    """An exact answer is a valid eps-approximation."""
    return sc.min_value(p)


# ---------------------------------------------------------------------------
# dispatch: native oracle if present, else the best available reduction


def oracle_min(sc: StructuredCost, p: DualWeights) -> float:
    if sc.supports(MIN):
        return sc.min_value(p)
    raise CapabilityError("cost structure supports no exact MIN oracle")


def oracle_argmin(sc: StructuredCost, p: DualWeights) -> OracleAnswerArg:
    if sc.supports(ARGMIN):
        return sc.argmin(p)
    if sc.supports(MIN):
        return argmin_from_min(sc, p)
    raise CapabilityError("cost structure supports neither ARGMIN nor MIN")


def oracle_amin(sc: StructuredCost, p: DualWeights, eps: float) -> float:
    if sc.supports(AMIN):
        return sc.amin(p, eps)
    if sc.supports(MIN):
        return amin_from_min(sc, p, eps)
    if sc.supports(SMIN):
        return amin_from_smin(sc, p, eps)
    raise CapabilityError("cost structure supports none of AMIN/MIN/SMIN")


def oracle_argamin(sc: StructuredCost, p: DualWeights, eps: float) -> OracleAnswerArg:
    if sc.supports(ARGAMIN):
        return sc.argamin(p, eps)
    if sc.supports(ARGMIN):
        return sc.argmin(p)
    if sc.supports(AMIN) or sc.supports(MIN) or sc.supports(SMIN):
        shim = _AminShim(sc)
        return argamin_from_amin(shim, p, eps)
    raise CapabilityError("cost structure supports no approximate-argmin route")


def oracle_smin(sc: StructuredCost, p: DualWeights, eta: float) -> float:
    if sc.supports(SMIN):
        return sc.smin(p, eta)
    if sc.supports(MARG):
        return smin_from_marg(sc, p, eta)
    raise CapabilityError("cost structure supports neither SMIN nor MARG")


def oracle_marg(sc: StructuredCost, d: np.ndarray, eta: float, i: int) -> np.ndarray:
    if sc.supports(MARG):
        return sc.marg(d, eta, i)
    if sc.supports(SMIN):
        return marg_from_smin(sc, d, eta, i)
    raise CapabilityError("cost structure supports neither MARG nor SMIN")


class _AminShim(StructuredCost):
    """Present oracle_amin as a native AMIN so reductions can layer."""

    capabilities = frozenset({AMIN})

    def __init__(self, sc: StructuredCost):
        self.inner = sc
        self.n = sc.n
        self.k = sc.k
        self.cmax = sc.cmax

    def cost_entry(self, j):
        return self.inner.cost_entry(j)

    def eta_max(self):
        return self.inner.eta_max()

    def amin_accuracy(self, eps):
        if self.inner.supports(AMIN):
            return self.inner.amin_accuracy(eps)
        if self.inner.supports(MIN):
            return eps
        # the SMIN route: softmin sandwich at a possibly capped eta
        eta = self.inner.k * np.log(max(self.inner.n, 2)) / eps
        eta = min(eta, self.inner.eta_max())
        return max(eps, self.inner.k * np.log(max(self.inner.n, 2)) / eta)

    def amin(self, p, eps):
        return oracle_amin(self.inner, p, eps)
