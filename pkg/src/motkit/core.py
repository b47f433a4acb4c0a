"""Core types and primitives for multimarginal optimal transport.

A multimarginal transport problem couples k probability vectors on n atoms
through a cost tensor C over [n]^k.  This module holds the shared value
types (marginals, sparse/dense plans, dual weight vectors), the softmin
operator, and feasibility / cost / entropy evaluation used by every solver.

Conventions fixed here and reused everywhere:
  * index tuples are 0-based k-tuples over range(n);
  * tuple <-> linear index uses row-major (C) order;
  * extended reals are IEEE floats where -inf is a legal dual weight and
    e^{-inf} = 0, log 0 = -inf.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

NEG_INF = float("-inf")

#: default cap on n^k for any dense enumeration
DEFAULT_BRUTE_CAP = 10 ** 6

#: default magnitude bound on finite dual weights
DEFAULT_WEIGHT_BOUND = 1e12

FEAS_TOL = 1e-9


class MotError(Exception):
    """Base class for all errors raised by this package."""


class CapabilityError(MotError):
    """An engine asked a cost structure for an oracle it does not support."""


class OracleViolationError(MotError):
    """An oracle backend returned answers inconsistent with its contract."""


class ConvergenceError(MotError):
    """An iterative solver hit its iteration cap before meeting tolerance."""


class BruteForceCapError(MotError):
    """A dense enumeration would exceed the configured n^k cap."""


class TreewidthCapError(MotError):
    """A junction tree would exceed the configured width cap."""


class DegenerateSupportError(MotError):
    """A scaling update hit a zero marginal where mass is required."""


class PrecisionError(MotError):
    """The requested accuracy is not attainable in double precision."""


def brute_force_cap() -> int:
    """Current n^k enumeration cap (env var MOTKIT_BRUTE_CAP overrides)."""
    raw = os.environ.get("MOTKIT_BRUTE_CAP")
    if raw is None:
        return DEFAULT_BRUTE_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise MotError(f"MOTKIT_BRUTE_CAP must be an integer, got {raw!r}") from exc
    if cap <= 0:
        raise MotError("MOTKIT_BRUTE_CAP must be positive")
    return cap


def check_brute_cap(n: int, k: int) -> int:
    """Return n^k, or raise BruteForceCapError if it exceeds the cap."""
    size = n ** k
    cap = brute_force_cap()
    if size > cap:
        raise BruteForceCapError(
            f"dense enumeration needs n^k = {n}^{k} = {size} > cap {cap}"
        )
    return size


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class Marginals:
    """k probability vectors mu_1..mu_k on n atoms (rows of ``mu``)."""

    mu: np.ndarray  # shape (k, n)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 2 or mu.shape[0] < 1 or mu.shape[1] < 1:
            raise MotError(f"marginals must be a (k, n) matrix, got shape {mu.shape}")
        if not np.all(np.isfinite(mu)):
            raise MotError("marginal entries must be finite")
        if np.any(mu < 0):
            raise MotError("marginal entries must be nonnegative")
        sums = mu.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > FEAS_TOL):
            # no silent renormalization: reject and let the caller fix it
            raise MotError(f"each marginal must sum to 1 within {FEAS_TOL}, got sums {sums}")
        object.__setattr__(self, "mu", mu)

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    @property
    def n(self) -> int:
        return self.mu.shape[1]

    @staticmethod
    def uniform(n: int, k: int) -> "Marginals":
        return Marginals(np.full((k, n), 1.0 / n))


@dataclass(frozen=True)
class SparsePlan:
    """Transport plan stored as (index tuple, mass) entries.

    ``indices`` is an (m, k) integer array of tuples over range(n);
    ``masses`` the matching nonnegative weights.  Tuples are unique.
    """

    n: int
    k: int
    indices: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).reshape(-1, self.k)
        w = np.asarray(self.masses, dtype=float).reshape(-1)
        if idx.shape[0] != w.shape[0]:
            raise MotError("indices and masses must have equal length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise MotError("plan index out of range")
        if np.any(w < -FEAS_TOL):
            raise MotError("plan masses must be nonnegative")
        if idx.shape[0]:
            lin = np.ravel_multi_index(idx.T, (self.n,) * self.k)
            if np.unique(lin).size != lin.size:
                raise MotError("plan index tuples must be unique")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "masses", np.maximum(w, 0.0))

    @staticmethod
    def empty(n: int, k: int) -> "SparsePlan":
        return SparsePlan(n, k, np.empty((0, k), dtype=np.intp), np.empty(0))

    @staticmethod
    def from_entries(n: int, k: int, entries) -> "SparsePlan":
        """Build from an iterable of (tuple, mass) pairs."""
        entries = list(entries)
        if not entries:
            return SparsePlan.empty(n, k)
        idx = np.array([e[0] for e in entries], dtype=np.intp)
        w = np.array([e[1] for e in entries], dtype=float)
        return SparsePlan(n, k, idx, w)

    @property
    def nnz(self) -> int:
        return int(self.masses.shape[0])

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def marginal(self, i: int) -> np.ndarray:
        if not 0 <= i < self.k:
            raise MotError(f"marginal index {i} out of range for k={self.k}")
        out = np.zeros(self.n)
        if self.nnz:
            np.add.at(out, self.indices[:, i], self.masses)
        return out

    def to_dense(self) -> "DenseTensor":
        size = check_brute_cap(self.n, self.k)
        vals = np.zeros(size)
        if self.nnz:
            lin = np.ravel_multi_index(self.indices.T, (self.n,) * self.k)
            np.add.at(vals, lin, self.masses)
        return DenseTensor(self.n, self.k, vals.reshape((self.n,) * self.k))

    def entries(self):
        """Iterate (tuple, mass) pairs."""
        for row, w in zip(self.indices, self.masses):
            yield tuple(int(j) for j in row), float(w)


@dataclass(frozen=True)
class DenseTensor:
    """Explicit tensor over [n]^k; used for brute-force baselines only."""

    n: int
    k: int
    values: np.ndarray  # shape (n,)*k

    def __post_init__(self):
        check_brute_cap(self.n, self.k)
        vals = np.asarray(self.values, dtype=float)
        want = (self.n,) * self.k
        if vals.shape != want:
            if vals.size != self.n ** self.k:
                raise MotError(f"dense tensor needs {self.n ** self.k} values, got {vals.size}")
            vals = vals.reshape(want)
        object.__setattr__(self, "values", vals)

    def at(self, j) -> float:
        return float(self.values[tuple(j)])


@dataclass(frozen=True)
class DualWeights:
    """Oracle input p: one weight vector per marginal, -inf allowed.

    ``bound`` caps the magnitude of finite entries; internal callers that
    legitimately produce huge weights (MWU's softmax gradients) pass
    ``bound=None`` to disable the check.
    """

    p: np.ndarray  # shape (k, n)
    bound: float | None = field(default=DEFAULT_WEIGHT_BOUND, compare=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2:
            raise MotError(f"dual weights must be a (k, n) matrix, got shape {p.shape}")
        if np.any(np.isnan(p)) or np.any(p == np.inf):
            raise MotError("dual weights must be in R union {-inf}")
        if self.bound is not None:
            finite = p[np.isfinite(p)]
            if finite.size and np.abs(finite).max() > self.bound:
                raise MotError(f"finite dual weights exceed magnitude bound {self.bound}")
        object.__setattr__(self, "p", p)

    @property
    def k(self) -> int:
        return self.p.shape[0]

    @property
    def n(self) -> int:
        return self.p.shape[1]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.p)))

    @staticmethod
    def zeros(n: int, k: int) -> "DualWeights":
        return DualWeights(np.zeros((k, n)))


# ---------------------------------------------------------------------------
# primitives


def softmin(values, eta: float) -> float:
    """-(1/eta) log sum_i exp(-eta a_i), computed with a max shift.

    Inputs may include +inf (contributing e^{-inf} = 0).  All-(+inf) input
    (empty effective sum) and empty input are domain errors.
    """
    if eta <= 0:
        raise MotError("softmin requires eta > 0")
    a = np.asarray(values, dtype=float).reshape(-1)
    if a.size == 0:
        raise MotError("softmin of an empty collection")
    if np.any(np.isnan(a)):
        raise MotError("softmin input contains NaN")
    if np.all(a == np.inf):
        raise MotError("softmin undefined when every input is +inf")
    if np.any(a == NEG_INF):
        raise MotError("softmin diverges on a -inf input")
    # logsumexp of -eta*a; +inf inputs become -inf terms and drop out
    return float(-logsumexp(-eta * a) / eta)


def tuple_to_linear(j, n: int, k: int) -> int:
    return int(np.ravel_multi_index(tuple(j), (n,) * k))


def linear_to_tuple(lin: int, n: int, k: int) -> tuple:
    return tuple(int(x) for x in np.unravel_index(lin, (n,) * k))


def all_tuples(n: int, k: int) -> np.ndarray:
    """All of [n]^k in row-major order as an (n^k, k) array."""
    size = check_brute_cap(n, k)
    grid = np.indices((n,) * k).reshape(k, size).T
    return np.ascontiguousarray(grid)


def dense_marginal(t: DenseTensor, i: int) -> np.ndarray:
    """i-th marginal of a dense tensor: sum over all other axes."""
    if not 0 <= i < t.k:
        raise MotError(f"marginal index {i} out of range for k={t.k}")
    axes = tuple(a for a in range(t.k) if a != i)
    return t.values.sum(axis=axes) if axes else t.values.copy()


def check_feasible(plan, m: Marginals, tol: float = 1e-7) -> bool:
    """True iff every marginal of the plan matches mu_i entrywise within tol."""
    if isinstance(plan, SparsePlan):
        if (plan.n, plan.k) != (m.n, m.k):
            raise MotError("plan dimensions do not match marginals")
        if np.any(plan.masses < -tol):
            return False
        margs = [plan.marginal(i) for i in range(m.k)]
    elif isinstance(plan, DenseTensor):
        if (plan.n, plan.k) != (m.n, m.k):
            raise MotError("plan dimensions do not match marginals")
        if np.any(plan.values < -tol):
            return False
        margs = [dense_marginal(plan, i) for i in range(m.k)]
    else:
        raise MotError(f"unsupported plan type {type(plan).__name__}")
    return all(np.abs(mi - m.mu[i]).max() <= tol for i, mi in enumerate(margs))


def plan_cost(plan: SparsePlan, cost_eval) -> float:
    """<P, C> over the sparse support; cost_eval maps an index tuple to C_j."""
    total = 0.0
    for j, w in plan.entries():
        total += w * cost_eval(j)
    return total


def entropy(plan) -> float:
    """Shannon entropy -sum p log p with 0 log 0 = 0 (total mass must be 1)."""
    if isinstance(plan, SparsePlan):
        w = plan.masses
    elif isinstance(plan, DenseTensor):
        w = plan.values.reshape(-1)
    else:
        w = np.asarray(plan, dtype=float).reshape(-1)
    if np.any(w < -FEAS_TOL):
        raise MotError("entropy requires nonnegative masses")
    w = np.maximum(w, 0.0)
    if abs(w.sum() - 1.0) > 1e-6:
        raise MotError("entropy requires total mass 1")
    pos = w[w > 0]
    return float(-(pos * np.log(pos)).sum())


def vertex_sparsity_ok(plan: SparsePlan) -> bool:
    """Lemma-style vertex bound: nnz <= nk - k + 1."""
    live = int((plan.masses > 0).sum())
    return live <= plan.n * plan.k - plan.k + 1
