"""Low-rank-plus-sparse costs C = R + S and their softmin oracles.

R is given in rank-r factored form and S as a short list of explicit
entries.  The softmin machinery approximates exp(-eta * R) by a
polynomial q (Chebyshev interpolation, certified on a dense grid) whose
multinomial expansion lifts the rank-r factors to a rank-C(r+m, r)
factorization L of q(R).  Marginalizing a scaling of L costs O(n k rank)
arithmetic, which yields SMIN and MARG for the perturbed cost
C~ = -eta^{-1} log L + S with a certified bound on |C~ - C|, and AMIN for
C itself via the softmin sandwich.

Double precision caps how sharp the lift can be: the certification needs
pointwise relative error about eps/3 across a value range of
exp(2 * eta * rmax), so eta * rmax beyond ~12 is refused (and oracle
users cap their regularization through ``eta_max``).  Recentring R away
from zero does not help here: expanding q(R - c) through the monomial
lift sums composition terms of size (rmax + c)^t against values
(R - c)^t, which cancels catastrophically, so the envelope is inherently
symmetric about zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev
from scipy.special import logsumexp

from .core import DualWeights, MotError, PrecisionError
from .oracles import AMIN, MARG, SMIN, StructuredCost

#: hard precondition from the interface contract; doubles cannot go past this
ETA_RMAX_HARD_LIMIT = 50.0

#: practical certification envelope for eta * half-range (see module docstring)
ETA_RMAX_ENVELOPE = 12.0

DEFAULT_RANK_CAP = 5000
_AUDIT_SAMPLES = 10_000
_GRID_POINTS = 10_000


@dataclass(frozen=True)
class LowRankFactors:
    """R_j = sum_ell prod_i u[ell, i, j_i]; ``u`` has shape (r, k, n)."""

    u: np.ndarray
    rmax: float | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 3:
            raise MotError("low-rank factors must have shape (r, k, n)")
        if not np.all(np.isfinite(u)):
            raise MotError("low-rank factors must be finite")
        object.__setattr__(self, "u", u)
        if self.rmax is None:
            # product of per-coordinate max magnitudes bounds each term
            bound = float(sum(np.prod(np.abs(u[ell]).max(axis=1)) for ell in range(u.shape[0])))
            object.__setattr__(self, "rmax", bound)

    @property
    def r(self) -> int:
        return self.u.shape[0]

    @property
    def k(self) -> int:
        return self.u.shape[1]

    @property
    def n(self) -> int:
        return self.u.shape[2]

    def entry(self, j) -> float:
        j = tuple(j)
        cols = self.u[:, range(self.k), j]  # (r, k)
        return float(cols.prod(axis=1).sum())


@dataclass(frozen=True)
class SparseComponent:
    """Explicit entries of the sparse tensor S."""

    k: int
    indices: np.ndarray  # (s, k)
    values: np.ndarray   # (s,)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).reshape(-1, self.k)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if idx.shape[0] != vals.shape[0]:
            raise MotError("sparse indices and values must have equal length")
        if idx.shape[0]:
            seen = {tuple(row) for row in idx}
            if len(seen) != idx.shape[0]:
                raise MotError("sparse entries must have unique tuples")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @staticmethod
    def empty(k: int) -> "SparseComponent":
        return SparseComponent(k, np.empty((0, k), dtype=np.intp), np.empty(0))

    @property
    def s(self) -> int:
        return int(self.values.shape[0])

    def entry(self, j) -> float:
        j = np.asarray(tuple(j))
        hit = np.flatnonzero((self.indices == j).all(axis=1))
        return float(self.values[hit[0]]) if hit.size else 0.0


@dataclass(frozen=True)
class PolyCoeffs:
    """Monomial coefficients a_0..a_m of q(x) with a certified grid error."""

    coeffs: np.ndarray
    rmax: float
    sup_error: float

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)


def poly_approx_exp(eta: float, rmax: float, eps_tilde: float,
                    max_degree: int = 120) -> PolyCoeffs:
    """Chebyshev approximation of exp(-eta x) on [-rmax, rmax].

    Grows the degree until the sup error on a dense grid is at most
    eps_tilde / 2 (the slack absorbs lift round-off), then converts to the
    monomial basis.  Raises when double precision cannot reach the target.
    """
    if eta <= 0:
        raise MotError("poly_approx_exp requires eta > 0")
    if rmax < 0:
        raise MotError("rmax must be nonnegative")
    if eps_tilde <= 0 or eps_tilde >= math.exp(-eta * rmax):
        raise MotError("eps_tilde must lie in (0, exp(-eta rmax))")
    if eta * rmax > ETA_RMAX_HARD_LIMIT:
        raise PrecisionError(
            f"eta*rmax = {eta * rmax:.2f} > {ETA_RMAX_HARD_LIMIT}: "
            "required lift precision exceeds double precision")
    if rmax == 0.0:
        return PolyCoeffs(np.array([1.0]), 0.0, 0.0)

    grid = np.linspace(-rmax, rmax, _GRID_POINTS)
    target = eps_tilde / 2.0
    fvals = np.exp(-eta * grid)
    best_err, best_coeffs = np.inf, None
    degree = max(2, int(eta * rmax))
    while degree <= max_degree:
        cheb = chebyshev.Chebyshev.interpolate(
            lambda x: np.exp(-eta * x), degree, domain=[-rmax, rmax])
        # monomial coefficients in the scaled variable t = x / rmax
        b = chebyshev.cheb2poly(cheb.coef)
        coeffs = b / rmax ** np.arange(len(b))
        err = float(np.abs(np.polynomial.polynomial.polyval(grid, coeffs) - fvals).max())
        if err < best_err:
            best_err, best_coeffs = err, coeffs
        if err <= target:
            return PolyCoeffs(coeffs, rmax, err)
        degree = degree + max(2, degree // 4)
    if best_err <= eps_tilde:  # within budget though not within the margin
        return PolyCoeffs(best_coeffs, rmax, best_err)
    raise PrecisionError(
        f"cannot reach grid error {target:.3g} for eta*rmax = {eta * rmax:.2f}; "
        f"best achieved {best_err:.3g}")


def _compositions(r: int, max_total: int):
    """All alpha in N_0^r with |alpha| <= max_total, lexicographic."""
    alpha = [0] * r

    def rec(pos, remaining):
        if pos == r - 1:
            for last in range(remaining + 1):
                alpha[pos] = last
                yield tuple(alpha)
            alpha[pos] = 0
            return
        for v in range(remaining + 1):
            alpha[pos] = v
            yield from rec(pos + 1, remaining - v)
        alpha[pos] = 0

    yield from rec(0, max_total)


def lift_lowrank_exp(R: LowRankFactors, q: PolyCoeffs,
                     rank_cap: int = DEFAULT_RANK_CAP) -> LowRankFactors:
    """Multinomial expansion of q(R) as a rank-C(r+m, r) factorization."""
    r, k, n = R.r, R.k, R.n
    m = q.degree
    lifted_rank = math.comb(r + m, r)
    if lifted_rank > rank_cap:
        raise MotError(
            f"lifted rank C({r}+{m},{r}) = {lifted_rank} exceeds cap {rank_cap}; "
            "lower the polynomial degree or the tensor rank")
    v = np.empty((lifted_rank, k, n))
    for a, alpha in enumerate(_compositions(r, m)):
        t = sum(alpha)
        coeff = q.coeffs[t] * math.factorial(t)
        for cnt in alpha:
            coeff /= math.factorial(cnt)
        powers = np.ones((k, n))
        for ell, cnt in enumerate(alpha):
            if cnt:
                powers *= R.u[ell] ** cnt
        v[a] = powers
        v[a, 0] *= coeff
    return LowRankFactors(v, rmax=None)


def marginalize_scaled_lowrank(d: np.ndarray, L: LowRankFactors) -> float:
    """Total mass of (tensor-prod d_i) element-wise times L, in O(nk rank)."""
    d = np.asarray(d, dtype=float)
    if d.shape != (L.k, L.n):
        raise MotError("scaling vector dimensions do not match the factors")
    dots = np.einsum("aij,ij->ai", L.u, d)  # <d_i, v_{i,a}>
    return float(dots.prod(axis=1).sum())


class LowRankPlusSparseCost(StructuredCost):
    """StructuredCost for C = R + S exposing AMIN and SMIN/MARG on C~."""

    capabilities = frozenset({AMIN, SMIN, MARG})

    def __init__(self, R: LowRankFactors, S: SparseComponent | None = None,
                 rank_cap: int = DEFAULT_RANK_CAP,
                 eta_rmax_limit: float = ETA_RMAX_ENVELOPE):
        self.R = R
        self.S = S if S is not None else SparseComponent.empty(R.k)
        if self.S.k != R.k:
            raise MotError("sparse component k does not match the factors")
        if self.S.s and (self.S.indices.min() < 0 or self.S.indices.max() >= R.n):
            raise MotError("sparse entry index out of range")
        self.n = R.n
        self.k = R.k
        smax = float(np.abs(self.S.values).max()) if self.S.s else 0.0
        self.cmax = float(R.rmax) + smax
        self.rank_cap = rank_cap
        self.eta_rmax_limit = float(eta_rmax_limit)
        self._lift_cache: dict = {}
        self._ut_cache: dict = {}
        self.last_audit: dict | None = None

    def cost_entry(self, j) -> float:
        return self.R.entry(j) + self.S.entry(j)

    def eta_max(self) -> float:
        if self.R.rmax == 0.0:
            return float("inf")
        return self.eta_rmax_limit / float(self.R.rmax)

    # -- lift management ----------------------------------------------------
    def _get_lift(self, eta: float):
        key = float(eta)
        if key in self._lift_cache:
            return self._lift_cache[key]
        # accuracy implied by this eta through the sandwich bound
        eps_eff = 2.0 * self.k * np.log(max(self.n, 2)) / eta
        eps_tilde = min(eps_eff / 3.0, 0.9) * math.exp(-eta * float(self.R.rmax))
        q = poly_approx_exp(eta, float(self.R.rmax), eps_tilde)
        L = lift_lowrank_exp(self.R, q, self.rank_cap)
        self._certify(eta, eps_tilde, eps_eff, L)
        self._lift_cache[key] = (L, eps_tilde)
        # coordinate-major factor layout for the marg hot loop
        self._ut_cache[key] = np.ascontiguousarray(L.u.transpose(1, 0, 2))
        return self._lift_cache[key]

    def _certify(self, eta, eps_tilde, eps_eff, L: LowRankFactors):
        """Sampled audit of the lift and the induced cost perturbation."""
        rng = np.random.default_rng(987654321)
        idx = rng.integers(0, self.n, size=(_AUDIT_SAMPLES, self.k))
        # evaluate R and L on the sample through their factored forms
        r_vals = _factored_values(self.R, idx)
        l_vals = _factored_values(L, idx)
        lift_err = float(np.abs(l_vals - np.exp(-eta * r_vals)).max())
        if lift_err > eps_tilde + 1e-15:
            raise PrecisionError(
                f"lift audit failed: sampled error {lift_err:.3g} > {eps_tilde:.3g}")
        if l_vals.min() <= 0:
            raise PrecisionError("lift audit failed: nonpositive lifted entry")
        pert = float(np.abs(-np.log(l_vals) / eta - r_vals).max())
        if pert > eps_eff / 2.0 + 1e-12:
            raise PrecisionError(
                f"certified cost perturbation {pert:.3g} exceeds eps/2 = {eps_eff / 2:.3g}")
        self.last_audit = {"eta": eta, "eps_tilde": eps_tilde, "lift_error": lift_err,
                           "cost_perturbation": pert, "eps": eps_eff}

    # -- oracles ------------------------------------------------------------
    def smin(self, p: DualWeights, eta: float) -> float:
        """SMIN of the certified nearby cost C~ = -eta^{-1} log L + S."""
        if eta <= 0:
            raise MotError("SMIN requires eta > 0")
        L, _ = self._get_lift(eta)
        # softmin is shift-equivariant in the weights: normalize each row
        # by its max so exp(eta p) can neither overflow nor underflow to
        # an all-zero scaling at large eta
        shift = np.max(p.p, axis=1)
        if not np.all(np.isfinite(shift)):
            return math.inf          # some coordinate is fully masked out
        with np.errstate(over="raise"):
            d = np.exp(eta * (p.p - shift[:, None]))
        b = marginalize_scaled_lowrank(d, L)
        # split the mass into the lift total minus the lifted mass sitting on
        # sparse-corrected tuples (nonnegative in exact arithmetic) plus the
        # corrected sparse mass itself, and combine in the log domain so the
        # corrected terms survive underflow at large eta
        log_terms = []
        if self.S.s:
            l_vals = _factored_values(L, self.S.indices)
            log_base = (eta * (p.p - shift[:, None])[range(self.k), self.S.indices].sum(axis=1)
                        + np.log(l_vals))
            with np.errstate(under="ignore"):
                rest = b - float(np.exp(log_base).sum())
            log_terms.append(log_base - eta * self.S.values)
        else:
            rest = b
        if rest > 0.0:
            log_terms.append(np.array([math.log(rest)]))
        if not log_terms:
            return math.inf
        total_log = float(logsumexp(np.concatenate(log_terms)))
        if not np.isfinite(total_log):
            if total_log < 0:
                return math.inf
            raise PrecisionError("softmin mass diverged")
        return float(-total_log / eta - shift.sum())

    def marg(self, d: np.ndarray, eta: float, i: int) -> np.ndarray:
        """i-th marginal of (tensor-prod d) * exp(-eta C~), all n entries
        in one lift marginalization instead of n softmin calls."""
        d = np.asarray(d, dtype=float)
        if d.shape != (self.k, self.n):
            raise MotError("scaling vector dimensions do not match the cost")
        if np.any(d < 0):
            raise MotError("scaling vectors must be nonnegative")
        if eta <= 0:
            raise MotError("marg requires eta > 0")
        if not 0 <= i < self.k:
            raise MotError(f"marginal index {i} out of range for k={self.k}")
        L, _ = self._get_lift(eta)
        U = self._ut_cache[float(eta)]              # (k, rank, n)
        dots = (U @ d[:, :, None])[:, :, 0].T       # (rank, k)
        pref = (dots[:, :i].prod(axis=1) * dots[:, i + 1:].prod(axis=1))
        out = d[i] * (pref @ U[i])
        if self.S.s:
            l_vals = _factored_values(L, self.S.indices)
            d_prod = np.prod(d[range(self.k), self.S.indices], axis=1)
            corr = d_prod * l_vals * np.expm1(-eta * self.S.values)
            np.add.at(out, self.S.indices[:, i], corr)
        return out

    def amin(self, p: DualWeights, eps: float) -> float:
        if eps <= 0:
            raise MotError("AMIN requires eps > 0")
        eta = 2.0 * self.k * np.log(max(self.n, 2)) / eps
        eta = min(eta, self.eta_max())
        return self.smin(p, eta)

    def amin_accuracy(self, eps: float) -> float:
        # sandwich bound plus certified perturbation at the capped eta
        eta = 2.0 * self.k * np.log(max(self.n, 2)) / eps
        eta = min(eta, self.eta_max())
        return max(eps, 2.0 * self.k * np.log(max(self.n, 2)) / eta)


def _factored_values(F: LowRankFactors, idx: np.ndarray) -> np.ndarray:
    """Evaluate a factored tensor at the given (m, k) index rows."""
    # accumulate the per-coordinate product to keep memory at O(r * m);
    # gather from a contiguous (rank, n) slice per coordinate
    vals = np.ascontiguousarray(F.u[:, 0, :])[:, idx[:, 0]]
    for i in range(1, F.k):
        vals *= np.ascontiguousarray(F.u[:, i, :])[:, idx[:, i]]
    return vals.sum(axis=0)


def lr_smin(c: LowRankPlusSparseCost, p: DualWeights, eta: float) -> float:
    return c.smin(p, eta)


def lr_amin(c: LowRankPlusSparseCost, p: DualWeights, eps: float) -> float:
    return c.amin(p, eps)


def lowrank_from_json(obj) -> LowRankPlusSparseCost:
    """Build from {"rank": r, "factors": [[vec]*k]*r, "sparse": [{"index", "value"}]}."""
    try:
        r = int(obj["rank"])
        u = np.asarray(obj["factors"], dtype=float)
        if u.ndim != 3 or u.shape[0] != r:
            raise ValueError(f"factors must be an (r, k, n) nest, got shape {u.shape}")
        sparse = obj.get("sparse", [])
        k = u.shape[1]
        if sparse:
            idx = np.asarray([e["index"] for e in sparse], dtype=np.intp)
            vals = np.asarray([e["value"] for e in sparse], dtype=float)
            S = SparseComponent(k, idx, vals)
        else:
            S = SparseComponent.empty(k)
    except (KeyError, TypeError, ValueError) as exc:
        raise MotError(f"invalid low-rank cost payload: {exc}") from exc
    return LowRankPlusSparseCost(LowRankFactors(u), S)
