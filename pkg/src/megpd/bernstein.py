"""Bernstein-polynomial density estimation on [0,1].

The estimator is a mixture of Beta(k, m-k+1) densities, k = 1..m, weighted by
empirical-cdf increments over the regular grid {k/m}.  An endpoint correction
keeps the first and last weights strictly positive so that the density has
positive finite values at 0 and 1, which the surrounding model requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .egpd import UnitDensity

__all__ = ["BernsteinDensity", "fit_bernstein", "default_degree"]

_CHUNK = 65536


def default_degree(n: int) -> int:
    """Degree rule m = floor(0.5 * n / log(n)), floored at 2."""
    if n < 2:
        raise ValueError("need at least 2 observations")
    return max(2, int(math.floor(0.5 * n / math.log(n))))


def _binom_matrix(u: np.ndarray, m: int) -> np.ndarray:
    """Rows of binomial(m, u) pmf values, j = 0..m (stable via log weights).

    The log binomial coefficients are one-dimensional; only a single exp over
    the (n, m+1) block is needed, which keeps large evaluations cheap."""
    j = np.arange(m + 1, dtype=float)
    logc = gammaln(m + 1.0) - gammaln(j + 1.0) - gammaln(m - j + 1.0)
    interior = (u > 0.0) & (u < 1.0)
    out = np.zeros((u.size, m + 1))
    ui = u[interior]
    out[interior] = np.exp(logc + j * np.log(ui)[:, None]
                           + (m - j) * np.log1p(-ui)[:, None])
    out[u <= 0.0, 0] = 1.0
    out[u >= 1.0, m] = 1.0
    return out


@dataclass(frozen=True)
class BernsteinDensity(UnitDensity):
    """Fitted Beta-mixture density with degree m and weight vector length m."""

    m: int
    weights: np.ndarray
    corrected: bool = False
    fallback: bool = False
    _cumw: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.m,):
            raise ValueError("weights must have length m")
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_cumw", np.concatenate(([0.0], np.cumsum(w))))

    def _check(self, u) -> tuple[np.ndarray, bool]:
        arr = np.asarray(u, dtype=float)
        scalar = np.isscalar(u) or arr.ndim == 0
        arr = np.atleast_1d(arr)
        if arr.size and (np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0)):
            raise ValueError("u must lie in [0, 1]")
        return arr, scalar

    def pdf(self, u):
        """Mixture density: b(u) = m * sum_j C(m-1,j) u^j (1-u)^(m-1-j) w_{j+1}."""
        arr, scalar = self._check(u)
        out = np.empty_like(arr)
        for lo in range(0, arr.size, _CHUNK):
            block = arr[lo:lo + _CHUNK]
            out[lo:lo + _CHUNK] = self.m * (_binom_matrix(block, self.m - 1) @ self.weights)
        return float(out[0]) if scalar else out

    def cdf(self, u):
        """Weighted incomplete-Beta sum, evaluated through the binomial identity
        sum_k w_k I_u(k, m-k+1) = E[W_J], J ~ Binomial(m, u), W_j = w_1+...+w_j."""
        arr, scalar = self._check(u)
        out = np.empty_like(arr)
        for lo in range(0, arr.size, _CHUNK):
            block = arr[lo:lo + _CHUNK]
            out[lo:lo + _CHUNK] = _binom_matrix(block, self.m) @ self._cumw
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def _start_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached cdf values on a fine grid, used to warm-start the inverse."""
        tab = getattr(self, "_qtab", None)
        if tab is None:
            grid = np.linspace(0.0, 1.0, 4097)
            tab = (grid, self.cdf(grid))
            object.__setattr__(self, "_qtab", tab)
        return tab

    def quantile(self, p):
        """Inverse cdf: tabulated warm start polished by safeguarded Newton.

        Converged points drop out of the working set, so the per-iteration
        cost shrinks rapidly after the first pass."""
        arr, scalar = self._check(p)
        grid, cg = self._start_table()
        x = np.interp(arr, cg, grid)
        lo = np.zeros_like(arr)
        hi = np.ones_like(arr)
        active = np.arange(arr.size)
        for _ in range(100):
            xa = x[active]
            resid = self.cdf(xa) - arr[active]
            hi[active] = np.where(resid >= 0.0, np.minimum(hi[active], xa),
                                  hi[active])
            lo[active] = np.where(resid <= 0.0, np.maximum(lo[active], xa),
                                  lo[active])
            live = ~((np.abs(resid) < 1e-14)
                     | (hi[active] - lo[active] < 1e-15))
            active = active[live]
            if active.size == 0:
                break
            resid = resid[live]
            dens = self.pdf(x[active])
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(dens > 0.0, resid / dens, np.inf)
            cand = x[active] - step
            bad = ~np.isfinite(cand) | (cand <= lo[active]) | (cand >= hi[active])
            x[active] = np.where(bad, 0.5 * (lo[active] + hi[active]), cand)
        x = np.where(arr <= 0.0, 0.0, np.where(arr >= 1.0, 1.0, x))
        return float(x[0]) if scalar else x

    @property
    def b0(self) -> float:
        return float(self.m * self.weights[0])

    @property
    def b1(self) -> float:
        return float(self.m * self.weights[-1])


def _correct_endpoints(w: np.ndarray, m: int) -> tuple[np.ndarray, bool, bool]:
    """Force strictly positive first/last weights without changing total mass.

    Keep an endpoint weight already >= 1/m.  Otherwise raise it to exactly 1/m
    by transferring the deficit from the first (left end) or last (right end)
    weight exceeding 1/m.  If no weight exceeds 1/m (possible only through
    float ties), move eps = 1/(2m) from the largest non-endpoint weight and
    flag the fit.
    """
    w = w.copy()
    thr = 1.0 / m
    corrected = False
    fallback = False
    for end, pick in ((0, lambda idx: idx[0]), (m - 1, lambda idx: idx[-1])):
        if w[end] >= thr:
            continue
        exceed = np.nonzero(w > thr)[0]
        if exceed.size:
            donor = pick(exceed)
            w[donor] -= thr - w[end]
            w[end] = thr
            corrected = True
        else:
            others = w.copy()
            others[end] = -1.0
            donor = int(np.argmax(others))
            eps = 0.5 * thr
            w[donor] -= eps
            w[end] += eps
            fallback = True
    return w, corrected, fallback


def fit_bernstein(u, m: int | None = None) -> BernsteinDensity:
    """Estimate the carrier density from values in [0,1].

    Weights are empirical-cdf increments over the grid {k/m} (first cell closed
    at 0), followed by the endpoint correction.  ``m=None`` applies
    ``default_degree``.
    """
    arr = np.asarray(u, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty sample")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("u must lie in [0, 1]")
    if m is None:
        m = default_degree(arr.size)
    m = int(m)
    if m < 2:
        raise ValueError("m must be >= 2")
    # bin k (1-based) holds ((k-1)/m, k/m]; u = 0 joins the first bin
    idx = np.clip(np.ceil(arr * m).astype(int), 1, m) - 1
    counts = np.bincount(idx, minlength=m).astype(float)
    weights = counts / arr.size
    weights, corrected, fallback = _correct_endpoints(weights, m)
    return BernsteinDensity(m=m, weights=weights, corrected=corrected, fallback=fallback)
