"""Unit-scale generalized Pareto primitives.

All shape values are accepted for evaluation (negative shapes give a bounded
support [0, -1/xi]); the shape-zero exponential branch is reached continuously
through series expansions, so cdf/pdf/quantile are smooth across xi = 0.
"""

from __future__ import annotations

import numpy as np

__all__ = ["gpd_cdf", "gpd_sf", "gpd_pdf", "gpd_logpdf", "gpd_quantile"]

# Below _XI_SMALL the log1p(t)/xi and expm1(t)/xi ratios switch to series in t,
# but only while |t| is small enough for four terms to reach ~1e-9 accuracy.
_XI_SMALL = 1e-6
_T_SERIES = 1e-2


def _prepare(x, name: str, low: float = 0.0):
    arr = np.asarray(x, dtype=float)
    if arr.size and (not np.all(np.isfinite(arr) | np.isposinf(arr)) or np.any(arr < low)):
        raise ValueError(f"{name} must be >= {low} and not NaN")
    return arr, np.isscalar(x) or arr.ndim == 0


def _ret(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def _log_survival(x: np.ndarray, xi: float) -> np.ndarray:
    """log of (1 + xi*x)_+^(-1/xi), elementwise; -inf past a finite endpoint."""
    if xi == 0.0:
        return -x
    t = xi * x
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > -1.0, -np.log1p(np.maximum(t, -1.0)) / xi, -np.inf)
    if abs(xi) < _XI_SMALL:
        small = np.abs(t) < _T_SERIES
        if np.any(small):
            ts = np.where(small, t, 0.0)
            series = -x * (1.0 - ts / 2.0 + ts * ts / 3.0 - ts * ts * ts / 4.0)
            out = np.where(small, series, out)
    return out


def gpd_cdf(x, xi: float):
    """Distribution function 1 - (1 + xi*x)_+^(-1/xi) (exponential at xi = 0)."""
    arr, scalar = _prepare(x, "x")
    return _ret(-np.expm1(_log_survival(arr, xi)), scalar)


def gpd_sf(x, xi: float):
    """Survival function (1 + xi*x)_+^(-1/xi)."""
    arr, scalar = _prepare(x, "x")
    return _ret(np.exp(_log_survival(arr, xi)), scalar)


def gpd_logpdf(x, xi: float):
    """Log density; -inf beyond the support endpoint when xi < 0."""
    arr, scalar = _prepare(x, "x")
    if xi == 0.0:
        return _ret(-arr, scalar)
    t = xi * arr
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > -1.0, -(1.0 + 1.0 / xi) * np.log1p(np.maximum(t, -1.0)), -np.inf)
    if abs(xi) < _XI_SMALL:
        small = np.abs(t) < _T_SERIES
        if np.any(small):
            ts = np.where(small, t, 0.0)
            # (1/xi)*log1p(t) = x*(1 - t/2 + t^2/3 - t^3/4) to fourth order
            series = -(arr * (1.0 - ts / 2.0 + ts * ts / 3.0 - ts * ts * ts / 4.0)
                       + np.log1p(ts))
            out = np.where(small, series, out)
    return _ret(out, scalar)


def gpd_pdf(x, xi: float):
    """Density (1 + xi*x)_+^(-1/xi - 1) (unit scale)."""
    arr, scalar = _prepare(x, "x")
    return _ret(np.exp(np.asarray(gpd_logpdf(arr, xi))), scalar)


def gpd_quantile(u, xi: float):
    """Quantile ((1-u)^(-xi) - 1)/xi, with the -log(1-u) limit at xi = 0."""
    arr, scalar = _prepare(u, "u")
    if np.any(arr >= 1.0):
        raise ValueError("u must lie in [0, 1)")
    s = -np.log1p(-arr)
    if xi == 0.0:
        return _ret(s, scalar)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.expm1(xi * s) / xi
    if abs(xi) < _XI_SMALL:
        ts = xi * s
        small = np.abs(ts) < _T_SERIES
        if np.any(small):
            tss = np.where(small, ts, 0.0)
            series = s * (1.0 + tss / 2.0 + tss * tss / 6.0 + tss ** 3 / 24.0)
            out = np.where(small, series, out)
    return _ret(out, scalar)
