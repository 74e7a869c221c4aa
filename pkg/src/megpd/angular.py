"""Multivariate model built from a radial law and Gaussian log-ratios.

A positive vector X is represented by its sum-norm radius r = sum(x) and the
log-ratios v_j = log(x_j / x_d) against the d-th (reference) coordinate.  In
the model, v | r is zero-mean Gaussian with standard deviation delta(r) and an
equicorrelated correlation matrix; r follows an extended GPD.  The sum-norm is
a fixed constant of the construction (exact Jacobians depend on it).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .egpd import EgpdParams, egpd_pdf, egpd_simulate
from .rng import generator

__all__ = [
    "PolarSample",
    "EquicorrMatrix",
    "MegpdModel",
    "to_polar",
    "from_polar",
    "megpd_pdf",
    "megpd_simulate",
    "chi_coefficient",
    "risk_functional",
]


class PolarSample(NamedTuple):
    """Sum-norm radius r and log-ratio rows v (shape (..., d-1))."""

    r: np.ndarray
    v: np.ndarray


def _check_positive_rows(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError("x must be a vector or matrix with d >= 2 columns")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("all coordinates must be strictly positive and finite")
    return arr


def to_polar(x) -> PolarSample:
    """r = sum(x), v_j = log(x_j / x_d) for j = 1..d-1 (rowwise)."""
    arr = _check_positive_rows(x)
    squeeze = np.asarray(x, dtype=float).ndim == 1
    r = arr.sum(axis=1)
    v = np.log(arr[:, :-1] / arr[:, -1:])
    if squeeze:
        return PolarSample(r=r[0], v=v[0])
    return PolarSample(r=r, v=v)


def from_polar(s: PolarSample | tuple) -> np.ndarray:
    """Rebuild x = r * U from log-ratios via an overflow-guarded softmax."""
    r = np.asarray(s[0], dtype=float)
    v = np.asarray(s[1], dtype=float)
    squeeze = v.ndim == 1
    v2 = np.atleast_2d(v)
    if np.any(~np.isfinite(v2)):
        raise ValueError("log-ratios must be finite")
    w = np.concatenate([v2, np.zeros((v2.shape[0], 1))], axis=1)
    w -= w.max(axis=1, keepdims=True)
    e = np.exp(w)
    u = e / e.sum(axis=1, keepdims=True)
    x = np.atleast_1d(r)[:, None] * u
    return x[0] if squeeze else x


@dataclass(frozen=True)
class EquicorrMatrix:
    """Equicorrelation matrix of dimension q = d-1 with common correlation rho.

    Closed forms: eigenvalues 1-rho (multiplicity q-1) and 1+(q-1)rho; the
    inverse, inverse square root and log-determinant avoid any factorization.
    For q = 1 the matrix is identically [1] and rho is inert.
    """

    d_minus_1: int
    rho: float = 0.0

    def __post_init__(self):
        q = self.d_minus_1
        if q < 1:
            raise ValueError("dimension must be >= 1")
        if q == 1:
            if not -1.0 < self.rho < 1.0:
                raise ValueError("rho must lie in (-1, 1)")
        elif not (1.0 - self.rho > 0.0 and 1.0 + (q - 1) * self.rho > 0.0):
            raise ValueError(
                f"rho={self.rho} outside the validity interval (-1/{q - 1}, 1)")

    @staticmethod
    def validity_interval(d_minus_1: int) -> tuple[float, float]:
        if d_minus_1 <= 1:
            return (-1.0, 1.0)
        return (-1.0 / (d_minus_1 - 1), 1.0)

    def matrix(self) -> np.ndarray:
        q = self.d_minus_1
        if q == 1:
            return np.ones((1, 1))
        c = np.full((q, q), self.rho)
        np.fill_diagonal(c, 1.0)
        return c

    def logdet(self) -> float:
        q = self.d_minus_1
        if q == 1:
            return 0.0
        return float((q - 1) * np.log1p(-self.rho) + np.log1p((q - 1) * self.rho))

    def inv(self) -> np.ndarray:
        q = self.d_minus_1
        if q == 1:
            return np.ones((1, 1))
        a = 1.0 / (1.0 - self.rho)
        b = -self.rho / ((1.0 - self.rho) * (1.0 + (q - 1) * self.rho))
        return a * np.eye(q) + b * np.ones((q, q))

    def inv_sqrt(self) -> np.ndarray:
        """Symmetric C^(-1/2); whitening satisfies ||C^(-1/2) v||^2 = v' C^(-1) v."""
        q = self.d_minus_1
        if q == 1:
            return np.ones((1, 1))
        lam1 = 1.0 + (q - 1) * self.rho
        lam2 = 1.0 - self.rho
        a = 1.0 / np.sqrt(lam2)
        b = (1.0 / np.sqrt(lam1) - a) / q
        return a * np.eye(q) + b * np.ones((q, q))

    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.matrix())

    def quad_form(self, v: np.ndarray) -> np.ndarray:
        """Rowwise v' C^(-1) v in closed form."""
        v2 = np.atleast_2d(np.asarray(v, dtype=float))
        q = self.d_minus_1
        if q == 1:
            out = v2[:, 0] ** 2
        else:
            ss = (v2 ** 2).sum(axis=1)
            s = v2.sum(axis=1)
            out = (ss - self.rho * s ** 2 / (1.0 + (q - 1) * self.rho)) / (1.0 - self.rho)
        return out


@dataclass(frozen=True)
class MegpdModel:
    """Radial extended-GPD law + Gaussian log-ratio law with sd delta(r)."""

    radial: EgpdParams
    delta: Callable[[np.ndarray], np.ndarray]
    corr: EquicorrMatrix
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.corr.d_minus_1 != self.d - 1:
            raise ValueError("corr dimension must equal d - 1")

    @property
    def rho(self) -> float | None:
        """Pairwise correlation; not applicable (None) when d = 2."""
        return self.corr.rho if self.d >= 3 else None


def megpd_pdf(x, model: MegpdModel):
    """Joint density: radial pdf x Gaussian log-ratio pdf x Jacobian sum(x)/prod(x)."""
    arr = _check_positive_rows(x)
    squeeze = np.asarray(x, dtype=float).ndim == 1
    if arr.shape[1] != model.d:
        raise ValueError(f"x must have d={model.d} columns")
    q = model.d - 1
    r, v = to_polar(arr)
    fr = np.asarray(egpd_pdf(r, model.radial))
    dlt = np.asarray(model.delta(r), dtype=float)
    log_gauss = (-0.5 * q * np.log(2.0 * np.pi) - q * np.log(dlt)
                 - 0.5 * model.corr.logdet()
                 - 0.5 * model.corr.quad_form(v) / dlt ** 2)
    jac = r / arr.prod(axis=1)
    out = fr * np.exp(log_gauss) * jac
    return float(out[0]) if squeeze else out


def megpd_simulate(n: int, model: MegpdModel, seed=None) -> np.ndarray:
    """Draw r from the radial law, v = delta(r) * Z with Z ~ N(0, C) (Cholesky)."""
    rng = generator(seed)
    r = egpd_simulate(int(n), model.radial, rng)
    z = rng.standard_normal((int(n), model.d - 1)) @ model.corr.cholesky().T
    v = np.asarray(model.delta(r), dtype=float)[:, None] * z
    return from_polar(PolarSample(r=r, v=v))


def _empirical_chi(x: np.ndarray, p: np.ndarray, side: str, pair: tuple[int, int]) -> np.ndarray:
    i, j = pair
    cols = x[:, [i, j]]
    if side == "lower":
        cols = 1.0 / cols  # same formula applied to the reciprocals' own margins
    n = cols.shape[0]
    ranks = np.empty_like(cols)
    for c in range(2):
        order = np.argsort(cols[:, c], kind="stable")
        ranks[order, c] = np.arange(1, n + 1)
    f = ranks / (n + 1.0)
    joint = np.array([np.mean((f[:, 0] > pp) & (f[:, 1] > pp)) for pp in p])
    return joint / (1.0 - p)


def chi_coefficient(source, p, side: str = "upper", pair: tuple[int, int] = (0, 1),
                    mc_size: int = 1_000_000, seed=None):
    """Tail-dependence coefficient chi(p) for a coordinate pair.

    ``source`` may be a data matrix (empirical, rank-based margins; returns an
    array aligned with ``p``) or a MegpdModel (Monte Carlo with ``mc_size``
    draws; returns ``(chi, se)``).  ``side="lower"`` evaluates the analogous
    coefficient of the reciprocal vector 1/X under its own margins.  A warning
    is issued when fewer than ~30 joint exceedances can be expected at the
    largest requested level; the reported standard error is then doubled.
    """
    parr = np.atleast_1d(np.asarray(p, dtype=float))
    scalar = np.isscalar(p)
    if np.any(parr <= 0.0) or np.any(parr >= 1.0):
        raise ValueError("p must lie in (0, 1)")
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")

    if isinstance(source, MegpdModel):
        sample = megpd_simulate(mc_size, source, seed)
        chi = _empirical_chi(sample, parr, side, pair)
        joint = np.clip(chi * (1.0 - parr), 0.0, 1.0)
        se = np.sqrt(joint * (1.0 - joint) / mc_size) / (1.0 - parr)
        expected = mc_size * (1.0 - parr)
        thin = expected < 30.0
        if np.any(thin):
            warnings.warn("chi level(s) too extreme for the Monte Carlo size; "
                          "error bars widened", stacklevel=2)
            se = np.where(thin, 2.0 * se, se)
        if scalar:
            return float(chi[0]), float(se[0])
        return chi, se

    x = _check_positive_rows(source)
    if np.any(x.shape[0] * (1.0 - parr) < 30.0):
        warnings.warn("chi level(s) too extreme for the sample size", stacklevel=2)
    chi = _empirical_chi(x, parr, side, pair)
    return float(chi[0]) if scalar else chi


def risk_functional(x):
    """Harmonic-type aggregate 1 / sum(1/x_i); homogeneous of order one."""
    arr = _check_positive_rows(x)
    squeeze = np.asarray(x, dtype=float).ndim == 1
    out = 1.0 / (1.0 / arr).sum(axis=1)
    return float(out[0]) if squeeze else out
