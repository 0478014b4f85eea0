"""Shared statistical primitives used across the calibration pipeline.

Only the handful of functions the pipeline actually needs: chi-square upper
tail, lognormal density and closed-form ML, Pearson correlation, residual sum
of squares, empirical CDFs and the asymptotic Kolmogorov distribution.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaincc


def chi_square_survival(x: float, df: int) -> float:
    """Upper-tail probability P(X > x) for X ~ chi-square(df).

    Computed as the regularized upper incomplete gamma Q(df/2, x/2).
    """
    if x < 0:
        raise ValueError(f"chi-square statistic must be >= 0, got {x}")
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    return float(gammaincc(df / 2.0, x / 2.0))


def lognormal_logpdf(x, mu: float, sigma: float):
    """Log density of Lognormal(mu, sigma) at x (x > 0, sigma > 0).

    Accepts scalars or arrays; raises on any non-positive x.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("lognormal density requires x > 0")
    lx = np.log(arr)
    out = -np.log(arr * sigma * math.sqrt(2.0 * math.pi)) - (lx - mu) ** 2 / (2.0 * sigma**2)
    return float(out) if np.isscalar(x) else out


def lognormal_ml(values, sigma_floor: float = 0.0) -> tuple[float, float]:
    """Maximum-likelihood (mu, sigma) of a lognormal sample.

    Closed form: mu is the mean of the logs, sigma the population (1/n)
    standard deviation of the logs, optionally floored from below.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least 2 values for a lognormal fit")
    if np.any(arr <= 0):
        raise ValueError("lognormal fit requires positive values")
    logs = np.log(arr)
    mu = float(np.mean(logs))
    sigma = float(np.sqrt(np.mean((logs - mu) ** 2)))
    return mu, max(sigma, sigma_floor)


def pearson(xs, ys) -> float:
    """Pearson correlation coefficient of two equal-length samples."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson requires two 1-d samples of equal length")
    if x.size < 2:
        raise ValueError("pearson requires at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise ValueError("pearson undefined for zero-variance input")
    return float(xc @ yc) / denom


def rss(predicted, observed) -> float:
    """Residual sum of squares between two vectors."""
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if p.shape != o.shape:
        raise ValueError("rss requires equal shapes")
    return float(np.sum((p - o) ** 2))


class EmpiricalCdf:
    """Right-continuous step CDF of a sample."""

    def __init__(self, values):
        arr = np.sort(np.asarray(values, dtype=float))
        if arr.size == 0:
            raise ValueError("empty sample")
        self.values = arr
        self.n = arr.size

    def __call__(self, x):
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        out = idx / self.n
        return float(out) if np.isscalar(x) else out


def kolmogorov_survival(y: float) -> float:
    """Survival function of the asymptotic Kolmogorov distribution.

    Q(y) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 y^2); Q -> 1 as y -> 0.
    """
    if y <= 0.01:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * y * y)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))
