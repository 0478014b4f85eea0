"""Theoretical limits on the fraction of correctly predicted choices.

If a subject's choices are Bernoulli with known per-pair probabilities, the
best possible prediction picks the modal option of each pair, succeeding with
probability max(p, 1-p) >= 0.5. The number of correct predictions over a
battery then follows a Poisson binomial distribution, computed here both via
the discrete-Fourier characteristic-function formula and, as an independent
cross-check, by exact dynamic-programming convolution. A classical binomial
approximation, population-level mixtures, and a Kolmogorov-Smirnov comparison
against realized fractions complete the picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom as _binom

from . import stats

IMAG_RESIDUE_TOL = 1e-9
NEG_PMF_TOL = -1e-12
MASS_TOL = 1e-9


class PredictabilityError(ValueError):
    """Raised for invalid profiles or numerically failed transforms."""


@dataclass(frozen=True)
class SuccessProfile:
    """Per-pair probabilities of predicting one subject's choice correctly."""

    subject_id: str
    success_probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.success_probs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise PredictabilityError("success_probs must be a non-empty vector")
        if np.any((arr < 0.5 - 1e-12) | (arr > 1.0)):
            raise PredictabilityError("success probabilities must lie in [0.5, 1]")
        object.__setattr__(self, "success_probs", arr)

    @property
    def n(self) -> int:
        return self.success_probs.size


def success_profile(subject_id: str, p_a: np.ndarray) -> SuccessProfile:
    """Profile from fitted per-pair probabilities: p_j = max(p_A, 1 - p_A)."""
    arr = np.asarray(p_a, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise PredictabilityError("choice probabilities must lie in [0, 1]")
    return SuccessProfile(subject_id, np.maximum(arr, 1.0 - arr))


@dataclass(frozen=True)
class PredictedFractionDist:
    """PMF over the support {0/N, 1/N, ..., N/N} of predicted fractions."""

    pmf: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pmf, dtype=float)
        if np.any(arr < NEG_PMF_TOL):
            raise PredictabilityError(f"pmf entry below tolerance: min {arr.min()}")
        arr = np.clip(arr, 0.0, None)
        if abs(arr.sum() - 1.0) > MASS_TOL:
            raise PredictabilityError(f"pmf mass {arr.sum()} != 1")
        object.__setattr__(self, "pmf", arr / arr.sum())

    @property
    def n(self) -> int:
        return self.pmf.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.pmf.size) / self.n

    def mean(self) -> float:
        return float(self.support @ self.pmf)

    def variance(self) -> float:
        mu = self.mean()
        return float(((self.support - mu) ** 2) @ self.pmf)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)


def poisson_binomial_dft(profile: SuccessProfile) -> PredictedFractionDist:
    """Exact Poisson binomial PMF via the discrete Fourier transform.

    P(k/N) = (1/(N+1)) * sum_l C^(-l k) * prod_m (1 + (C^l - 1) p_m) with
    C = exp(2 pi i / (N+1)). O(N^2), which is ample for battery-sized N.
    Raises if the imaginary residue exceeds 1e-9.
    """
    p = profile.success_probs
    n = profile.n
    ell = np.arange(n + 1)
    c_pow = np.exp(2j * math.pi * ell / (n + 1))
    inner = np.prod(1.0 + (c_pow[:, None] - 1.0) * p[None, :], axis=1)
    phase = np.exp(-2j * math.pi * np.outer(ell, ell) / (n + 1))
    raw = phase @ inner / (n + 1)
    residue = float(np.max(np.abs(raw.imag)))
    if residue > IMAG_RESIDUE_TOL:
        raise PredictabilityError(f"imaginary residue {residue} above tolerance")
    return PredictedFractionDist(raw.real)


def poisson_binomial_dp(profile: SuccessProfile) -> PredictedFractionDist:
    """Independent oracle: exact convolution, one Bernoulli at a time."""
    pmf = np.array([1.0])
    for p in profile.success_probs:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return PredictedFractionDist(pmf)


def tail_probability(dist: PredictedFractionDist, threshold: float) -> float:
    """Probability mass on support points strictly greater than threshold.

    Computed from a suffix cumulative sum so the result is exactly
    nonincreasing in the threshold.
    """
    if not (0.0 <= threshold <= 1.0):
        raise PredictabilityError(f"threshold must be in [0, 1], got {threshold}")
    suffix = np.cumsum(dist.pmf[::-1])[::-1]
    idx = int(np.searchsorted(dist.support, threshold, side="right"))
    return float(suffix[idx]) if idx < suffix.size else 0.0


def binomial_approx(profile: SuccessProfile) -> PredictedFractionDist:
    """Binomial approximation with the floored-mean success probability.

    p_bar = floor(sum p_j) / N, clamped onto the admissible grid
    {ceil(N/2)/N, ..., N/N} since every p_j >= 1/2.
    """
    n = profile.n
    k = math.floor(float(np.sum(profile.success_probs)))
    k = min(max(k, math.ceil(n / 2)), n)
    return PredictedFractionDist(_binom.pmf(np.arange(n + 1), n, k / n))


def population_mixture(
    dists: list[PredictedFractionDist],
) -> PredictedFractionDist:
    """Equal-weight mixture of per-subject distributions (same battery size)."""
    if not dists:
        raise PredictabilityError("no distributions to mix")
    n = dists[0].n
    if any(d.n != n for d in dists):
        raise PredictabilityError("mixture requires a common support size")
    return PredictedFractionDist(np.mean([d.pmf for d in dists], axis=0))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n_effective: int


def ks_test(theoretical: PredictedFractionDist, observed_fractions) -> KsResult:
    """One-sample KS comparison of realized fractions against a PMF.

    D is the maximal gap between the theoretical CDF and the empirical step
    CDF, evaluated at all jump points from both sides; the p-value uses the
    asymptotic Kolmogorov distribution with n = number of observations
    (conservative on discrete supports).
    """
    obs = np.asarray(observed_fractions, dtype=float)
    if obs.size < 5:
        raise PredictabilityError("need at least 5 observed fractions")
    emp = stats.EmpiricalCdf(obs)
    support = theoretical.support
    theo_cdf = theoretical.cdf()

    def theoretical_cdf(x):
        idx = np.searchsorted(support, x, side="right") - 1
        return np.where(idx >= 0, theo_cdf[np.clip(idx, 0, None)], 0.0)

    points = np.union1d(support, emp.values)
    before = np.nextafter(points, -np.inf)
    gaps = np.abs(theoretical_cdf(points) - emp(points))
    gaps_left = np.abs(theoretical_cdf(before) - emp(before))
    d = float(np.max(np.concatenate([gaps, gaps_left])))
    p = stats.kolmogorov_survival(math.sqrt(obs.size) * d)
    return KsResult(statistic=d, p_value=p, n_effective=int(obs.size))
