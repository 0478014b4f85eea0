"""Cumulative prospect theory valuation and the logit choice rule.

The deterministic core: a power value function with loss aversion, the
Prelec II probability weighting function, the two-branch lottery valuation
(rank-ordered for same-sign outcomes, sign-split otherwise), and the logit
rule that turns a utility difference into a choice probability. Everything is
a pure function and accepts numpy arrays elementwise where that is useful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Lottery

# exp() overflows just above this; the logit is saturated long before
LOGIT_CLAMP = 700.0


@dataclass(frozen=True)
class CptParams:
    """Parameters of the logit-CPT choice model.

    alpha: curvature of the power value function (> 0)
    lam:   loss-aversion coefficient (> 0)
    delta: Prelec II elevation (> 0)
    gamma: Prelec II curvature (> 0)
    phi:   logit steepness (>= 0)
    """

    alpha: float
    lam: float
    delta: float
    gamma: float
    phi: float

    def __post_init__(self):
        for name in ("alpha", "lam", "delta", "gamma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.phi < 0:
            raise ValueError(f"phi must be >= 0, got {self.phi}")

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha, "lam": self.lam, "delta": self.delta,
            "gamma": self.gamma, "phi": self.phi,
        }


def value(x, params: CptParams):
    """Subjective value: x^alpha for gains, -lam * (-x)^alpha for losses."""
    arr = np.asarray(x, dtype=float)
    out = np.where(
        arr >= 0,
        np.abs(arr) ** params.alpha,
        -params.lam * np.abs(arr) ** params.alpha,
    )
    return float(out) if np.isscalar(x) else out


def weight(p, params: CptParams):
    """Prelec II decision weight exp(-delta * (-ln p)^gamma).

    Defined on [0, 1]; w(0) = 0 by continuous extension.
    """
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("probability outside [0, 1]")
    with np.errstate(divide="ignore"):
        neglog = -np.log(arr)
    out = np.where(arr > 0, np.exp(-params.delta * neglog**params.gamma), 0.0)
    return float(out) if np.isscalar(p) else out


def order_outcomes(v1, p1, v2, p2):
    """Canonical outcome order for the two-branch valuation.

    Same-sign lotteries (zero counts as a gain) are sorted descending when
    non-negative and ascending when negative; opposite-sign lotteries keep
    input order, which the mixed branch does not depend on. Equal outcomes
    keep input order. Returns (v1, p1, v2, p2, same_sign) as float/bool
    arrays.
    """
    v1 = np.asarray(v1, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    gain1 = v1 >= 0
    gain2 = v2 >= 0
    same = gain1 == gain2
    swap = same & ((gain1 & (v1 < v2)) | (~gain1 & (v1 > v2)))
    w1 = np.where(swap, v2, v1)
    q1 = np.where(swap, p2, p1)
    w2 = np.where(swap, v1, v2)
    q2 = np.where(swap, p1, p2)
    return w1, q1, w2, q2, same


def utility_arrays(v1, p1, v2, p2, same_sign, params: CptParams):
    """Vectorized CPT lottery value on pre-ordered outcome arrays."""
    w1 = weight(p1, params)
    val1 = value(v1, params)
    val2 = value(v2, params)
    mixed = weight(p2, params)
    return np.where(
        same_sign,
        w1 * val1 + (1.0 - w1) * val2,
        w1 * val1 + mixed * val2,
    )


def cpt_utility(lot: Lottery, params: CptParams) -> float:
    """CPT value of one lottery."""
    v1, p1, v2, p2, same = order_outcomes(
        lot.outcome1, lot.prob1, lot.outcome2, lot.prob2
    )
    return float(utility_arrays(v1, p1, v2, p2, same, params))


def logit_choice_prob(u_a, u_b, phi: float):
    """Probability of choosing A: 1 / (1 + exp(phi * (u_b - u_a))).

    The exponent is clamped to +-700 so extreme utility gaps saturate
    instead of overflowing.
    """
    if phi < 0:
        raise ValueError(f"phi must be >= 0, got {phi}")
    with np.errstate(over="ignore"):
        z = np.clip(phi * (np.asarray(u_b, dtype=float) - np.asarray(u_a, dtype=float)),
                    -LOGIT_CLAMP, LOGIT_CLAMP)
    out = 1.0 / (1.0 + np.exp(z))
    return float(out) if out.ndim == 0 else out


def pair_choice_prob(lot_a: Lottery, lot_b: Lottery, params: CptParams) -> float:
    """Logit-CPT probability of choosing lottery A over lottery B."""
    return logit_choice_prob(cpt_utility(lot_a, params), cpt_utility(lot_b, params), params.phi)
