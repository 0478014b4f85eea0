"""Prospect probabilities with an attraction factor on top of logit-CPT.

A prospect probability decomposes as p = f + q: the utility factor f is the
logit-CPT choice probability, and the attraction factor q adds a signed,
bounded adjustment driven by the gap in expected CARA utility between the two
lotteries. By construction |q| <= min(f, 1 - f), the two factors of a pair
alternate (q_B = -q_A), and setting the sensitivity a to zero recovers
logit-CPT exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import warnings

import numpy as np

from .cpt import CptParams, cpt_utility, logit_choice_prob
from .data import Lottery, LotteryPair

CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True)
class QdtParams:
    """Logit-CPT parameters plus attraction sensitivity and CARA coefficient.

    ``a`` scales the attraction factor; its sign picks the direction of the
    response to the CARA-utility gap (a = 0 switches the factor off and
    recovers logit-CPT). Estimation searches both signs so the nested model
    sits in the interior of the family. wealth0 is the endowment added to
    every outcome inside the CARA utility; it defaults to 100 monetary
    units.
    """

    cpt: CptParams
    a: float
    eta: float
    wealth0: float = 100.0

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValueError(f"attraction sensitivity must be finite, got {self.a}")
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")

    def warn_if_wealth_can_go_negative(self, min_outcome: float) -> None:
        if self.wealth0 + min_outcome < 0:
            warnings.warn(
                f"wealth0 + min outcome = {self.wealth0 + min_outcome} < 0; "
                "CARA utilities will exceed the usual range",
                stacklevel=2,
            )

    def as_dict(self) -> dict:
        d = self.cpt.as_dict()
        d.update({"a": self.a, "eta": self.eta, "wealth0": self.wealth0})
        return d


@dataclass(frozen=True)
class ProspectProbabilities:
    """Decomposition p_A = f_A + q_A for one lottery pair."""

    f_a: float
    q_a: float
    p_a: float

    def __post_init__(self):
        if abs(self.p_a - (self.f_a + self.q_a)) > CONSISTENCY_TOL:
            raise ValueError("p_a != f_a + q_a")
        if abs(self.q_a) > min(self.f_a, 1.0 - self.f_a) + CONSISTENCY_TOL:
            raise ValueError("attraction factor exceeds min(f, 1-f) bound")
        if not (-CONSISTENCY_TOL <= self.p_a <= 1.0 + CONSISTENCY_TOL):
            raise ValueError(f"prospect probability {self.p_a} outside [0, 1]")


def cara_utility(v, eta: float, wealth0: float = 100.0):
    """CARA utility 1 - exp(-eta * (wealth0 + v))."""
    arr = np.asarray(v, dtype=float)
    out = 1.0 - np.exp(-eta * (wealth0 + arr))
    return float(out) if np.isscalar(v) else out


def lottery_cara(lot: Lottery, eta: float, wealth0: float = 100.0) -> float:
    """Expected CARA utility of a lottery."""
    return lot.prob1 * cara_utility(lot.outcome1, eta, wealth0) + lot.prob2 * cara_utility(
        lot.outcome2, eta, wealth0
    )


def attraction(f_a, u_a, u_b, a: float):
    """Attraction factor min(f, 1-f) * tanh(a * (u_a - u_b)).

    The tanh keeps the factor inside the admissible band whatever the CARA
    gap; alternation (q_B = -q_A) holds because swapping the lotteries flips
    both min(f, 1-f) arguments and the sign of the gap.
    """
    f = np.asarray(f_a, dtype=float)
    out = np.minimum(f, 1.0 - f) * np.tanh(a * (np.asarray(u_a) - np.asarray(u_b)))
    return float(out) if out.ndim == 0 else out


def prospect_prob(pair: LotteryPair, params: QdtParams) -> ProspectProbabilities:
    """Full prospect probability of choosing lottery A in a pair.

    Raises if the assembled probability leaves [0, 1] by more than the
    consistency tolerance, which the attraction bound rules out for correct
    inputs; the guard exists to catch regressions, not valid parameters.
    """
    u_a = cpt_utility(pair.lot_a, params.cpt)
    u_b = cpt_utility(pair.lot_b, params.cpt)
    f_a = logit_choice_prob(u_a, u_b, params.cpt.phi)
    q_a = attraction(
        f_a,
        lottery_cara(pair.lot_a, params.eta, params.wealth0),
        lottery_cara(pair.lot_b, params.eta, params.wealth0),
        params.a,
    )
    p_a = min(1.0, max(0.0, f_a + q_a))
    if abs(p_a - (f_a + q_a)) > CONSISTENCY_TOL:
        raise ValueError(
            f"prospect probability {f_a + q_a} outside [0, 1] beyond tolerance"
        )
    return ProspectProbabilities(f_a=f_a, q_a=p_a - f_a, p_a=p_a)


def quarter_law_statistic(qs) -> float:
    """Mean absolute attraction factor of a collection of prospects."""
    arr = np.asarray(qs, dtype=float)
    if arr.size == 0:
        raise ValueError("empty attraction-factor list")
    return float(np.mean(np.abs(arr)))
