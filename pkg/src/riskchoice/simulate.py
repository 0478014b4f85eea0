"""Synthetic populations and choice data for recovery and acceptance tests.

Subjects draw their model parameters from lognormal population distributions
(mirroring the estimation priors); every (subject, pair, session) choice is
then an independent Bernoulli draw from the subject's model probability.
Two-group generation instead tilts each pair's baseline majority probability
with the shift-model ansatz, so generator and shift-model analyses share the
same semantics.

Randomness contract: all draws come from numpy PCG64 generators keyed by
``SeedSequence((seed, tag, index))`` — one stream per subject for choices,
one for the parameter block — so outputs are bit-reproducible and
independent of any parallel scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cpt import CptParams
from .data import ChoiceDataset, ChoiceObservation, Lottery, LotteryPair
from .estimate import ModelId, PairTable, PriorSpec
from .qdt import QdtParams
from .shift import HeteroShiftParams, group_probs

_TAG_PARAMS = 0x51
_TAG_CHOICE = 0x52
_TAG_PAIRS = 0x53
_TAG_GROUPS = 0x54


class SimulateError(ValueError):
    """Raised for invalid population specifications."""


@dataclass(frozen=True)
class LognormalSpec:
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise SimulateError(f"lognormal sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class GroupSpec:
    """Two-group generation: majoritarian fraction and tilt strength.

    ``baseline`` selects where each pair's aggregate majority probability
    comes from: "model" evaluates the choice model at the prior medians,
    "uniform" draws it uniformly from ``baseline_range``.
    """

    majority_fraction: float
    shift_alpha: float
    baseline: str = "model"
    baseline_range: tuple[float, float] = (0.5, 1.0)

    def __post_init__(self):
        if not (0.0 < self.majority_fraction < 1.0):
            raise SimulateError("majority_fraction must be in (0, 1)")
        if self.baseline not in ("model", "uniform"):
            raise SimulateError(f"unknown baseline mode {self.baseline!r}")
        # from_alpha validates the tilt and the implied contrarian tilt
        HeteroShiftParams.from_alpha(self.shift_alpha, self.majority_fraction)


@dataclass
class PopulationSpec:
    n_subjects: int
    model: ModelId = ModelId.LOGIT_CPT
    priors: dict = field(default_factory=lambda: {
        "alpha": LognormalSpec(math.log(0.73), 0.15),
        "lam": LognormalSpec(math.log(1.11), 0.15),
        "delta": LognormalSpec(math.log(0.88), 0.15),
        "gamma": LognormalSpec(math.log(0.65), 0.15),
    })
    phi_spec: LognormalSpec = field(default_factory=lambda: LognormalSpec(math.log(0.30), 0.15))
    qdt_anchor: tuple[float, float, float] | None = None  # (a, eta, wealth0)
    group_spec: GroupSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects <= 0:
            raise SimulateError(f"n_subjects must be positive, got {self.n_subjects}")
        for name in ("alpha", "lam", "delta", "gamma"):
            if name not in self.priors:
                raise SimulateError(f"missing prior for {name}")
        if self.model == ModelId.QDT and self.qdt_anchor is None:
            raise SimulateError("QDT generation needs qdt_anchor=(a, eta, wealth0)")

    def median_params(self) -> CptParams | QdtParams:
        cpt = CptParams(
            alpha=math.exp(self.priors["alpha"].mu),
            lam=math.exp(self.priors["lam"].mu),
            delta=math.exp(self.priors["delta"].mu),
            gamma=math.exp(self.priors["gamma"].mu),
            phi=math.exp(self.phi_spec.mu),
        )
        if self.model == ModelId.QDT:
            a, eta, wealth0 = self.qdt_anchor
            return QdtParams(cpt=cpt, a=a, eta=eta, wealth0=wealth0)
        return cpt

    def to_prior_spec(self) -> PriorSpec:
        return PriorSpec(entries={k: (v.mu, v.sigma) for k, v in self.priors.items()})


@dataclass
class Truth:
    """Ground truth behind a synthetic dataset."""

    spec: PopulationSpec
    subject_ids: list[str]
    subject_params: list[CptParams | QdtParams]
    prob_b: np.ndarray  # (n_subjects, n_pairs) true probability of choosing B
    group_labels: list[str] | None = None
    baseline_majority: np.ndarray | None = None


def sample_population(spec: PopulationSpec, pairs: list[LotteryPair]) -> Truth:
    """Draw per-subject parameters and per-pair true choice probabilities."""
    table = PairTable(pairs)
    subject_ids = [f"S{i:04d}" for i in range(1, spec.n_subjects + 1)]
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, _TAG_PARAMS)))

    if spec.group_spec is not None:
        return _sample_two_group(spec, table, subject_ids, rng)

    draws = {}
    for name in ("alpha", "lam", "delta", "gamma"):
        ln = spec.priors[name]
        draws[name] = np.exp(rng.normal(ln.mu, ln.sigma, size=spec.n_subjects))
    draws["phi"] = np.exp(rng.normal(spec.phi_spec.mu, spec.phi_spec.sigma, size=spec.n_subjects))

    params_list = []
    prob_b = np.empty((spec.n_subjects, len(pairs)))
    for i in range(spec.n_subjects):
        cpt = CptParams(**{k: float(draws[k][i]) for k in ("alpha", "lam", "delta", "gamma", "phi")})
        params: CptParams | QdtParams = cpt
        if spec.model == ModelId.QDT:
            a, eta, wealth0 = spec.qdt_anchor
            params = QdtParams(cpt=cpt, a=a, eta=eta, wealth0=wealth0)
        params_list.append(params)
        prob_b[i] = 1.0 - table.prob_a(params)
    return Truth(
        spec=spec, subject_ids=subject_ids, subject_params=params_list, prob_b=prob_b
    )


def _sample_two_group(spec: PopulationSpec, table: PairTable, subject_ids, rng) -> Truth:
    group = spec.group_spec
    params = HeteroShiftParams.from_alpha(group.shift_alpha, group.majority_fraction)
    median = spec.median_params()

    group_rng = np.random.default_rng(np.random.SeedSequence((spec.seed, _TAG_GROUPS)))
    if group.baseline == "model":
        p_a = table.prob_a(median)
        baseline = np.maximum(p_a, 1.0 - p_a)
        majority_is_b = p_a < 0.5
    else:
        lo, hi = group.baseline_range
        baseline = group_rng.uniform(lo, hi, size=len(table))
        majority_is_b = group_rng.random(len(table)) < 0.5

    p1, p2 = group_probs(baseline, params)
    labels = np.where(
        group_rng.random(len(subject_ids)) < group.majority_fraction,
        "majoritarian",
        "contrarian",
    )
    prob_major = np.where(labels[:, None] == "majoritarian", p1[None, :], p2[None, :])
    prob_b = np.where(majority_is_b[None, :], prob_major, 1.0 - prob_major)
    return Truth(
        spec=spec,
        subject_ids=list(subject_ids),
        subject_params=[median] * len(subject_ids),
        prob_b=prob_b,
        group_labels=list(labels),
        baseline_majority=baseline,
    )


def simulate_choices(
    truth: Truth, pairs: list[LotteryPair], sessions: int = 2, seed: int | None = None
) -> ChoiceDataset:
    """Independent Bernoulli choices for every subject, pair and session.

    The per-subject stream is keyed by (seed, subject index); within a
    stream, draws are ordered by session then pair.
    """
    if sessions not in (1, 2):
        raise SimulateError("sessions must be 1 or 2")
    seed = truth.spec.seed if seed is None else seed
    observations = []
    for i, sid in enumerate(truth.subject_ids):
        rng = np.random.default_rng(np.random.SeedSequence((seed, _TAG_CHOICE, i)))
        for session in range(1, sessions + 1):
            draws = rng.random(len(pairs))
            chose_b = draws < truth.prob_b[i]
            for j, pair in enumerate(pairs):
                observations.append(
                    ChoiceObservation(sid, pair.pair_id, session, "B" if chose_b[j] else "A")
                )
    return ChoiceDataset(pairs, observations)


def simulate_dataset(
    spec: PopulationSpec, pairs: list[LotteryPair], sessions: int = 2
) -> tuple[ChoiceDataset, Truth]:
    truth = sample_population(spec, pairs)
    return simulate_choices(truth, pairs, sessions=sessions), truth


def default_pair_battery(
    n_pairs: int = 91, seed: int = 20_240_001, outcome_bound: float = 100.0
) -> list[LotteryPair]:
    """Deterministic synthetic battery mirroring the usual composition.

    35 pure-gain, 25 pure-loss, 25 mixed and 6 mixed-zero pairs (scaled to
    ``n_pairs``), outcomes on integer monetary units within the bound,
    probabilities on a 5% grid. Expected values within each pair are pushed
    close together so choices stay genuinely stochastic.
    """
    if n_pairs < 1:
        raise SimulateError("battery needs at least 1 pair")
    counts = {
        "gain": round(n_pairs * 35 / 91),
        "loss": round(n_pairs * 25 / 91),
        "mixed_zero": round(n_pairs * 6 / 91),
    }
    counts["mixed"] = n_pairs - sum(counts.values())
    while counts["mixed"] < 0:  # rounding overshoot on tiny batteries
        largest = max(counts, key=lambda k: counts[k] if k != "mixed" else -1)
        counts[largest] -= 1
        counts["mixed"] += 1
    rng = np.random.default_rng(np.random.SeedSequence((seed, _TAG_PAIRS)))
    prob_grid = np.arange(0.05, 1.0, 0.05)

    def draw_prob():
        return float(rng.choice(prob_grid))

    def close_ev_partner(ev: float, lo: float, hi: float):
        # resample a lottery until its EV lands near the target
        for _ in range(200):
            v1 = float(rng.integers(lo, hi + 1))
            p1 = draw_prob()
            v2 = float(rng.integers(lo, hi + 1))
            lot = Lottery(v1, p1, v2, 1.0 - p1)
            if abs(lot.expected_value() - ev) <= max(5.0, 0.15 * abs(ev)):
                return lot
        return lot

    pairs = []
    idx = 0

    def add(lot_a, lot_b):
        nonlocal idx
        idx += 1
        pairs.append(LotteryPair(f"P{idx:03d}", lot_a, lot_b))

    b = int(outcome_bound)
    for _ in range(counts["gain"]):
        p1 = draw_prob()
        lot_a = Lottery(float(rng.integers(1, b + 1)), p1, float(rng.integers(1, b + 1)), 1.0 - p1)
        add(lot_a, close_ev_partner(lot_a.expected_value(), 1, b))
    for _ in range(counts["loss"]):
        p1 = draw_prob()
        lot_a = Lottery(float(rng.integers(-b, 0)), p1, float(rng.integers(-b, 0)), 1.0 - p1)
        add(lot_a, close_ev_partner(lot_a.expected_value(), -b, -1))
    for _ in range(counts["mixed"]):
        p1 = draw_prob()
        lot_a = Lottery(float(rng.integers(1, b + 1)), p1, float(rng.integers(-b, 0)), 1.0 - p1)
        add(lot_a, close_ev_partner(lot_a.expected_value(), -b, b))
    for _ in range(counts["mixed_zero"]):
        p_gain = draw_prob()
        gain = Lottery(float(rng.integers(1, b + 1)), p_gain, 0.0, 1.0 - p_gain)
        p_loss = draw_prob()
        loss = Lottery(float(rng.integers(-b, 0)), p_loss, 0.0, 1.0 - p_loss)
        add(gain, loss)
    return pairs
