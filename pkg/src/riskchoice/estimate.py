"""Maximum-likelihood calibration of logit-CPT and QDT choice models.

Two levels, mirroring the usual hierarchical-ML workflow for this family of
models:

* aggregate: one parameter vector for a whole (sub)population, estimated by
  maximizing the product of Bernoulli likelihoods over subjects and pairs;
* individual: per-subject parameters (alpha, lam, delta, gamma, phi),
  penalized by lognormal population priors fitted to first-pass unpenalized
  estimates. For QDT the attraction block (a, eta) is frozen at its
  aggregate estimate so both models carry five free individual parameters;
  phi receives no prior weight.

All optimizations run in log-parameter space through the tabu-seeded
Nelder-Mead driver, which keeps the positivity constraints implicit and is
deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import stats
from .cpt import LOGIT_CLAMP, CptParams, order_outcomes
from .data import TIME1, TIME2, ChoiceDataset, Kind
from .optimize import Objective, OptimResult, SimplexConfig, TabuConfig, global_minimize, nelder_mead
from .qdt import QdtParams


class EstimateError(ValueError):
    """Raised for unusable estimation inputs."""


class ModelId(str, Enum):
    LOGIT_CPT = "logit-cpt"
    QDT = "qdt"


CPT_PARAM_NAMES = ("alpha", "lam", "delta", "gamma", "phi")
QDT_PARAM_NAMES = CPT_PARAM_NAMES + ("a", "eta")
PRIOR_PARAM_NAMES = ("alpha", "lam", "delta", "gamma")

# Natural-space box constraints. Strictly positive parameters are optimized
# in log space; the attraction sensitivity is optimized on a linear scale so
# both signs are reachable and the nested model (a = 0) is interior. The eta
# range spans gentle to strong curvature over the wealth scale; widening it
# mostly adds near-redundant directions that inflate nested-model statistics.
DEFAULT_BOUNDS = {
    "alpha": (0.05, 5.0),
    "lam": (0.05, 20.0),
    "delta": (0.05, 10.0),
    "gamma": (0.05, 5.0),
    "phi": (1e-3, 50.0),
    "a": (-50.0, 50.0),
    "eta": (0.01, 0.3),
}

LINEAR_SCALE_NAMES = frozenset({"a"})

PROB_CLIP = 1e-12


@dataclass
class FitConfig:
    """Optimizer and numerical settings shared by all fits."""

    seed: int = 0
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    wealth0: float = 100.0
    prob_clip: float = PROB_CLIP
    sigma_floor: float = 1e-3
    tabu: TabuConfig = field(default_factory=lambda: TabuConfig(restarts=10, grid_resolution=5))
    simplex: SimplexConfig = field(default_factory=SimplexConfig)
    individual_tabu: TabuConfig = field(default_factory=lambda: TabuConfig(restarts=3, grid_resolution=4))
    warm_start: bool = True
    threads: int = 1


@dataclass(frozen=True)
class PriorSpec:
    """Lognormal population priors for alpha, lam, gamma, delta."""

    entries: dict  # name -> (mu, sigma)

    def __post_init__(self):
        for name in PRIOR_PARAM_NAMES:
            if name not in self.entries:
                raise EstimateError(f"prior missing parameter {name}")
            mu, sigma = self.entries[name]
            if sigma <= 0:
                raise EstimateError(f"prior sigma for {name} must be > 0")

    def log_density(self, params: CptParams) -> float:
        total = 0.0
        for name in PRIOR_PARAM_NAMES:
            mu, sigma = self.entries[name]
            total += stats.lognormal_logpdf(getattr(params, name), mu, sigma)
        return total

    def median(self, name: str) -> float:
        return math.exp(self.entries[name][0])

    def as_dict(self) -> dict:
        return {k: {"mu": v[0], "sigma": v[1]} for k, v in self.entries.items()}


@dataclass
class AggregateFit:
    model: ModelId
    params: CptParams | QdtParams
    log_likelihood: float
    session: int
    subject_filter: str
    converged: bool
    boundary: list[str]
    n_observations: int
    evaluations: int

    @property
    def cpt(self) -> CptParams:
        return self.params.cpt if isinstance(self.params, QdtParams) else self.params


@dataclass
class IndividualFit:
    subject_id: str
    params: CptParams | QdtParams
    log_likelihood: float
    penalized_objective: float | None
    explained_fraction: float
    converged: bool


@dataclass
class ModelComparison:
    wilks_statistic: float
    degrees_of_freedom: int
    p_value: float
    rss_by_kind: dict
    rss_all: dict
    correlation: dict
    mean_log_lik: dict | None
    mean_explained_fraction: dict | None


# -- vectorized pair-level kernels ------------------------------------------

class PairTable:
    """Column layout of a pair battery for vectorized model evaluation.

    Precomputes outcome magnitudes, gain masks and -ln(p) columns once so
    the per-evaluation kernel is a handful of ufunc calls; optimizers spend
    essentially all their time here.
    """

    def __init__(self, pairs):
        self.pairs = list(pairs)
        cols = []
        for side in ("lot_a", "lot_b"):
            o1 = np.array([getattr(p, side).outcome1 for p in pairs])
            q1 = np.array([getattr(p, side).prob1 for p in pairs])
            o2 = np.array([getattr(p, side).outcome2 for p in pairs])
            q2 = np.array([getattr(p, side).prob2 for p in pairs])
            v1, p1, v2, p2, same = order_outcomes(o1, q1, o2, q2)
            with np.errstate(divide="ignore"):
                cols.append({
                    "mag1": np.abs(v1), "gain1": v1 >= 0, "neglog1": -np.log(p1),
                    "mag2": np.abs(v2), "gain2": v2 >= 0, "neglog2": -np.log(p2),
                    "same": same, "raw": (o1, q1, o2, q2),
                })
        self._a, self._b = cols
        self.kinds = [p.kind for p in pairs]

    def __len__(self):
        return len(self.pairs)

    def _utility(self, side: dict, params: CptParams) -> np.ndarray:
        val1 = side["mag1"] ** params.alpha * np.where(side["gain1"], 1.0, -params.lam)
        val2 = side["mag2"] ** params.alpha * np.where(side["gain2"], 1.0, -params.lam)
        w1 = np.exp(-params.delta * side["neglog1"] ** params.gamma)
        w2 = np.exp(-params.delta * side["neglog2"] ** params.gamma)
        return w1 * val1 + np.where(side["same"], 1.0 - w1, w2) * val2

    def cpt_prob_a(self, params: CptParams) -> np.ndarray:
        """Logit-CPT probability of choosing A, per pair."""
        z = params.phi * (self._utility(self._b, params) - self._utility(self._a, params))
        return 1.0 / (1.0 + np.exp(np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)))

    def cara_gap(self, eta: float, wealth0: float) -> np.ndarray:
        """Expected-CARA-utility difference U_A - U_B, per pair."""
        a1, ap1, a2, ap2 = self._a["raw"]
        b1, bp1, b2, bp2 = self._b["raw"]
        u = lambda v: 1.0 - np.exp(-eta * (wealth0 + v))
        return (ap1 * u(a1) + ap2 * u(a2)) - (bp1 * u(b1) + bp2 * u(b2))

    def qdt_prob_a(self, params: QdtParams) -> np.ndarray:
        """QDT probability of choosing A, per pair."""
        f = self.cpt_prob_a(params.cpt)
        q = np.minimum(f, 1.0 - f) * np.tanh(params.a * self.cara_gap(params.eta, params.wealth0))
        return np.clip(f + q, 0.0, 1.0)

    def prob_a(self, params: CptParams | QdtParams) -> np.ndarray:
        if isinstance(params, QdtParams):
            return self.qdt_prob_a(params)
        return self.cpt_prob_a(params)


def model_prob_a(dataset: ChoiceDataset, params: CptParams | QdtParams) -> np.ndarray:
    """Per-pair probability of choosing A under either model."""
    return PairTable(dataset.pairs).prob_a(params)


def _count_log_likelihood(p_a: np.ndarray, n_b: np.ndarray, n: np.ndarray, clip: float) -> float:
    p = np.clip(p_a, clip, 1.0 - clip)
    n_a = n - n_b
    return float(np.sum(n_a * np.log(p) + n_b * np.log1p(-p)))


def aggregate_log_likelihood(
    dataset: ChoiceDataset,
    params: CptParams | QdtParams,
    session: int,
    subject_ids=None,
    prob_clip: float = PROB_CLIP,
) -> float:
    """Recompute the aggregate log-likelihood for stored parameters."""
    n_b, n = dataset.counts(session, subject_ids)
    return _count_log_likelihood(model_prob_a(dataset, params), n_b, n, prob_clip)


def _subject_log_likelihood(p_a: np.ndarray, choices: np.ndarray, clip: float) -> float:
    answered = choices >= 0
    p = np.clip(p_a[answered], clip, 1.0 - clip)
    phi = choices[answered]
    return float(np.sum(np.where(phi == 0, np.log(p), np.log1p(-p))))


def explained_fraction(p_a: np.ndarray, choices: np.ndarray) -> float:
    """Fraction of observed choices matching the modal predicted choice.

    Pairs where the model is exactly indifferent count half. Unanswered
    pairs are excluded.
    """
    answered = choices >= 0
    if not np.any(answered):
        raise EstimateError("subject has no observations in this session")
    p = p_a[answered]
    phi = choices[answered]
    modal_a = p > 0.5
    tie = p == 0.5
    credit = np.where(tie, 0.5, (modal_a & (phi == 0)) | (~modal_a & ~tie & (phi == 1)))
    return float(np.mean(credit))


# -- parameter-space plumbing ------------------------------------------------

def _param_names(model: ModelId):
    return QDT_PARAM_NAMES if model == ModelId.QDT else CPT_PARAM_NAMES


def _to_vector(values: dict, names) -> np.ndarray:
    return np.array([
        values[n] if n in LINEAR_SCALE_NAMES else math.log(values[n]) for n in names
    ])


def _from_vector(vec: np.ndarray, names) -> dict:
    return {
        n: float(v) if n in LINEAR_SCALE_NAMES else float(math.exp(v))
        for n, v in zip(names, vec)
    }


def _make_params(values: dict, model: ModelId, wealth0: float) -> CptParams | QdtParams:
    cpt = CptParams(**{k: values[k] for k in CPT_PARAM_NAMES})
    if model == ModelId.QDT:
        return QdtParams(cpt=cpt, a=values["a"], eta=values["eta"], wealth0=wealth0)
    return cpt

def _transformed_bounds(names, bounds: dict):
    out = []
    for n in names:
        lo, hi = bounds[n]
        if n in LINEAR_SCALE_NAMES:
            out.append((lo, hi))
        else:
            out.append((math.log(lo), math.log(hi)))
    return out


def _boundary_names(vec: np.ndarray, names, bounds) -> list[str]:
    out = []
    for v, name, (lo, hi) in zip(vec, names, bounds):
        if min(v - lo, hi - v) < 1e-3 * (hi - lo):
            out.append(name)
    return out


def _default_start(names, bounds: dict) -> dict:
    start = {
        "alpha": 0.8, "lam": 1.5, "delta": 1.0, "gamma": 0.7, "phi": 0.3,
        "a": 1.0, "eta": 0.05,
    }
    out = {}
    for n in names:
        lo, hi = bounds[n]
        width = hi - lo
        out[n] = min(max(start[n], lo + 1e-3 * width), hi - 1e-3 * width)
    return out


# -- fitting ------------------------------------------------------------------

def _resolve_subjects(dataset: ChoiceDataset, subject_ids, subject_filter: str):
    if subject_ids is not None:
        ids = list(subject_ids)
        if not ids:
            raise EstimateError("empty subject filter")
        return ids
    if subject_filter != "all":
        raise EstimateError(
            f"subject_filter {subject_filter!r} requires explicit subject_ids from clustering"
        )
    return None


def fit_aggregate(
    dataset: ChoiceDataset,
    model: ModelId,
    session: int = TIME1,
    subject_ids=None,
    subject_filter: str = "all",
    config: FitConfig | None = None,
    warm_from: AggregateFit | None = None,
) -> AggregateFit:
    """Aggregate maximum-likelihood fit of one model on one session.

    A QDT fit is warm-started from the nested logit-CPT solution with the
    attraction sensitivity at exactly zero (``warm_from`` reuses an existing
    logit-CPT fit, otherwise one is computed internally), in addition to the
    tabu candidates. Since that start reproduces the logit-CPT likelihood
    exactly, the QDT likelihood can never end up below it.
    """
    config = config or FitConfig()
    ids = _resolve_subjects(dataset, subject_ids, subject_filter)
    n_b, n = dataset.counts(session, ids)
    if int(n.sum()) == 0:
        raise EstimateError(f"no observations in session {session} for this filter")

    table = PairTable(dataset.pairs)
    names = _param_names(model)
    bounds = _transformed_bounds(names, config.bounds)

    def neg_loglik(vec):
        values = _from_vector(vec, names)
        params = _make_params(values, model, config.wealth0)
        return -_count_log_likelihood(table.prob_a(params), n_b, n, config.prob_clip)

    obj = Objective(dimension=len(names), fn=neg_loglik, bounds=bounds)
    tabu = replace(config.tabu, seed=config.seed)
    result = global_minimize(obj, tabu, config.simplex)

    extra_starts = [_to_vector(_default_start(names, config.bounds), names)]
    if model == ModelId.QDT and config.warm_start:
        if warm_from is not None and warm_from.model == ModelId.LOGIT_CPT:
            cpt_fit = warm_from
        else:
            cpt_fit = fit_aggregate(
                dataset, ModelId.LOGIT_CPT, session, subject_ids=ids, config=config
            )
        warm = dict(cpt_fit.cpt.as_dict())
        warm["a"] = 0.0
        warm["eta"] = math.sqrt(config.bounds["eta"][0] * config.bounds["eta"][1])
        extra_starts.append(_to_vector(warm, names))
    for start in extra_starts:
        run = nelder_mead(obj, start, config.simplex)
        result.restart_trace.append((start, run.best_value))
        result.evaluations += run.evaluations
        if run.best_value < result.best_value:
            result = replace(
                run,
                evaluations=result.evaluations,
                restart_trace=result.restart_trace,
            )

    values = _from_vector(result.best_point, names)
    params = _make_params(values, model, config.wealth0)
    return AggregateFit(
        model=model,
        params=params,
        log_likelihood=-result.best_value,
        session=session,
        subject_filter=subject_filter if ids is None else subject_filter,
        converged=result.converged,
        boundary=_boundary_names(result.best_point, names, bounds),
        n_observations=int(n.sum()),
        evaluations=result.evaluations,
    )


def _refine_from(
    dataset: ChoiceDataset,
    fit: AggregateFit,
    start_values: dict,
    subject_ids,
    config: FitConfig,
) -> AggregateFit:
    """One simplex run from an explicit start; keep it only if it improves."""
    n_b, n = dataset.counts(fit.session, subject_ids)
    table = PairTable(dataset.pairs)
    names = _param_names(fit.model)
    bounds = _transformed_bounds(names, config.bounds)

    def neg_loglik(vec):
        params = _make_params(_from_vector(vec, names), fit.model, config.wealth0)
        return -_count_log_likelihood(table.prob_a(params), n_b, n, config.prob_clip)

    obj = Objective(dimension=len(names), fn=neg_loglik, bounds=bounds)
    run = nelder_mead(obj, _to_vector(start_values, names), config.simplex)
    if run.best_value >= -fit.log_likelihood:
        return fit
    values = _from_vector(run.best_point, names)
    return AggregateFit(
        model=fit.model,
        params=_make_params(values, fit.model, config.wealth0),
        log_likelihood=-run.best_value,
        session=fit.session,
        subject_filter=fit.subject_filter,
        converged=run.converged,
        boundary=_boundary_names(run.best_point, names, bounds),
        n_observations=fit.n_observations,
        evaluations=fit.evaluations + run.evaluations,
    )


def fit_model_pair(
    dataset: ChoiceDataset,
    session: int = TIME1,
    subject_ids=None,
    subject_filter: str = "all",
    config: FitConfig | None = None,
) -> tuple[AggregateFit, AggregateFit]:
    """Fit logit-CPT and QDT on the same data, warm-started both ways.

    The QDT fit starts (among other candidates) from the logit-CPT solution
    with zero attraction; the logit-CPT fit is then re-polished from the QDT
    solution's CPT block. This keeps the likelihood-ratio statistic free of
    one-sided optimizer slack, which matters when the true attraction is
    small.
    """
    config = config or FitConfig()
    fit_cpt = fit_aggregate(
        dataset, ModelId.LOGIT_CPT, session, subject_ids=subject_ids,
        subject_filter=subject_filter, config=config,
    )
    fit_qdt = fit_aggregate(
        dataset, ModelId.QDT, session, subject_ids=subject_ids,
        subject_filter=subject_filter, config=config, warm_from=fit_cpt,
    )
    fit_cpt = _refine_from(
        dataset, fit_cpt, fit_qdt.cpt.as_dict(), subject_ids, config
    )
    return fit_cpt, fit_qdt


def fit_priors(individual_fits: list[IndividualFit], sigma_floor: float = 1e-3) -> PriorSpec:
    """Lognormal ML priors from unpenalized per-subject estimates.

    Non-positive estimates are excluded with a warning; the ML sigma is
    floored to keep later penalties finite.
    """
    entries = {}
    for name in PRIOR_PARAM_NAMES:
        values = []
        for fit in individual_fits:
            v = getattr(fit.params if isinstance(fit.params, CptParams) else fit.params.cpt, name)
            if v <= 0:
                warnings.warn(
                    f"excluding non-positive {name} estimate for subject {fit.subject_id}",
                    stacklevel=2,
                )
                continue
            values.append(v)
        if len(values) < 2:
            raise EstimateError(f"need >= 2 positive estimates of {name} for a prior")
        mu, sigma = stats.lognormal_ml(values, sigma_floor=sigma_floor)
        entries[name] = (mu, sigma)
    return PriorSpec(entries=entries)


def _fit_one_subject(
    table: PairTable,
    choices: np.ndarray,
    model: ModelId,
    priors: PriorSpec | None,
    anchor_a_eta: tuple[float, float] | None,
    config: FitConfig,
    seed: int,
    warm_values: dict | None,
):
    names = CPT_PARAM_NAMES  # individual level always has five free parameters
    log_bounds = _transformed_bounds(names, config.bounds)
    answered = choices >= 0

    if model == ModelId.QDT:
        a_agg, eta_agg = anchor_a_eta
        tanh_block = np.tanh(a_agg * table.cara_gap(eta_agg, config.wealth0))
    else:
        tanh_block = None

    def prob_a(params: CptParams) -> np.ndarray:
        f = table.cpt_prob_a(params)
        if tanh_block is None:
            return f
        return np.clip(f + np.minimum(f, 1.0 - f) * tanh_block, 0.0, 1.0)

    def neg_objective(vec):
        values = _from_vector(vec, names)
        params = CptParams(**values)
        ll = _subject_log_likelihood(prob_a(params), choices, config.prob_clip)
        if priors is not None:
            ll += priors.log_density(params)
        return -ll

    obj = Objective(dimension=len(names), fn=neg_objective, bounds=log_bounds)
    tabu = replace(config.individual_tabu, seed=seed)
    result = global_minimize(obj, tabu, config.simplex)
    starts = [_default_start(names, config.bounds)]
    if warm_values is not None:
        starts.append(warm_values)
    if priors is not None:
        starts.append({
            **{n: priors.median(n) for n in PRIOR_PARAM_NAMES},
            "phi": warm_values["phi"] if warm_values else _default_start(names, config.bounds)["phi"],
        })
    for start_values in starts:
        run = nelder_mead(obj, _to_vector(start_values, names), config.simplex)
        result.evaluations += run.evaluations
        if run.best_value < result.best_value:
            result = replace(run, evaluations=result.evaluations)

    values = _from_vector(result.best_point, names)
    cpt = CptParams(**values)
    params: CptParams | QdtParams
    if model == ModelId.QDT:
        params = QdtParams(cpt=cpt, a=anchor_a_eta[0], eta=anchor_a_eta[1], wealth0=config.wealth0)
    else:
        params = cpt
    p_a = prob_a(cpt)
    ll = _subject_log_likelihood(p_a, choices, config.prob_clip)
    return params, ll, (None if priors is None else -result.best_value), explained_fraction(p_a, choices), result.converged


def fit_individual(
    dataset: ChoiceDataset,
    model: ModelId,
    session: int = TIME1,
    priors: PriorSpec | None = None,
    aggregate_anchor: AggregateFit | None = None,
    subject_ids=None,
    config: FitConfig | None = None,
) -> list[IndividualFit]:
    """Per-subject fits: unpenalized when ``priors`` is None, else prior-weighted.

    For QDT, ``aggregate_anchor`` must be a QDT aggregate fit; its (a, eta)
    are fixed at the individual level. Per-subject optimizer failures are
    flagged on the result rather than aborting the batch.
    """
    config = config or FitConfig()
    if model == ModelId.QDT:
        if aggregate_anchor is None or not isinstance(aggregate_anchor.params, QdtParams):
            raise EstimateError("QDT individual fits need a QDT aggregate_anchor")
        anchor = (aggregate_anchor.params.a, aggregate_anchor.params.eta)
    else:
        anchor = None
    warm = None
    if aggregate_anchor is not None:
        warm = {k: v for k, v in aggregate_anchor.cpt.as_dict().items()}

    ids = list(subject_ids) if subject_ids is not None else list(dataset.subjects)
    table = PairTable(dataset.pairs)
    k = session - 1

    def run(one_id):
        idx = dataset.subject_index(one_id)
        choices = dataset.choice_tensor[idx, :, k]
        if not np.any(choices >= 0):
            raise EstimateError(f"subject {one_id} has no session-{session} observations")
        params, ll, pen, ef, conv = _fit_one_subject(
            table, choices, model, priors, anchor, config,
            seed=config.seed * 100_003 + idx, warm_values=warm,
        )
        return IndividualFit(
            subject_id=one_id, params=params, log_likelihood=ll,
            penalized_objective=pen, explained_fraction=ef, converged=conv,
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(run, ids))
    return [run(one_id) for one_id in ids]


def fit_individual_hml(
    dataset: ChoiceDataset,
    model: ModelId,
    session: int = TIME1,
    aggregate_anchor: AggregateFit | None = None,
    subject_ids=None,
    config: FitConfig | None = None,
) -> tuple[list[IndividualFit], PriorSpec]:
    """Full two-stage hierarchy: unpenalized MLEs, priors, penalized refits."""
    config = config or FitConfig()
    stage1 = fit_individual(
        dataset, model, session, priors=None, aggregate_anchor=aggregate_anchor,
        subject_ids=subject_ids, config=config,
    )
    priors = fit_priors(stage1, sigma_floor=config.sigma_floor)
    stage2 = fit_individual(
        dataset, model, session, priors=priors, aggregate_anchor=aggregate_anchor,
        subject_ids=subject_ids, config=config,
    )
    return stage2, priors


# -- prediction and comparison ------------------------------------------------

@dataclass
class SubjectPrediction:
    subject_id: str
    log_likelihood: float
    predicted_fraction: float


@dataclass
class PredictionReport:
    session: int
    log_likelihood: float | None = None
    rss_by_kind: dict | None = None
    rss_all: float | None = None
    correlation: float | None = None
    per_subject: list[SubjectPrediction] | None = None
    mean_log_likelihood: float | None = None
    mean_predicted_fraction: float | None = None


def _frequency_rss(dataset: ChoiceDataset, p_a: np.ndarray, session: int):
    n_b, n = dataset.counts(session)
    if np.any(n == 0):
        raise EstimateError(f"pairs without responses in session {session}")
    observed_b = n_b / n
    predicted_b = 1.0 - p_a
    by_kind: dict[str, float] = {}
    for kind in Kind:
        mask = np.array([k == kind for k in dataset.kinds()])
        if np.any(mask):
            by_kind[kind.value] = stats.rss(predicted_b[mask], observed_b[mask])
    return by_kind, stats.rss(predicted_b, observed_b), stats.pearson(predicted_b, observed_b)


def predict_session2(dataset: ChoiceDataset, fits) -> PredictionReport:
    """Score session-1 fits on session-2 data.

    ``fits`` is either an AggregateFit or a list of IndividualFit. Raises if
    the dataset has no session-2 observations.
    """
    if not dataset.has_session(TIME2):
        raise EstimateError("dataset has no session-2 observations")
    report = PredictionReport(session=TIME2)
    table = PairTable(dataset.pairs)
    if isinstance(fits, AggregateFit):
        p_a = table.prob_a(fits.params)
        report.log_likelihood = aggregate_log_likelihood(dataset, fits.params, TIME2)
        report.rss_by_kind, report.rss_all, report.correlation = _frequency_rss(
            dataset, p_a, TIME2
        )
        return report

    per_subject = []
    for fit in fits:
        idx = dataset.subject_index(fit.subject_id)
        choices = dataset.choice_tensor[idx, :, TIME2 - 1]
        if not np.any(choices >= 0):
            continue
        p_a = table.prob_a(fit.params)
        per_subject.append(
            SubjectPrediction(
                subject_id=fit.subject_id,
                log_likelihood=_subject_log_likelihood(p_a, choices, PROB_CLIP),
                predicted_fraction=explained_fraction(p_a, choices),
            )
        )
    if not per_subject:
        raise EstimateError("no subject has session-2 observations")
    report.per_subject = per_subject
    report.mean_log_likelihood = float(np.mean([s.log_likelihood for s in per_subject]))
    report.mean_predicted_fraction = float(np.mean([s.predicted_fraction for s in per_subject]))
    return report


WILKS_SLACK = 1e-6


def wilks_test(log_lik_restricted: float, log_lik_full: float, df: int) -> tuple[float, float]:
    """Likelihood-ratio statistic 2 * (LL_full - LL_restricted) and its p-value.

    A statistic below -WILKS_SLACK signals an optimizer failure (the full
    model contains the restricted one); small negatives are clamped to zero.
    """
    statistic = 2.0 * (log_lik_full - log_lik_restricted)
    if statistic < -WILKS_SLACK:
        raise EstimateError(
            f"negative likelihood-ratio statistic {statistic}: restricted fit beat full fit"
        )
    statistic = max(statistic, 0.0)
    return statistic, stats.chi_square_survival(statistic, df)


def compare_models(
    dataset: ChoiceDataset,
    fit_cpt: AggregateFit,
    fit_qdt: AggregateFit,
    session: int = TIME1,
    individual_cpt: list[IndividualFit] | None = None,
    individual_qdt: list[IndividualFit] | None = None,
) -> ModelComparison:
    """Side-by-side statistics for the nested pair of aggregate fits."""
    if fit_cpt.session != session or fit_qdt.session != session:
        raise EstimateError("fits were not computed on the requested session")
    table = PairTable(dataset.pairs)
    rss_by_kind: dict[str, dict] = {}
    rss_all: dict[str, float] = {}
    correlation: dict[str, float] = {}
    for fit in (fit_cpt, fit_qdt):
        by_kind, total, corr = _frequency_rss(dataset, table.prob_a(fit.params), session)
        key = fit.model.value
        for kind, value in by_kind.items():
            rss_by_kind.setdefault(kind, {})[key] = value
        rss_all[key] = total
        correlation[key] = corr

    statistic, p_value = wilks_test(fit_cpt.log_likelihood, fit_qdt.log_likelihood, df=2)

    mean_ll = mean_ef = None
    if individual_cpt is not None and individual_qdt is not None:
        mean_ll = {
            ModelId.LOGIT_CPT.value: float(np.mean([f.log_likelihood for f in individual_cpt])),
            ModelId.QDT.value: float(np.mean([f.log_likelihood for f in individual_qdt])),
        }
        mean_ef = {
            ModelId.LOGIT_CPT.value: float(np.mean([f.explained_fraction for f in individual_cpt])),
            ModelId.QDT.value: float(np.mean([f.explained_fraction for f in individual_qdt])),
        }
    return ModelComparison(
        wilks_statistic=statistic,
        degrees_of_freedom=2,
        p_value=p_value,
        rss_by_kind=rss_by_kind,
        rss_all=rss_all,
        correlation=correlation,
        mean_log_lik=mean_ll,
        mean_explained_fraction=mean_ef,
    )
