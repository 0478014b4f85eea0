import math

import numpy as np
import pytest

from riskchoice.cpt import CptParams
from riskchoice.data import ChoiceDataset, ChoiceObservation, Lottery, LotteryPair
from riskchoice.estimate import (
    DEFAULT_BOUNDS,
    EstimateError,
    FitConfig,
    IndividualFit,
    ModelId,
    PairTable,
    PriorSpec,
    aggregate_log_likelihood,
    compare_models,
    explained_fraction,
    fit_aggregate,
    fit_individual,
    fit_individual_hml,
    fit_model_pair,
    fit_priors,
    predict_session2,
    wilks_test,
)
from riskchoice.qdt import QdtParams
from riskchoice.simulate import (
    LognormalSpec,
    PopulationSpec,
    default_pair_battery,
    simulate_dataset,
)
from riskchoice.stats import lognormal_logpdf

CPT_REF = CptParams(alpha=0.73, lam=1.11, delta=0.88, gamma=0.65, phi=0.30)


def light_config(seed=0, **kwargs):
    from riskchoice.optimize import TabuConfig

    cfg = FitConfig(seed=seed, **kwargs)
    cfg.tabu = TabuConfig(restarts=6, grid_resolution=5, seed=seed)
    return cfg


def spec_at(center, sigma, n_subjects, seed, **kwargs):
    return PopulationSpec(
        n_subjects=n_subjects,
        priors={
            "alpha": LognormalSpec(math.log(center.alpha), sigma),
            "lam": LognormalSpec(math.log(center.lam), sigma),
            "delta": LognormalSpec(math.log(center.delta), sigma),
            "gamma": LognormalSpec(math.log(center.gamma), sigma),
        },
        phi_spec=LognormalSpec(math.log(center.phi), sigma),
        seed=seed,
        **kwargs,
    )


@pytest.fixture(scope="module")
def battery():
    return default_pair_battery()


@pytest.fixture(scope="module")
def small_dataset(battery):
    spec = spec_at(CPT_REF, 0.08, 24, seed=7)
    ds, truth = simulate_dataset(spec, battery)
    return ds, truth


class TestAggregateFit:
    def test_recovers_generator_neighborhood(self, battery):
        spec = spec_at(CPT_REF, 0.08, 142, seed=11)
        ds, _ = simulate_dataset(spec, battery, sessions=1)
        fit = fit_aggregate(ds, ModelId.LOGIT_CPT, config=light_config(1))
        got = fit.params
        assert got.alpha == pytest.approx(CPT_REF.alpha, rel=0.10)
        assert got.delta == pytest.approx(CPT_REF.delta, rel=0.10)
        assert got.gamma == pytest.approx(CPT_REF.gamma, rel=0.10)
        assert got.lam == pytest.approx(CPT_REF.lam, rel=0.20)
        assert got.phi == pytest.approx(CPT_REF.phi, rel=0.20)

    def test_log_likelihood_recomputable(self, small_dataset):
        ds, _ = small_dataset
        fit = fit_aggregate(ds, ModelId.LOGIT_CPT, config=light_config(2))
        fresh = aggregate_log_likelihood(ds, fit.params, session=1)
        assert fresh == pytest.approx(fit.log_likelihood, abs=1e-9)

    def test_all_a_dataset_pushes_phi_to_bound(self):
        # lottery A dominates by a hair, and near-unit outcomes keep the
        # achievable utility gap small whatever the curvature, so unanimous
        # A data can only push the logit steepness into its upper bound
        pairs = [
            LotteryPair(
                f"D{j}",
                Lottery(1.02 + 0.001 * j, 0.5, 1.01, 0.5),
                Lottery(1.015 + 0.001 * j, 0.5, 1.005, 0.5),
            )
            for j in range(3)
        ]
        obs = [
            ChoiceObservation(f"s{i}", p.pair_id, 1, "A")
            for i in range(25)
            for p in pairs
        ]
        ds = ChoiceDataset(pairs, obs)
        fit = fit_aggregate(ds, ModelId.LOGIT_CPT, config=light_config(3))
        assert "phi" in fit.boundary

    def test_empty_filter_rejected(self, small_dataset):
        ds, _ = small_dataset
        with pytest.raises(EstimateError):
            fit_aggregate(ds, ModelId.LOGIT_CPT, subject_ids=[])

    def test_session_without_data_rejected(self, battery):
        spec = spec_at(CPT_REF, 0.08, 5, seed=3)
        ds, _ = simulate_dataset(spec, battery, sessions=1)
        with pytest.raises(EstimateError):
            fit_aggregate(ds, ModelId.LOGIT_CPT, session=2)

    def test_deterministic(self, small_dataset):
        ds, _ = small_dataset
        a = fit_aggregate(ds, ModelId.LOGIT_CPT, config=light_config(5))
        b = fit_aggregate(ds, ModelId.LOGIT_CPT, config=light_config(5))
        assert a.params == b.params
        assert a.log_likelihood == b.log_likelihood


class TestNesting:
    def test_qdt_never_below_cpt(self, battery):
        for seed in range(3):
            spec = spec_at(CPT_REF, 0.10, 40, seed=100 + seed)
            ds, _ = simulate_dataset(spec, battery, sessions=1)
            fit_c, fit_q = fit_model_pair(ds, config=light_config(seed))
            assert fit_q.log_likelihood >= fit_c.log_likelihood - 1e-6

    def test_qdt_recovers_attraction_on_strong_signal(self, battery):
        spec = spec_at(
            CptParams(0.69, 1.02, 0.89, 0.63, 0.37), 0.05, 142, seed=55,
            model=ModelId.QDT, qdt_anchor=(1.47, 0.05, 100.0),
        )
        ds, _ = simulate_dataset(spec, battery, sessions=1)
        fit_c, fit_q = fit_model_pair(ds, config=light_config(6))
        stat, p = wilks_test(fit_c.log_likelihood, fit_q.log_likelihood, df=2)
        assert fit_q.params.a > 0
        assert p < 0.05


class TestPriors:
    def make_fit(self, alpha, lam=1.1, delta=0.9, gamma=0.6):
        params = CptParams(alpha, lam, delta, gamma, 0.3)
        return IndividualFit("s", params, -50.0, None, 0.7, True)

    def test_closed_form_two_subjects(self):
        fits = [self.make_fit(math.e), self.make_fit(math.e**3)]
        priors = fit_priors(fits)
        mu, sigma = priors.entries["alpha"]
        assert mu == pytest.approx(2.0, abs=1e-12)
        assert sigma == pytest.approx(1.0, abs=1e-12)

    def test_identical_values_floored(self):
        fits = [self.make_fit(0.8) for _ in range(5)]
        priors = fit_priors(fits, sigma_floor=1e-3)
        assert priors.entries["alpha"] == (pytest.approx(math.log(0.8)), 1e-3)

    def test_sampling_recovery(self):
        rng = np.random.default_rng(8)
        fits = [self.make_fit(a) for a in np.exp(rng.normal(0.5, 0.3, size=142))]
        priors = fit_priors(fits)
        mu, sigma = priors.entries["alpha"]
        assert mu == pytest.approx(0.5, abs=0.1)
        assert sigma == pytest.approx(0.3, abs=0.08)

    def test_requires_two_subjects(self):
        with pytest.raises(EstimateError):
            fit_priors([self.make_fit(0.8)])

    def test_prior_spec_validation(self):
        with pytest.raises(EstimateError):
            PriorSpec(entries={"alpha": (0.0, 1.0)})


@pytest.fixture(scope="module")
def tiny():
    battery = default_pair_battery(n_pairs=40)
    spec = spec_at(CPT_REF, 0.10, 8, seed=21)
    ds, truth = simulate_dataset(spec, battery)
    return ds, truth


class TestIndividual:

    def test_tight_priors_pull_to_medians(self, tiny):
        ds, _ = tiny
        priors = PriorSpec(entries={
            "alpha": (math.log(0.9), 1e-3),
            "lam": (math.log(1.3), 1e-3),
            "delta": (math.log(1.1), 1e-3),
            "gamma": (math.log(0.7), 1e-3),
        })
        fits = fit_individual(ds, ModelId.LOGIT_CPT, priors=priors, config=light_config(9))
        for f in fits:
            assert f.params.alpha == pytest.approx(0.9, rel=0.02)
            assert f.params.lam == pytest.approx(1.3, rel=0.02)
            assert f.params.delta == pytest.approx(1.1, rel=0.02)
            assert f.params.gamma == pytest.approx(0.7, rel=0.02)

    def test_weaker_prior_approaches_unpenalized_mle(self, tiny):
        # 1-parameter probe: optimize alpha alone under the penalized
        # objective for growing sigma; distance to the unpenalized optimum
        # shrinks monotonically
        ds, _ = tiny
        table = PairTable(ds.pairs)
        choices = ds.choice_tensor[0, :, 0]
        alphas = np.linspace(0.3, 1.6, 4000)
        grid_step = alphas[1] - alphas[0]

        def loglik(alpha):
            params = CptParams(alpha, CPT_REF.lam, CPT_REF.delta, CPT_REF.gamma, CPT_REF.phi)
            p = np.clip(table.cpt_prob_a(params), 1e-12, 1 - 1e-12)
            answered = choices >= 0
            phi = choices[answered]
            return float(np.sum(np.where(phi == 0, np.log(p[answered]), np.log1p(-p[answered]))))

        lls = np.array([loglik(a) for a in alphas])
        mle = alphas[np.argmax(lls)]
        prior_median = 1.4
        distances = []
        # restrict to the range where the prior is informative: a lognormal
        # keeps a -ln(x) tilt even as sigma grows, so the limit point sits a
        # hair off the unpenalized MLE
        for sigma in (0.05, 0.15, 0.4, 0.8):
            penalized = lls + lognormal_logpdf(alphas, math.log(prior_median), sigma)
            distances.append(abs(alphas[np.argmax(penalized)] - mle))
        assert all(a >= b - 2 * grid_step for a, b in zip(distances, distances[1:]))
        assert distances[-1] < 0.1 * distances[0]

    def test_qdt_anchor_frozen(self, tiny):
        ds, _ = tiny
        cfg = light_config(10)
        agg = fit_aggregate(ds, ModelId.QDT, config=cfg)
        fits = fit_individual(ds, ModelId.QDT, aggregate_anchor=agg, config=cfg)
        for f in fits:
            assert isinstance(f.params, QdtParams)
            assert f.params.a == agg.params.a
            assert f.params.eta == agg.params.eta

    def test_qdt_requires_anchor(self, tiny):
        ds, _ = tiny
        with pytest.raises(EstimateError):
            fit_individual(ds, ModelId.QDT)

    def test_hierarchy_explained_fraction_matches_generator(self, battery):
        spec = spec_at(CPT_REF, 0.12, 30, seed=31)
        ds, truth = simulate_dataset(spec, battery)
        cfg = light_config(11)
        agg = fit_aggregate(ds, ModelId.LOGIT_CPT, config=cfg)
        fits, priors = fit_individual_hml(ds, ModelId.LOGIT_CPT, aggregate_anchor=agg, config=cfg)
        generator = np.mean(np.maximum(truth.prob_b, 1 - truth.prob_b))
        fitted = np.mean([f.explained_fraction for f in fits])
        assert fitted == pytest.approx(generator, abs=0.03)
        for name in ("alpha", "lam", "gamma", "delta"):
            assert priors.entries[name][1] > 0

    def test_threads_do_not_change_results(self, tiny):
        ds, _ = tiny
        cfg1 = light_config(12)
        cfg2 = light_config(12, threads=4)
        a = fit_individual(ds, ModelId.LOGIT_CPT, config=cfg1)
        b = fit_individual(ds, ModelId.LOGIT_CPT, config=cfg2)
        assert [f.params for f in a] == [f.params for f in b]


class TestExplainedFraction:
    def test_deterministic_match(self):
        p_a = np.array([0.9, 0.2, 0.7])
        choices = np.array([0, 1, 0], dtype=np.int8)
        assert explained_fraction(p_a, choices) == 1.0

    def test_tie_half_credit(self):
        p_a = np.array([0.5, 0.5])
        choices = np.array([0, 1], dtype=np.int8)
        assert explained_fraction(p_a, choices) == 0.5

    def test_missing_excluded(self):
        p_a = np.array([0.9, 0.9])
        choices = np.array([0, -1], dtype=np.int8)
        assert explained_fraction(p_a, choices) == 1.0


class TestWilks:
    def test_equal_likelihoods(self):
        stat, p = wilks_test(-100.0, -100.0, df=2)
        assert stat == 0.0 and p == 1.0

    def test_chi2_closed_form(self):
        stat, p = wilks_test(-103.0, -100.0, df=2)
        assert stat == 6.0
        assert p == pytest.approx(math.exp(-3.0), abs=1e-12)
        _, p95 = wilks_test(-102.995, -100.0, df=2)
        assert p95 == pytest.approx(0.0500366, abs=1e-6)

    def test_negative_beyond_slack_raises(self):
        with pytest.raises(EstimateError):
            wilks_test(-100.0, -100.1, df=2)

    def test_small_negative_clamped(self):
        stat, p = wilks_test(-100.0, -100.0000001, df=2)
        assert stat == 0.0 and p == 1.0


class TestPredictAndCompare:
    def test_identical_models_give_zero_deltas(self, small_dataset):
        ds, _ = small_dataset
        cfg = light_config(13)
        fit_c = fit_aggregate(ds, ModelId.LOGIT_CPT, config=cfg)
        fake_qdt = fit_aggregate(ds, ModelId.QDT, config=cfg, warm_from=fit_c)
        comparison = compare_models(ds, fit_c, fake_qdt, session=1)
        assert comparison.wilks_statistic >= 0
        assert set(comparison.rss_all) == {"logit-cpt", "qdt"}
        for kind_map in comparison.rss_by_kind.values():
            assert set(kind_map) == {"logit-cpt", "qdt"}

    def test_compare_requires_matching_session(self, small_dataset):
        ds, _ = small_dataset
        cfg = light_config(14)
        fit_c = fit_aggregate(ds, ModelId.LOGIT_CPT, config=cfg)
        fit_q = fit_aggregate(ds, ModelId.QDT, config=cfg, warm_from=fit_c)
        with pytest.raises(EstimateError):
            compare_models(ds, fit_c, fit_q, session=2)

    def test_predict_session2_aggregate(self, small_dataset):
        ds, _ = small_dataset
        fit = fit_aggregate(ds, ModelId.LOGIT_CPT, config=light_config(15))
        report = predict_session2(ds, fit)
        assert report.log_likelihood < 0
        assert report.rss_all >= 0
        assert -1 <= report.correlation <= 1

    def test_predict_session2_requires_data(self, battery):
        spec = spec_at(CPT_REF, 0.08, 6, seed=16)
        ds, _ = simulate_dataset(spec, battery, sessions=1)
        fit = fit_aggregate(ds, ModelId.LOGIT_CPT, config=light_config(16))
        with pytest.raises(EstimateError):
            predict_session2(ds, fit)

    def test_deterministic_subject_predicted_perfectly(self, battery):
        # a subject who always picks the model's modal choice scores 1.0
        spec = spec_at(CPT_REF, 0.08, 1, seed=17)
        ds, truth = simulate_dataset(spec, battery)
        table = PairTable(battery)
        p_a = table.cpt_prob_a(CPT_REF)
        assert not np.any(p_a == 0.5)
        truth.prob_b[0] = np.where(p_a < 0.5, 1.0, 0.0)
        from riskchoice.simulate import simulate_choices

        ds = simulate_choices(truth, battery)
        fits = [IndividualFit(truth.subject_ids[0], CPT_REF, -1.0, None, 1.0, True)]
        report = predict_session2(ds, fits)
        assert report.mean_predicted_fraction == 1.0

    def test_stable_generator_session2_close_to_session1(self, battery):
        spec = spec_at(CPT_REF, 0.08, 30, seed=18)
        ds, _ = simulate_dataset(spec, battery)
        cfg = light_config(19)
        agg = fit_aggregate(ds, ModelId.LOGIT_CPT, config=cfg)
        fits = fit_individual(ds, ModelId.LOGIT_CPT, config=cfg, aggregate_anchor=agg)
        ll1 = np.mean([f.log_likelihood for f in fits])
        report = predict_session2(ds, fits)
        # out-of-sample is worse but in the same range (no overfitting blowup)
        assert report.mean_log_likelihood <= ll1 + 1e-9
        assert report.mean_log_likelihood > ll1 - 8.0
