"""Batch command-line interface.

Subcommands: ingest, simulate, fit, predict, shift, cluster, predictability,
report. Every run resolves its configuration from defaults, then an optional
JSON config file, then explicit flags (flags win), and stamps every output
file with the seed and a hash of the resolved configuration so identical runs
produce byte-identical files.

Exit codes: 0 success, 1 completed with analysis warnings (e.g. an optimizer
stopped on its evaluation budget), 2 input or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .data import DataError, TIME1, TIME2, ChoiceDataset, load_dataset, save_dataset
from .estimate import (
    EstimateError,
    FitConfig,
    ModelId,
    PairTable,
    compare_models,
    fit_aggregate,
    fit_individual_hml,
    fit_model_pair,
    predict_session2,
)
from .optimize import OptimizeError, SimplexConfig, TabuConfig
from .predictability import (
    binomial_approx,
    ks_test,
    poisson_binomial_dft,
    population_mixture,
    success_profile,
    tail_probability,
)
from .shift import (
    ShiftError,
    calibrate_hetero,
    classify_subjects,
    equal_group_offsets,
    fit_gmm2,
    homogeneity_wilks,
    monte_carlo_band,
    shift_prob_hetero,
    shift_prob_homogeneous,
)
from .simulate import (
    GroupSpec,
    LognormalSpec,
    PopulationSpec,
    SimulateError,
    default_pair_battery,
    simulate_dataset,
)

SCHEMA_VERSION = 1
OUT_DIR_ENV = "RISKCHOICE_OUT"


class CliError(Exception):
    """Input-level failure; maps to exit code 2."""


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


class Runner:
    """Holds resolved config and collects analysis warnings."""

    def __init__(self, args: argparse.Namespace, command: str):
        file_config = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    file_config = json.load(fh)
            except (OSError, json.JSONDecodeError) as err:
                raise CliError(f"cannot read config file {args.config}: {err}") from None
            if not isinstance(file_config, dict):
                raise CliError("config file must hold a JSON object")
        self.config: dict = {}
        out_dir = None
        for key, value in sorted(vars(args).items()):
            if key in ("config", "func"):
                continue
            if value is None and key in file_config:
                value = file_config[key]
            if key == "out_dir":
                out_dir = value  # environmental, kept out of the config hash
                continue
            self.config[key] = value
        self.config["command"] = command
        self.command = command
        self.warnings: list[str] = []
        self.out_dir = out_dir or os.environ.get(OUT_DIR_ENV) or "."
        os.makedirs(self.out_dir, exist_ok=True)
        self.seed = int(self.config.get("seed") or 0)
        self.config["seed"] = self.seed
        self.hash = _config_hash(self.config)

    def get(self, key, default=None):
        value = self.config.get(key)
        return default if value is None else value

    def warn(self, message: str):
        self.warnings.append(message)
        print(f"warning: {message}", file=sys.stderr)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_json(self, name: str, payload: dict) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "config_hash": self.hash,
            **payload,
        }
        target = self.path(name)
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonify)
            fh.write("\n")
        return target

    def write_csv(self, name: str, header: list[str], rows) -> str:
        target = self.path(name)
        with open(target, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# seed={self.seed} config_hash={self.hash}\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_csvify(v) for v in row])
        return target

    def fit_config(self) -> FitConfig:
        cfg = FitConfig(seed=self.seed, threads=int(self.get("threads", 1)))
        restarts = self.get("restarts")
        if restarts is not None:
            cfg.tabu = TabuConfig(restarts=int(restarts), grid_resolution=5, seed=self.seed)
        max_evals = self.get("max_evaluations")
        if max_evals is not None:
            cfg.simplex = SimplexConfig(max_evaluations=int(max_evals))
        return cfg


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _csvify(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def _load(runner: Runner) -> ChoiceDataset:
    pairs = runner.get("pairs")
    choices = runner.get("choices")
    if not pairs or not choices:
        raise CliError("--pairs and --choices are required")
    for path in (pairs, choices):
        if not os.path.exists(path):
            raise CliError(f"input file not found: {path}")
    bound = runner.get("outcome_bound", 100.0)
    return load_dataset(pairs, choices, outcome_bound=None if bound in ("none", 0) else float(bound))


# -- subject clustering shared by fit/shift/report ---------------------------

def _cluster(dataset: ChoiceDataset, seed: int):
    subjects, fractions = dataset.subject_majority_stats()
    usable = ~np.isnan(fractions).any(axis=1)
    points = fractions[usable]
    ids = [s for s, u in zip(subjects, usable) if u]
    gmm = fit_gmm2(points, seed=seed)
    classification = classify_subjects(gmm, ids)
    return ids, points, gmm, classification


def _filter_subjects(runner: Runner, dataset: ChoiceDataset, name: str):
    if name == "all":
        return None
    _, _, _, classification = _cluster(dataset, runner.seed)
    chosen = [s for s, label in classification.labels.items() if label == name]
    if not chosen:
        raise CliError(f"no subjects classified as {name}")
    return chosen


# -- commands -----------------------------------------------------------------

def cmd_ingest(runner: Runner) -> int:
    dataset = _load(runner)
    kinds = {}
    for kind in dataset.kinds():
        kinds[kind.value] = kinds.get(kind.value, 0) + 1
    save_dataset(
        dataset, runner.path("pairs_normalized.csv"), runner.path("choices_normalized.csv"),
        stamp=f"seed={runner.seed} config_hash={runner.hash}",
    )
    runner.write_json("ingest_report.json", {
        "n_pairs": dataset.n_pairs,
        "n_subjects": dataset.n_subjects,
        "n_observations": len(dataset.observations),
        "completeness": dataset.completeness(),
        "kinds": kinds,
        "sessions": [s for s in (TIME1, TIME2) if dataset.has_session(s)],
    })
    return 0


def cmd_simulate(runner: Runner) -> int:
    n_subjects = int(runner.get("subjects", 142))
    n_pairs = int(runner.get("n_pairs", 91))
    model = ModelId(runner.get("model", "logit-cpt"))
    spec_kwargs = {"n_subjects": n_subjects, "model": model, "seed": runner.seed}
    if model == ModelId.QDT:
        spec_kwargs["qdt_anchor"] = (
            float(runner.get("qdt_a", 1.47)),
            float(runner.get("qdt_eta", 0.05)),
            float(runner.get("wealth0", 100.0)),
        )
    group_f = runner.get("group_f")
    if group_f is not None:
        spec_kwargs["group_spec"] = GroupSpec(
            majority_fraction=float(group_f),
            shift_alpha=float(runner.get("group_alpha", 0.6)),
            baseline=runner.get("group_baseline", "model"),
        )
    sigma = runner.get("prior_sigma")
    if sigma is not None:
        sigma = float(sigma)
        spec = PopulationSpec(**spec_kwargs)
        spec_kwargs["priors"] = {
            k: LognormalSpec(v.mu, sigma) for k, v in spec.priors.items()
        }
        spec_kwargs["phi_spec"] = LognormalSpec(spec.phi_spec.mu, sigma)
    spec = PopulationSpec(**spec_kwargs)

    pairs = default_pair_battery(n_pairs=n_pairs, seed=runner.seed)
    dataset, truth = simulate_dataset(spec, pairs, sessions=int(runner.get("sessions", 2)))
    save_dataset(
        dataset, runner.path("pairs.csv"), runner.path("choices.csv"),
        stamp=f"seed={runner.seed} config_hash={runner.hash}",
    )
    runner.write_json("truth.json", {
        "model": model.value,
        "n_subjects": n_subjects,
        "n_pairs": n_pairs,
        "subject_params": [
            {"subject_id": sid, **params.as_dict()}
            for sid, params in zip(truth.subject_ids, truth.subject_params)
        ],
        "prob_b": truth.prob_b,
        "group_labels": truth.group_labels,
        "baseline_majority": truth.baseline_majority,
    })
    return 0


def _aggregate_payload(fit) -> dict:
    return {
        "model": fit.model.value,
        "params": fit.params.as_dict(),
        "log_likelihood": fit.log_likelihood,
        "session": fit.session,
        "subject_filter": fit.subject_filter,
        "converged": fit.converged,
        "boundary": fit.boundary,
        "n_observations": fit.n_observations,
    }


def _individual_payload(fits, priors) -> dict:
    return {
        "priors": priors.as_dict(),
        "subjects": [
            {
                "subject_id": f.subject_id,
                "params": f.params.as_dict(),
                "log_likelihood": f.log_likelihood,
                "penalized_objective": f.penalized_objective,
                "explained_fraction": f.explained_fraction,
                "converged": f.converged,
            }
            for f in fits
        ],
    }


def _run_fits(runner: Runner, dataset: ChoiceDataset, models, level: str, session: int, subject_ids, filter_name: str):
    config = runner.fit_config()
    out = {}
    if len(models) == 2:
        fit_cpt, fit_qdt = fit_model_pair(
            dataset, session=session, subject_ids=subject_ids,
            subject_filter=filter_name, config=config,
        )
        aggregates = {ModelId.LOGIT_CPT: fit_cpt, ModelId.QDT: fit_qdt}
    else:
        aggregates = {
            models[0]: fit_aggregate(
                dataset, models[0], session=session, subject_ids=subject_ids,
                subject_filter=filter_name, config=config,
            )
        }
    for model in models:
        block = {}
        aggregate = aggregates[model]
        if not aggregate.converged:
            runner.warn(f"aggregate {model.value} fit stopped on evaluation budget")
        if aggregate.boundary:
            runner.warn(f"aggregate {model.value} parameters at bounds: {aggregate.boundary}")
        block["aggregate"] = aggregate
        if level in ("individual", "both"):
            fits, priors = fit_individual_hml(
                dataset, model, session=session, aggregate_anchor=aggregate,
                subject_ids=subject_ids, config=config,
            )
            n_failed = sum(1 for f in fits if not f.converged)
            if n_failed:
                runner.warn(f"{n_failed} individual {model.value} fits stopped early")
            block["individual"] = fits
            block["priors"] = priors
        out[model] = block
    return out


def _models_from_flag(flag: str):
    if flag == "both":
        return [ModelId.LOGIT_CPT, ModelId.QDT]
    return [ModelId.LOGIT_CPT if flag in ("cpt", "logit-cpt") else ModelId.QDT]


def cmd_fit(runner: Runner) -> int:
    dataset = _load(runner)
    session = int(runner.get("session", 1))
    level = runner.get("level", "aggregate")
    filter_name = runner.get("filter", "all")
    subject_ids = _filter_subjects(runner, dataset, filter_name)
    models = _models_from_flag(runner.get("model", "both"))
    blocks = _run_fits(runner, dataset, models, level, session, subject_ids, filter_name)

    payload = {"session": session, "subject_filter": filter_name, "models": {}}
    for model, block in blocks.items():
        entry = _aggregate_payload(block["aggregate"])
        if "individual" in block:
            entry.update(_individual_payload(block["individual"], block["priors"]))
        payload["models"][model.value] = entry

    if len(models) == 2:
        comparison = compare_models(
            dataset,
            blocks[ModelId.LOGIT_CPT]["aggregate"],
            blocks[ModelId.QDT]["aggregate"],
            session=session,
            individual_cpt=blocks[ModelId.LOGIT_CPT].get("individual"),
            individual_qdt=blocks[ModelId.QDT].get("individual"),
        )
        payload["comparison"] = {
            "wilks_statistic": comparison.wilks_statistic,
            "degrees_of_freedom": comparison.degrees_of_freedom,
            "p_value": comparison.p_value,
            "rss_by_kind": comparison.rss_by_kind,
            "rss_all": comparison.rss_all,
            "correlation": comparison.correlation,
            "mean_log_lik": comparison.mean_log_lik,
            "mean_explained_fraction": comparison.mean_explained_fraction,
        }

        table = PairTable(dataset.pairs)
        n_b, n = dataset.counts(session)
        pred_cpt = 1.0 - table.prob_a(blocks[ModelId.LOGIT_CPT]["aggregate"].params)
        pred_qdt = 1.0 - table.prob_a(blocks[ModelId.QDT]["aggregate"].params)
        runner.write_csv(
            "fit_pairs.csv",
            ["pair_id", "kind", "observed_freq_b", "predicted_cpt_b", "predicted_qdt_b"],
            [
                (p.pair_id, p.kind.value, (n_b[j] / n[j]) if n[j] else math.nan,
                 pred_cpt[j], pred_qdt[j])
                for j, p in enumerate(dataset.pairs)
            ],
        )
        if all("individual" in blocks[m] for m in models):
            rows = []
            by_subject = {f.subject_id: f for f in blocks[ModelId.QDT]["individual"]}
            for f in blocks[ModelId.LOGIT_CPT]["individual"]:
                g = by_subject.get(f.subject_id)
                if g:
                    rows.append((f.subject_id, f.log_likelihood, g.log_likelihood,
                                 f.explained_fraction, g.explained_fraction))
            runner.write_csv(
                "fit_subjects.csv",
                ["subject_id", "ll_cpt", "ll_qdt", "explained_cpt", "explained_qdt"],
                rows,
            )

    runner.write_json("fit_report.json", payload)
    return 1 if runner.warnings else 0


def cmd_predict(runner: Runner) -> int:
    dataset = _load(runner)
    if not dataset.has_session(TIME2):
        raise CliError("prediction requires session-2 observations")
    level = runner.get("level", "aggregate")
    filter_name = runner.get("filter", "all")
    subject_ids = _filter_subjects(runner, dataset, filter_name)
    models = _models_from_flag(runner.get("model", "both"))
    blocks = _run_fits(runner, dataset, models, level, TIME1, subject_ids, filter_name)

    payload = {"fit_session": TIME1, "prediction_session": TIME2, "models": {}}
    for model, block in blocks.items():
        entry = {}
        agg_report = predict_session2(dataset, block["aggregate"])
        entry["aggregate"] = {
            "log_likelihood": agg_report.log_likelihood,
            "rss_by_kind": agg_report.rss_by_kind,
            "rss_all": agg_report.rss_all,
            "correlation": agg_report.correlation,
        }
        if "individual" in block:
            ind_report = predict_session2(dataset, block["individual"])
            entry["individual"] = {
                "mean_log_likelihood": ind_report.mean_log_likelihood,
                "mean_predicted_fraction": ind_report.mean_predicted_fraction,
                "subjects": [
                    {"subject_id": s.subject_id, "log_likelihood": s.log_likelihood,
                     "predicted_fraction": s.predicted_fraction}
                    for s in ind_report.per_subject
                ],
            }
        payload["models"][model.value] = entry
    runner.write_json("prediction_report.json", payload)
    return 1 if runner.warnings else 0


def cmd_cluster(runner: Runner) -> int:
    dataset = _load(runner)
    if not (dataset.has_session(TIME1) and dataset.has_session(TIME2)):
        raise CliError("clustering requires both sessions")
    ids, points, gmm, classification = _cluster(dataset, runner.seed)
    statistic, df, p_value = homogeneity_wilks(points)
    if gmm.degenerate:
        runner.warn("GMM covariance floor engaged")
    runner.write_csv(
        "clusters.csv",
        ["subject_id", "fraction_time1", "fraction_time2", "posterior_contrarian", "label"],
        [
            (sid, points[i, 0], points[i, 1], gmm.posteriors[i], classification.labels[sid])
            for i, sid in enumerate(ids)
        ],
    )
    runner.write_json("cluster_report.json", {
        "majority_fraction": classification.majority_fraction,
        "component_weights": gmm.component_weights,
        "means": gmm.means,
        "covariances": gmm.covariances,
        "log_likelihood": gmm.log_likelihood,
        "homogeneity": {"statistic": statistic, "df": df, "p_value": p_value},
        "ties": classification.ties,
        "degenerate": gmm.degenerate,
    })
    return 1 if runner.warnings else 0


def _shift_analysis(runner: Runner, dataset: ChoiceDataset) -> dict:
    majority_p, _ = dataset.majority_frequencies(TIME1)
    observed_shift = np.array([dataset.shift_frequency(pid) for pid in dataset.pair_ids])

    ids, points, gmm, classification = _cluster(dataset, runner.seed)
    statistic, df, p_value = homogeneity_wilks(points)
    f_estimate = classification.majority_fraction

    observed = list(zip(majority_p.tolist(), observed_shift.tolist()))
    calib = calibrate_hetero(observed, majority_fraction=f_estimate, seed=runner.seed)
    if not calib.converged:
        runner.warn("shift calibration stopped on evaluation budget")

    band = monte_carlo_band(
        majority_p, calib.params, n_subjects=dataset.n_subjects,
        n_sims=int(runner.get("band_sims", 3000)), seed=runner.seed,
    )
    homo = shift_prob_homogeneous(majority_p)
    hetero = shift_prob_hetero(majority_p, calib.params)

    runner.write_csv(
        "shift_curve.csv",
        ["pair_id", "majority_p", "observed_shift", "homogeneous", "heterogeneous",
         "band_low", "band_high"],
        [
            (pid, majority_p[j], observed_shift[j], homo[j], hetero[j], band.low[j], band.high[j])
            for j, pid in enumerate(dataset.pair_ids)
        ],
    )
    runner.write_csv(
        "clusters.csv",
        ["subject_id", "fraction_time1", "fraction_time2", "posterior_contrarian", "label"],
        [
            (sid, points[i, 0], points[i, 1], gmm.posteriors[i], classification.labels[sid])
            for i, sid in enumerate(ids)
        ],
    )
    beta_grid, f_grid = np.meshgrid(calib.surface_beta, calib.surface_fraction, indexing="ij")
    runner.write_csv(
        "rss_grid.csv",
        ["shift_beta", "majority_fraction", "rss"],
        zip(beta_grid.ravel(), f_grid.ravel(), calib.surface_rss.ravel()),
    )
    offsets = equal_group_offsets(0.5)
    return {
        "majority_fraction": f_estimate,
        "shift_alpha": calib.params.shift_alpha,
        "shift_beta": calib.params.shift_beta,
        "rss": calib.rss,
        "homogeneity": {"statistic": statistic, "df": df, "p_value": p_value},
        "equal_group_offsets_at_half": {"p1": offsets[0], "p2": offsets[1]},
        "mean_observed_shift": float(np.mean(observed_shift)),
    }


def cmd_shift(runner: Runner) -> int:
    dataset = _load(runner)
    if not (dataset.has_session(TIME1) and dataset.has_session(TIME2)):
        raise CliError("shift analysis requires observations in both sessions")
    payload = _shift_analysis(runner, dataset)
    runner.write_json("shift_report.json", payload)
    return 1 if runner.warnings else 0


def _predictability_analysis(runner: Runner, dataset: ChoiceDataset, fits) -> dict:
    table = PairTable(dataset.pairs)
    threshold = float(runner.get("threshold", 0.85))
    use_exact = bool(runner.get("exact_mixture", False))

    profiles = []
    dists = []
    tail_rows = []
    pmf_rows = []
    for fit in fits:
        p_a = table.prob_a(fit.params)
        profile = success_profile(fit.subject_id, p_a)
        dist = poisson_binomial_dft(profile)
        profiles.append(profile)
        dists.append(dist)
        tail_rows.append((fit.subject_id, tail_probability(dist, threshold), dist.mean()))
        for k, mass in enumerate(dist.pmf):
            pmf_rows.append((fit.subject_id, k, k / dist.n, mass))

    mixture = population_mixture(
        dists if use_exact else [binomial_approx(p) for p in profiles]
    )
    report = predict_session2(dataset, fits)
    observed = np.array([s.predicted_fraction for s in report.per_subject])
    ks = ks_test(mixture, observed)

    runner.write_csv("subject_pmfs.csv", ["subject_id", "k", "fraction", "pmf"], pmf_rows)
    runner.write_csv(
        "tail_probs.csv",
        ["subject_id", f"tail_prob_gt_{threshold}", "mean_fraction"],
        tail_rows,
    )
    emp_cdf = np.array([np.mean(observed <= x) for x in mixture.support])
    runner.write_csv(
        "population_cdf.csv",
        ["fraction", "theoretical_pmf", "theoretical_cdf", "observed_cdf"],
        zip(mixture.support, mixture.pmf, mixture.cdf(), emp_cdf),
    )
    tails = np.array([t[1] for t in tail_rows])
    return {
        "threshold": threshold,
        "mixture": "exact" if use_exact else "binomial_approx",
        "ks": {"statistic": ks.statistic, "p_value": ks.p_value, "n": ks.n_effective},
        "mean_theoretical_fraction": mixture.mean(),
        "std_theoretical_fraction": math.sqrt(mixture.variance()),
        "mean_observed_fraction": float(np.mean(observed)),
        "share_subjects_tail_below_5pct": float(np.mean(tails < 0.05)),
    }


def cmd_predictability(runner: Runner) -> int:
    dataset = _load(runner)
    if not dataset.has_session(TIME2):
        raise CliError("predictability analysis requires session-2 observations")
    model = _models_from_flag(runner.get("model", "qdt"))[0]
    blocks = _run_fits(runner, dataset, [model], "individual", TIME1, None, "all")
    fits = blocks[model]["individual"]
    payload = _predictability_analysis(runner, dataset, fits)
    payload["model"] = model.value
    runner.write_json("predictability_report.json", payload)
    return 1 if runner.warnings else 0


def cmd_report(runner: Runner) -> int:
    """Full pipeline: fits, comparison, shift analysis, predictability."""
    dataset = _load(runner)
    if not (dataset.has_session(TIME1) and dataset.has_session(TIME2)):
        raise CliError("the full report requires observations in both sessions")

    blocks = _run_fits(
        runner, dataset, [ModelId.LOGIT_CPT, ModelId.QDT], "both", TIME1, None, "all"
    )
    comparison = compare_models(
        dataset,
        blocks[ModelId.LOGIT_CPT]["aggregate"],
        blocks[ModelId.QDT]["aggregate"],
        session=TIME1,
        individual_cpt=blocks[ModelId.LOGIT_CPT]["individual"],
        individual_qdt=blocks[ModelId.QDT]["individual"],
    )
    prediction = {}
    for model in (ModelId.LOGIT_CPT, ModelId.QDT):
        agg = predict_session2(dataset, blocks[model]["aggregate"])
        ind = predict_session2(dataset, blocks[model]["individual"])
        prediction[model.value] = {
            "rss_all": agg.rss_all,
            "rss_by_kind": agg.rss_by_kind,
            "correlation": agg.correlation,
            "mean_log_likelihood": ind.mean_log_likelihood,
            "mean_predicted_fraction": ind.mean_predicted_fraction,
        }

    shift_block = _shift_analysis(runner, dataset)
    payload_pred = _predictability_analysis(runner, dataset, blocks[ModelId.QDT]["individual"])

    payload = {
        "parameters": {
            m.value: _aggregate_payload(blocks[m]["aggregate"]) for m in blocks
        },
        "individual": {
            m.value: {
                "mean_log_likelihood": float(
                    np.mean([f.log_likelihood for f in blocks[m]["individual"]])
                ),
                "mean_explained_fraction": float(
                    np.mean([f.explained_fraction for f in blocks[m]["individual"]])
                ),
                "priors": blocks[m]["priors"].as_dict(),
            }
            for m in blocks
        },
        "comparison": {
            "wilks_statistic": comparison.wilks_statistic,
            "degrees_of_freedom": comparison.degrees_of_freedom,
            "p_value": comparison.p_value,
            "rss_by_kind": comparison.rss_by_kind,
            "rss_all": comparison.rss_all,
            "correlation": comparison.correlation,
            "mean_log_lik": comparison.mean_log_lik,
            "mean_explained_fraction": comparison.mean_explained_fraction,
        },
        "prediction": prediction,
        "shift": shift_block,
        "predictability": payload_pred,
    }
    runner.write_json("report.json", payload)
    return 1 if runner.warnings else 0


# -- argument parsing ----------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--out-dir", dest="out_dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p.add_argument("--seed", type=int, help="RNG seed recorded in every output")
    p.add_argument("--threads", type=int, help="parallel workers for per-subject fits")


def _add_data(p: argparse.ArgumentParser):
    p.add_argument("--pairs", help="pairs CSV path")
    p.add_argument("--choices", help="choices CSV path")
    p.add_argument("--outcome-bound", dest="outcome_bound", help="outcome magnitude bound or 'none'")


def _add_fit_flags(p: argparse.ArgumentParser):
    p.add_argument("--model", choices=["cpt", "logit-cpt", "qdt", "both"], help="model selection")
    p.add_argument("--level", choices=["aggregate", "individual", "both"], help="estimation level")
    p.add_argument("--session", type=int, choices=[1, 2], help="session fitted")
    p.add_argument("--filter", choices=["all", "majoritarian", "contrarian"], help="subject group")
    p.add_argument("--restarts", type=int, help="tabu restarts per optimization")
    p.add_argument("--max-evaluations", dest="max_evaluations", type=int, help="simplex budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskchoice",
        description="Calibration and analysis of probabilistic binary lottery choice",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a dataset")
    _add_common(p); _add_data(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--subjects", type=int, help="number of subjects (default 142)")
    p.add_argument("--n-pairs", dest="n_pairs", type=int, help="battery size (default 91)")
    p.add_argument("--sessions", type=int, choices=[1, 2], help="sessions to simulate")
    p.add_argument("--model", choices=["logit-cpt", "qdt"], help="generating model")
    p.add_argument("--qdt-a", dest="qdt_a", type=float, help="attraction sensitivity")
    p.add_argument("--qdt-eta", dest="qdt_eta", type=float, help="CARA coefficient")
    p.add_argument("--wealth0", type=float, help="CARA endowment")
    p.add_argument("--prior-sigma", dest="prior_sigma", type=float, help="population spread")
    p.add_argument("--group-f", dest="group_f", type=float, help="majoritarian fraction")
    p.add_argument("--group-alpha", dest="group_alpha", type=float, help="majoritarian tilt")
    p.add_argument("--group-baseline", dest="group_baseline", choices=["model", "uniform"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="calibrate models on one session")
    _add_common(p); _add_data(p); _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="fit on session 1, score on session 2")
    _add_common(p); _add_data(p); _add_fit_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("shift", help="choice-reversal analysis and calibration")
    _add_common(p); _add_data(p)
    p.add_argument("--band-sims", dest="band_sims", type=int, help="Monte Carlo band simulations")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("cluster", help="majoritarian/contrarian clustering only")
    _add_common(p); _add_data(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("predictability", help="theoretical prediction limits")
    _add_common(p); _add_data(p)
    p.add_argument("--model", choices=["cpt", "logit-cpt", "qdt"], help="model for profiles")
    p.add_argument("--threshold", type=float, help="tail threshold (default 0.85)")
    p.add_argument("--exact-mixture", dest="exact_mixture", action="store_const", const=True,
                   help="mix exact distributions instead of binomial approximations")
    p.add_argument("--restarts", type=int, help="tabu restarts per optimization")
    p.add_argument("--max-evaluations", dest="max_evaluations", type=int)
    p.set_defaults(func=cmd_predictability)

    p = sub.add_parser("report", help="full pipeline report on a two-session dataset")
    _add_common(p); _add_data(p); _add_fit_flags(p)
    p.add_argument("--threshold", type=float, help="predictability tail threshold")
    p.add_argument("--exact-mixture", dest="exact_mixture", action="store_const", const=True)
    p.add_argument("--band-sims", dest="band_sims", type=int)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        runner = Runner(args, args.command)
        return args.func(runner)
    except (CliError, DataError, SimulateError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (EstimateError, OptimizeError, ShiftError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
