"""Calibration and analysis toolkit for probabilistic binary lottery choice.

Implements the logit-CPT stochastic choice model and its QDT extension
(utility plus attraction factors), aggregate and hierarchical maximum
likelihood estimation, two-group choice-reversal models with GMM clustering,
and Poisson binomial predictability limits.
"""

__version__ = "0.1.0"

from .cpt import CptParams, cpt_utility, logit_choice_prob, value, weight
from .data import (
    ChoiceDataset,
    ChoiceObservation,
    DataError,
    Kind,
    Lottery,
    LotteryPair,
    classify_kind,
    load_dataset,
    save_dataset,
)
from .estimate import (
    AggregateFit,
    FitConfig,
    IndividualFit,
    ModelComparison,
    ModelId,
    PriorSpec,
    compare_models,
    fit_aggregate,
    fit_individual,
    fit_individual_hml,
    fit_model_pair,
    fit_priors,
    predict_session2,
    wilks_test,
)
from .optimize import (
    Objective,
    OptimResult,
    SimplexConfig,
    TabuConfig,
    global_minimize,
    iterated_tabu_search,
    nelder_mead,
)
from .predictability import (
    KsResult,
    PredictedFractionDist,
    SuccessProfile,
    binomial_approx,
    ks_test,
    poisson_binomial_dft,
    poisson_binomial_dp,
    population_mixture,
    success_profile,
    tail_probability,
)
from .qdt import (
    ProspectProbabilities,
    QdtParams,
    attraction,
    cara_utility,
    lottery_cara,
    prospect_prob,
    quarter_law_statistic,
)
from .shift import (
    GmmFit,
    HeteroShiftParams,
    ShiftBand,
    calibrate_hetero,
    classify_subjects,
    fit_gmm2,
    group_probs,
    homogeneity_wilks,
    monte_carlo_band,
    shift_prob_hetero,
    shift_prob_homogeneous,
)
from .simulate import (
    GroupSpec,
    LognormalSpec,
    PopulationSpec,
    default_pair_battery,
    sample_population,
    simulate_choices,
    simulate_dataset,
)
