"""Explainable online selection among tree-based forecasters.

A pool of regression trees, random forests and boosted ensembles is trained
on lag windows. Each model gets a region of competence: subsequences of the
validation data where it was the best forecaster and whose lags reduced its
loss according to interventional Shapley values. At test time the model
whose region holds the DTW-closest subsequence forecasts, and regions are
extended when a Hoeffding-bound detector signals a drift in the mean.
"""

from .drift import DriftState, hoeffding_bound, init_detector, observe
from .dtw import dtw_distance
from .errors import *  # noqa: F401,F403
from .harness import EvaluationReport, RunConfig, load_dataset_csv, rank_and_compare, run_experiment
from .report import emit_explanation_report, read_explanation_report
from .roc import (
    RegionOfCompetence,
    RoCConfig,
    RoCMember,
    best_forecaster_per_chunk,
    build_rocs,
    enrich_rocs,
    extract_salient_subsequences,
)
from .selector import SelectionRecord, SelectionVariant, run_online, select_model
from .series import (
    Chunk,
    LagWindow,
    Normalizer,
    SeriesSplit,
    TimeSeries,
    apply_normalizer,
    fit_normalizer,
    make_chunks,
    make_training_windows,
    split_series,
)
from .shapley import (
    BackgroundSet,
    Explanation,
    eval_value_function,
    make_background,
    shapley_oracle,
    shapley_values,
    shapley_values_by_tree,
)
from .trees import (
    ModelPool,
    RegressionTree,
    StabilityIntervals,
    TreeEnsemble,
    build_model_pool,
    fit_decision_tree,
    fit_gradient_boosting,
    fit_random_forest,
    predict,
    stability_intervals,
)

__version__ = "0.1.0"
