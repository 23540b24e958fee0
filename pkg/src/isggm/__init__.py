"""Inter-subject time-varying Gaussian graphical models and topology tests."""

__version__ = "0.1.0"

from .clime import ClimeConfig, PrecisionEstimate, clime_column, clime_full, cross_validate_lambda
from .data_model import (
    MultiSubjectDataset,
    NuisanceCovariance,
    PairedDataset,
    PrecisionPath,
    eval_precision,
    generate_nuisance,
    generate_precision_path,
    load_dataset,
    min_eigenvalue,
    sample_dataset,
    simulate,
    standardize,
)
from .debias_boot import DebiasedField, EdgeSelector, bootstrap_draws, debias, quantile, test_statistic
from .graph_props import (
    EdgeSet,
    GraphProperty,
    connected_components,
    critical_set,
    critical_set_oracle,
    eval_property,
    max_degree,
)
from .kernel_cov import (
    KernelSpec,
    SmoothedCovariance,
    choose_bandwidth,
    epanechnikov,
    kernel_weights,
    smoothed_cov_inter,
    smoothed_cov_ustat,
    smoothed_cov_within,
)
from .stepdown import TestConfig, TestOutcome, calibration_study, roc_study, stepdown_test, test_max_degree
