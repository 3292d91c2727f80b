"""Semiparametric transformation models for competing-risks data with a cure fraction.

Fits cause-specific linear transformation models to right-censored
competing-risks data by counting-process estimating equations, yielding
regression coefficients, nondecreasing baselines, cumulative incidence and
overall survival curves, cure-fraction estimates, and standard errors, plus
a Monte Carlo harness for bias/MSE studies.
"""

from .baseline import (
    BaselineCurve,
    evaluate_h,
    solve_baseline,
    solve_first_step,
    solve_increment,
)
from .dataio import (
    AIDSSI_MAPPING,
    ColumnMapping,
    fit_result_document,
    load_csv,
    parse_csv_records,
    two_sided_normal_p,
    write_csv,
)
from .errors import *  # noqa: F401,F403 - exception namespace
from .fitting import CauseFit, FitConfig, fit_all, fit_cause, score_beta, score_jacobian
from .inference import (
    VarianceEstimate,
    baseline_growth_factor,
    bootstrap_covariance,
    mu_hat,
    sandwich_covariance,
)
from .links import LinkSpec, consistency_deviation, custom_link, link_bundle
from .model import (
    Dataset,
    RiskIndex,
    SubjectRecord,
    at_risk,
    risk_index,
    validate_dataset,
)
from .predict import (
    ClampWarning,
    cif,
    cif_curve,
    cure_fraction,
    overall_survival,
    population_cure_fraction,
)
from .simulate import (
    MCSummary,
    ScenarioConfig,
    calibrate_censoring,
    generate_dataset,
    latent_time,
    parse_scenario_file,
    run_monte_carlo,
    write_mc_csv,
)

__version__ = "0.1.0"
