"""Priority-sampling master samples, playout and Horvitz-Thompson estimation."""

from .errors import *  # noqa: F401,F403
from .estimate import (
    DistributionEstimate,
    MassDistributionEstimate,
    mass_distribution,
    ordinary_cdf,
    restrict,
    subset_count,
    subset_sum,
)
from .evaluation import EvalSpec, KsTable, ks_statistic, qq_curve, run_eval
from .model import (
    FALSE,
    TRUE,
    Feature,
    Kind,
    Population,
    Predicate,
    Ratio,
    Record,
    Uniform,
    WeightSpec,
    eval_predicate,
    link,
    node,
    parse_predicate,
    parse_weight,
    weight_of,
)
from .playout import Mode, SampleResult, extend_sample, sample_by_predicate, sample_cost_limited
from .sampler import (
    MasterSample,
    PriorityEntry,
    assign_priorities,
    build_master,
    create_master,
    ht_weight_estimate,
    inclusion_prob,
    threshold,
)
from .synth import SynthConfig, generate, generate_links, generate_nodes, true_cdf, true_mass

__version__ = "0.1.0"
