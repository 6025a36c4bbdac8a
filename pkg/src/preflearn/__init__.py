"""Adaptive choice-based preference elicitation.

Learns a user's linear preference vector from noisy m-way choices, picking
each question by greedy posterior-entropy reduction (entropy pursuit) or
greedy misclassification-error reduction (knowledge gradient).
"""

from ._core import BACKEND as KERNEL_BACKEND
from .belief import (
    Alternative,
    BeliefState,
    PosteriorSampleSet,
    Question,
    ResponseRecord,
    differential_entropy_estimate,
    gaussian_entropy_bits,
    halfspace_depth_estimate,
    hit_and_run_sample,
    log_unnormalized_posterior,
    model_consistent_answer,
    predictive_distribution,
    update,
)
from .catalog import Catalog, load_catalog, parse_catalog_lines, synthetic_catalog
from .channel import (
    ChannelAnalysis,
    DiscreteNoiseChannel,
    PredictiveDistribution,
    channel_equation,
    channel_gradient,
    channel_hessian,
    compute_capacity,
    dominated_row_report,
    make_symmetric_channel,
    sensitivity_gap_bounds,
    shannon_closed_form,
    symmetric_capacity,
)
from .selection import (
    Box,
    FanConstruction,
    PolicyConfig,
    construct_fan_2d,
    construct_question_continuum,
    entropy_pursuit_select,
    knowledge_gradient_select,
    misclassification_estimate,
    project_predictive,
    recover_alternatives_2d,
)
from .simulation import (
    ExperimentConfig,
    TrajectoryMetrics,
    fano_lower_bound,
    run_experiment,
    run_trajectory,
    simulate_response,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
