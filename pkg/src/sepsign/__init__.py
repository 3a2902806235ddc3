"""Separable two-layer transition models for dynamic signed networks.

The package simulates and fits a discrete-time model of signed network
panels in which each transition factorizes into a formation step and a
persistence step, each acting on an interaction layer (which dyads carry a
tie) and a sign layer (the valence of each tie). Estimation is Bayesian,
via an exchange-style MCMC that cancels the intractable normalizing
constants by re-simulating every observed layer on its own support.
"""

from .errors import (
    ConfigError,
    DataError,
    InferenceError,
    SepsignError,
    StructuralError,
    SupportError,
    TermError,
)
from .networks import (
    BinaryNetwork,
    NetworkPanel,
    NodeSet,
    SignAssignment,
    SignedNetwork,
    TransitionDecomposition,
    decompose,
    densities,
    recombine,
    upper_dyads,
)
from .stats import (
    BoundModel,
    ModelSpec,
    StatisticSpec,
    bind,
    change_stat_binary,
    change_stat_sign,
    esp_counts,
    gw_forward_diffs,
    gw_transform,
    gw_weights,
    gwnsp_restricted,
    parse_term,
    suff_stats_binary,
    suff_stats_sign,
)
from .sim import (
    ProcessParams,
    SimConfig,
    run_binary_chain,
    run_sign_chain,
    erdos_renyi_signed,
    sample_binary_layer,
    sample_sign_layer,
    simulate_panel,
    simulate_signs_given_support,
    simulate_tergm_binary,
    simulate_transition,
)
from .infer import (
    Chain,
    LayerTask,
    MCMCConfig,
    PriorSpec,
    RunningMoments,
    adapt_proposal,
    aea_interaction,
    aea_sign,
    build_interaction_tasks,
    build_sign_tasks,
    exchange_log_ratio,
    log_prior,
    model_from_dict,
    model_to_dict,
    proposal_covariance,
    run_exchange,
)
from .diag import (
    ChainSummary,
    MarginalProbability,
    PPCResult,
    ParamSummary,
    acf,
    ess,
    marginal_positive_probability,
    ppc,
    quantile,
    summarize,
)
from .io import (
    load_config,
    panel_report,
    read_attributes,
    read_chain,
    read_dyad_covariate,
    read_panel,
    write_attributes,
    write_chain,
    write_panel,
    write_table,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryNetwork",
    "BoundModel",
    "Chain",
    "ChainSummary",
    "ConfigError",
    "DataError",
    "InferenceError",
    "LayerTask",
    "MCMCConfig",
    "MarginalProbability",
    "ModelSpec",
    "NetworkPanel",
    "NodeSet",
    "PPCResult",
    "ParamSummary",
    "PriorSpec",
    "ProcessParams",
    "RunningMoments",
    "SepsignError",
    "SignAssignment",
    "SignedNetwork",
    "SimConfig",
    "StatisticSpec",
    "StructuralError",
    "SupportError",
    "TermError",
    "TransitionDecomposition",
    "acf",
    "adapt_proposal",
    "aea_interaction",
    "aea_sign",
    "bind",
    "build_interaction_tasks",
    "build_sign_tasks",
    "change_stat_binary",
    "change_stat_sign",
    "decompose",
    "densities",
    "erdos_renyi_signed",
    "esp_counts",
    "ess",
    "exchange_log_ratio",
    "gw_forward_diffs",
    "gw_transform",
    "gw_weights",
    "gwnsp_restricted",
    "load_config",
    "log_prior",
    "marginal_positive_probability",
    "model_from_dict",
    "model_to_dict",
    "panel_report",
    "parse_term",
    "ppc",
    "proposal_covariance",
    "quantile",
    "read_attributes",
    "read_chain",
    "read_dyad_covariate",
    "read_panel",
    "recombine",
    "run_binary_chain",
    "run_exchange",
    "run_sign_chain",
    "sample_binary_layer",
    "sample_sign_layer",
    "simulate_panel",
    "simulate_signs_given_support",
    "simulate_tergm_binary",
    "simulate_transition",
    "suff_stats_binary",
    "suff_stats_sign",
    "summarize",
    "upper_dyads",
    "write_attributes",
    "write_chain",
    "write_panel",
    "write_table",
]
