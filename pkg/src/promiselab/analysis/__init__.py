from .assessment import (
    EmpiricalAssessment,
    PersistenceReport,
    empirical_assessments,
    observed_persistence,
    observed_values,
    persistence,
    trace_assessments,
)
from .downstream import DownstreamReport, downstream_analysis, flow_graph, satisfied_accepts, supported_offers
from .linearity import Keeping, LinearityResult, check_linearity, check_linearity_pairs, keepings_from_trace
from .markov import (
    InsufficientDataError,
    MarkovOrderResult,
    OrderTest,
    TransitionMatrix,
    estimate_markov_order,
    estimate_transition_matrix,
    generate_chain,
)
from .timescale import DEFAULT_EPSILON, TimescaleReport, timescale_ratio, timescale_report

__all__ = [
    "DEFAULT_EPSILON",
    "DownstreamReport",
    "EmpiricalAssessment",
    "InsufficientDataError",
    "Keeping",
    "LinearityResult",
    "MarkovOrderResult",
    "OrderTest",
    "PersistenceReport",
    "TimescaleReport",
    "TransitionMatrix",
    "check_linearity",
    "check_linearity_pairs",
    "downstream_analysis",
    "empirical_assessments",
    "estimate_markov_order",
    "estimate_transition_matrix",
    "flow_graph",
    "generate_chain",
    "keepings_from_trace",
    "observed_persistence",
    "observed_values",
    "persistence",
    "satisfied_accepts",
    "supported_offers",
    "timescale_ratio",
    "timescale_report",
    "trace_assessments",
]
