"""Differentially private approximation algorithms for Max-CSP, Max-kXOR
and Max-Cut, with exact oracles, instance generators, and an empirical
privacy auditor."""

from .csp_core import (
    Constraint,
    CspInstance,
    ResourceCapError,
    WeightedGraph,
    associated_advantage,
    cut_value,
    degrees,
    derivative_q,
    eval_value,
    g_value,
    is_triangle_free,
    lambda_j,
    mu,
)
from .dp_mechanisms import (
    PrivacyBudget,
    RngStream,
    em_over_assignments,
    exponential_mechanism,
    randomized_response,
    sample_discrete_laplace,
    sample_laplace,
)

__version__ = "0.1.0"

__all__ = [
    "Constraint",
    "CspInstance",
    "WeightedGraph",
    "ResourceCapError",
    "PrivacyBudget",
    "RngStream",
    "eval_value",
    "cut_value",
    "associated_advantage",
    "g_value",
    "mu",
    "is_triangle_free",
    "degrees",
    "derivative_q",
    "lambda_j",
    "sample_laplace",
    "sample_discrete_laplace",
    "randomized_response",
    "exponential_mechanism",
    "em_over_assignments",
    "__version__",
]
