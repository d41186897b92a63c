"""Tomography of partially observed adaptive diffusion networks.

The package simulates networks of agents running a combine-then-adapt
recursion over streaming data, estimates the inter-agent combination
weights from the output streams of an observable subset, recovers the
interaction profile by exact two-cluster splitting, and numerically
verifies the concentration and variance properties that make the
recovery consistent at large network sizes.
"""

from .classify import ClusterOutcome, EdgeMetrics, classify_edges, edge_metrics, two_means_1d
from .correlation import (
    CorrelationPair,
    CorrelationSource,
    NonConvergenceError,
    default_burn_in,
    empirical_r0,
    empirical_r1,
    exact_pair,
    empirical_pair,
    r0_closed_form_symmetric,
    r0_lyapunov,
    r1_from_r0,
)
from .diffusion import DiffusionTrace, InputKind, draw_inputs, restrict, run_recursion, simulate
from .graphgen import (
    GraphKind,
    GraphModel,
    InteractionGraph,
    connectivity_probability,
    degree,
    degrees,
    generate,
    graph_from_adjacency,
    is_connected,
    max_degree,
    permute,
)
from .policies import (
    CombinationMatrix,
    PolicyClassReport,
    check_class_tau,
    check_equivariance,
    check_weight_bound,
    counterexample_policy,
    default_tau,
    laplacian,
    make_policy,
    metropolis,
    uniform_averaging,
)
from .theory import (
    VarianceReport,
    approx_error_variance,
    binomial_inverse_moment,
    error_concentration_audit,
    exceedance_count_audit,
    h_row_sum_bound,
    max_degree_tail,
    run_verification,
    weighted_sum_variance,
)
from .tomography import (
    DistributionDiagnostics,
    ObservableSet,
    SelectionMode,
    TomographyResult,
    diagnostics,
    error_closed_form,
    estimate_a_obs,
    f_matrix,
    scaled_fraction_ratio,
    select_observable,
    subset_size,
)

__version__ = "0.1.0"
