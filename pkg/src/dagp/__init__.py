"""Decentralized constrained optimization over directed graphs.

A library and CLI around DAGP (fixed-step double averaging with gradient
projection, handling a different convex constraint at every node), baseline
decentralized methods, the zero row-sum / zero column-sum gossip matrix
construction, optimality and rate diagnostics, and a reproducible experiment
harness with CSV traces and SVG charts.
"""

from .algorithms import (
    DagpHyperParams,
    DagpState,
    NonFiniteError,
    OptimalityReport,
    Stepper,
    broadcast_message,
    check_stopping_point,
    dagp_init,
    dagp_step,
    dagp_step_message_passing,
    initial_iterates,
    make_stepper,
    run,
)
from .certificates import (
    EigenvalueMarginReport,
    CertificateMatrices,
    eigenvalue_margin_scan,
    build_certificates,
    build_F,
)
from .config import AlgorithmSpec, ConfigError, ExperimentConfig, parse_config, serialize_config
from .graphs import (
    DirectedGraph,
    in_neighbors,
    is_strongly_connected,
    laplacians,
    out_neighbors,
    random_strongly_connected,
)
from .harness import build_experiment, certify, run_experiment, solve_reference
from .metrics import (
    FitReport,
    Trace,
    TraceRecord,
    consensus_error,
    feasibility_gap,
    grad_sum_norm,
    mean_iterate,
    rate_fit,
    write_trace_csv,
)
from .mixing import (
    GossipPair,
    KernelReport,
    build_gossip_pair,
    column_stochastic,
    row_stochastic,
    verify_kernel_conditions,
)
from .plots import emit_plots
from .problems import (
    BallSet,
    BoxSet,
    ConvexSet,
    Halfspace,
    LogCoshFunction,
    LogisticLoss,
    ProblemInstance,
    QuadraticFunction,
    SmoothConvexFunction,
    WholeSpace,
    dykstra_project,
    generate_logistic_instance,
    generate_synthetic_instance,
)
from .reference import ReferenceSolution, centralized_solve, kkt_residual

__version__ = "0.1.0"
