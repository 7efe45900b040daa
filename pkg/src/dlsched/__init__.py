"""Deadline-constrained multi-hop network scheduling: simulator, per-packet
dual-price policies, price learning, and baselines."""

from .net_model import (
    ArrivalProcess,
    DeadlineDistribution,
    FlowSpec,
    LinkSpec,
    NetworkSpec,
    NodeSpec,
    SpecError,
    ValidatedSpec,
    load_network,
    route_links,
    tail_node,
    validate_spec,
)
from .packet_dp import (
    PolicyTable,
    PriceVector,
    ValueTable,
    attempt_decision,
    delivery_probability,
    policy_from_table,
    solve_value_table,
)
from .policies import PolicyBundle, TokenBucket, dual_price_decide, edf_select
from .price_learner import (
    LearnerState,
    dual_value,
    expected_usage_per_packet,
    recover_primal,
    run_offline_iteration,
    run_online_iteration,
    solve_tables,
    subgradient_step,
    usage_gradient,
)
from .sim_engine import (
    HAVE_COMPILED_KERNEL,
    SimMetrics,
    Simulation,
    metrics_summary,
    run,
)

__version__ = "0.1.0"
