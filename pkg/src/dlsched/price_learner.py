"""Dual prices: dual value, usage gradients, subgradient iteration.

The dual of the throughput-maximization problem decomposes per flow once each
node charges a price per transmission attempt.  The dual value at prices lam is

    D(lam) = sum_f rate_f * E_delta[ V_f(source, delta; lam) ] + sum_v lam_v * M_v

and a subgradient component is g_v = M_v - (expected attempts per slot at v).
Prices are updated by projected subgradient steps with a diminishing step
size; online, each node replaces the expected usage with its own observed
attempt counts, which requires no communication between nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .net_model import DeadlineDistribution, ValidatedSpec, route_links
from .packet_dp import (
    PolicyTable,
    PriceVector,
    Route,
    TieRule,
    ValueTable,
    policy_from_table,
    solve_value_table,
)

CONVERGENCE_TOL = 1e-4
CONVERGENCE_WINDOW = 50


@dataclass
class LearnerState:
    """Mutable state of the subgradient iteration."""

    prices: PriceVector
    k: int = 0
    a0: float = 1.0
    exponent: float = 0.5
    history: list[dict] = field(default_factory=list)

    def step_size(self, k: int) -> float:
        return self.a0 / k**self.exponent


def default_a0(spec: ValidatedSpec) -> float:
    """Default initial step: inverse of the largest node budget."""
    return 1.0 / max(spec.budgets())


def solve_tables(
    spec: ValidatedSpec,
    prices: PriceVector,
    tie_rule: TieRule = "idle",
) -> dict[int, tuple[ValueTable, PolicyTable]]:
    """Per-flow value and policy tables at the given prices."""
    out = {}
    for f in spec.flows:
        route = route_links(spec, f.id)
        vt = solve_value_table(route, f.weight, prices, f.deadline.max_deadline, f.id)
        out[f.id] = (vt, policy_from_table(vt, tie_rule))
    return out


def expected_usage_per_packet(
    pt: PolicyTable,
    route: Route,
    deadline: DeadlineDistribution,
    num_nodes: int,
) -> np.ndarray:
    """Expected transmission attempts per packet at each node, exactly.

    Forward propagation of the packet state distribution under pt, with the
    attempt probability mass accumulated at the tail node of each hop, summed
    over the flow's deadline distribution.
    """
    usage = np.zeros(num_nodes)
    for delta, prob in deadline.support:
        usage += prob * _usage_from_start(pt, route, delta, num_nodes)
    return usage


def _usage_from_start(
    pt: PolicyTable, route: Route, s0: int, num_nodes: int
) -> np.ndarray:
    L = len(route)
    tails = [t for _, t, _ in route]
    ps = [p for _, _, p in route]
    usage = np.zeros(num_nodes)
    mass = {(1, min(s0, pt.max_deadline)): 1.0}
    for s in range(s0, 0, -1):
        for i in range(1, L + 1):
            m = mass.pop((i, s), None)
            if m is None or s <= L - i:
                continue
            attempted = m * float(pt.phi[i, s])
            usage[tails[i - 1]] += attempted
            succ = ps[i - 1] * attempted
            if i < L:
                mass[(i + 1, s - 1)] = mass.get((i + 1, s - 1), 0.0) + succ
            mass[(i, s - 1)] = mass.get((i, s - 1), 0.0) + (m - succ)
    return usage


def node_usage_per_slot(
    spec: ValidatedSpec,
    tables: dict[int, tuple[ValueTable, PolicyTable]],
) -> np.ndarray:
    """Expected attempts per slot at each node: arrival-rate-weighted usage."""
    total = np.zeros(spec.num_nodes)
    for f in spec.flows:
        pt = tables[f.id][1]
        total += f.arrival.mean_rate * expected_usage_per_packet(
            pt, route_links(spec, f.id), f.deadline, spec.num_nodes
        )
    return total


def usage_gradient(spec: ValidatedSpec, usage: np.ndarray) -> np.ndarray:
    """Subgradient of the dual at the prices the usage was computed under."""
    return np.asarray(spec.budgets()) - np.asarray(usage)


def subgradient_step(state: LearnerState, g: np.ndarray) -> LearnerState:
    """Projected step lam <- max(0, lam - a_k * g) with a_k = a0 / k^exponent."""
    k = state.k + 1
    lam = np.maximum(0.0, state.prices.lam - state.step_size(k) * np.asarray(g))
    return LearnerState(PriceVector(lam), k, state.a0, state.exponent, state.history)


def dual_value(spec: ValidatedSpec, prices: PriceVector) -> float:
    """D(prices): per-flow packet values plus priced budgets (upper bound on
    the achievable weighted throughput)."""
    total = float(np.dot(prices.lam, spec.budgets()))
    for f in spec.flows:
        vt = solve_value_table(
            route_links(spec, f.id), f.weight, prices, f.deadline.max_deadline, f.id
        )
        per_packet = sum(p * vt.source_value(d) for d, p in f.deadline.support)
        total += f.arrival.mean_rate * per_packet
    return total


def run_offline_iteration(
    spec: ValidatedSpec,
    init_prices: PriceVector | None = None,
    a0: float | None = None,
    exponent: float = 0.5,
    iters: int = 200,
) -> tuple[list[dict], dict[int, tuple[ValueTable, PolicyTable]], LearnerState]:
    """K steps of (solve tables -> expected usage -> gradient -> step).

    Stops early once the price change stays below CONVERGENCE_TOL in infinity
    norm for CONVERGENCE_WINDOW consecutive iterations.  Returns the full
    trace, the tables at the final prices, and the final learner state.
    """
    if iters < 1:
        raise ValueError("need at least one iteration")
    prices = init_prices or PriceVector.zeros(spec.num_nodes)
    state = LearnerState(prices, 0, a0 if a0 is not None else default_a0(spec), exponent)
    trace: list[dict] = []
    quiet = 0
    for _ in range(iters):
        tables = solve_tables(spec, state.prices)
        usage = node_usage_per_slot(spec, tables)
        g = usage_gradient(spec, usage)
        new_state = subgradient_step(state, g)
        trace.append(
            {
                "k": new_state.k,
                "prices": state.prices.lam.copy(),
                "gradient": g,
                "usage": usage,
                "dual": dual_value(spec, state.prices),
                "step": state.step_size(new_state.k),
            }
        )
        delta = float(np.max(np.abs(new_state.prices.lam - state.prices.lam)))
        quiet = quiet + 1 if delta < CONVERGENCE_TOL else 0
        state = new_state
        if quiet >= CONVERGENCE_WINDOW:
            break
    state.history = trace
    return trace, solve_tables(spec, state.prices), state


def run_online_iteration(
    spec: ValidatedSpec,
    sim,
    window: int,
    a0: float | None = None,
    exponent: float = 0.5,
    iters: int = 100,
    warmup: int | None = None,
) -> tuple[list[dict], LearnerState]:
    """Decentralized learning: every `window` slots each node replaces the
    expected usage with its own observed attempts-per-slot and steps its price.

    `sim` is a sim_engine.Simulation running a dual-price bundle; its tables
    are re-solved after every price step.  A warmup of max-deadline slots
    (default) lets the packet pipeline fill before the first measurement.
    """
    if warmup is None:
        warmup = max(f.deadline.max_deadline for f in spec.flows)
    state = LearnerState(
        sim.bundle.prices, 0, a0 if a0 is not None else default_a0(spec), exponent
    )
    if warmup:
        sim.run_chunk(warmup)
    trace: list[dict] = []
    for _ in range(iters):
        before = sim.state.attempts.copy()
        sim.run_chunk(window)
        observed = (sim.state.attempts - before) / float(window)
        g = usage_gradient(spec, observed)
        new_state = subgradient_step(state, g)
        trace.append(
            {
                "k": new_state.k,
                "prices": state.prices.lam.copy(),
                "gradient": g,
                "usage": observed,
                "dual": dual_value(spec, state.prices),
                "step": state.step_size(new_state.k),
            }
        )
        state = new_state
        sim.set_prices(state.prices)
    state.history = trace
    return trace, state


# ---------------------------------------------------------------------------
# Primal recovery.  The converged subgradient prices land near, but not on,
# the critical prices at which flows are exactly indifferent; with the "idle"
# tie rule the simulated policy would then either ignore or saturate a tight
# budget.  Recovery (a) polishes each priced node's lambda onto the usage
# breakpoint by bisection and (b) picks a randomizing probability for the tie
# states so the expected usage meets the budget, which is exactly the
# structure of the optimal stationary randomized policy of the constrained MDP.
# ---------------------------------------------------------------------------


def recover_primal(
    spec: ValidatedSpec,
    prices: PriceVector,
    rounds: int = 3,
    usage_tol: float = 1e-9,
) -> tuple[PriceVector, dict[int, tuple[ValueTable, PolicyTable]], dict[int, float]]:
    """Polished prices plus tie-calibrated tables meeting the budgets.

    Returns (prices, tables, tie probabilities per node).  Tables use the
    "idle" tie rule everywhere except the calibrated tie states.
    """
    budgets = np.asarray(spec.budgets())
    lam_hi = max(f.weight for f in spec.flows) + 1.0  # above this nobody attempts
    lam = prices.lam.copy()

    def usage_at(lam_vec: np.ndarray) -> np.ndarray:
        tables = solve_tables(spec, PriceVector(lam_vec))
        return node_usage_per_slot(spec, tables)

    for _ in range(rounds):
        changed = False
        for v in range(spec.num_nodes):
            if lam[v] == 0.0 and usage_at(lam)[v] <= budgets[v] + usage_tol:
                continue
            trial = lam.copy()
            trial[v] = 0.0
            if usage_at(trial)[v] <= budgets[v] + usage_tol:
                new = 0.0
            else:
                lo, hi = 0.0, lam_hi
                for _ in range(100):  # bisect to the usage breakpoint
                    mid = 0.5 * (lo + hi)
                    trial[v] = mid
                    if usage_at(trial)[v] <= budgets[v] + usage_tol:
                        hi = mid
                    else:
                        lo = mid
                    if hi == lo or (hi - lo) < 1e-15 * max(1.0, hi):
                        break
                new = hi
            if new != lam[v]:
                changed = True
            lam[v] = new
        if not changed:
            break

    polished = PriceVector(lam)
    tie_q = _calibrate_ties(spec, polished, budgets, usage_tol)
    tables = solve_tables(spec, polished, tie_rule=tie_q)
    return polished, tables, tie_q


def _calibrate_ties(
    spec: ValidatedSpec,
    prices: PriceVector,
    budgets: np.ndarray,
    usage_tol: float,
) -> dict[int, float]:
    """Per-node tie probabilities making expected usage meet tight budgets.

    Ties default to "attempt" (a free attempt costs nothing in packet value
    but recovers real throughput); any node whose expected usage would then
    exceed its budget gets its tie probability reduced by bisection.  Priced
    nodes are handled first since their ties carry the contested usage.
    """
    tie_q = {v: 1.0 for v in range(spec.num_nodes)}

    def usage_with(q: dict[int, float]) -> np.ndarray:
        return node_usage_per_slot(spec, solve_tables(spec, prices, tie_rule=q))

    order = sorted(range(spec.num_nodes), key=lambda v: -prices[v])
    for _ in range(2):  # a second pass catches cross-node interactions
        for v in order:
            if usage_with(tie_q)[v] <= budgets[v] + usage_tol:
                continue
            probe = dict(tie_q)
            probe[v] = 0.0
            if usage_with(probe)[v] >= budgets[v] - usage_tol:
                tie_q[v] = 0.0
                continue
            lo, hi = 0.0, 1.0
            for _ in range(60):  # own-node usage is monotone in q
                mid = 0.5 * (lo + hi)
                probe[v] = mid
                if usage_with(probe)[v] <= budgets[v]:
                    lo = mid
                else:
                    hi = mid
            tie_q[v] = lo
    return tie_q
