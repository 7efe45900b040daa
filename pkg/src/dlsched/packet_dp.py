"""Single-packet finite-horizon dynamic program for one flow.

Given a per-node price vector, computes the value of a packet at hop i with s
slots to go, and the induced randomized attempt policy.  The recursion is

    V(i, s) = max{ V(i, s-1),
                   -price[tail(i)] + p_i * V(i+1, s-1) + (1-p_i) * V(i, s-1) }

with V(L+1, s) = alpha (delivered) and V(i, s) = 0 for s <= L - i (too few
slots left to reach the destination).  Attempting is charged the tail node's
price whether or not the transmission succeeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

TIE_EPSILON = 1e-12

# A route hop view as produced by net_model.route_links:
# list of (link_id, tail_node, reliability).
Route = Sequence[tuple[int, int, float]]

# How to act at states where attempting and idling are exactly tied:
# "idle", "attempt", a probability in [0,1], or a per-tail-node mapping.
TieRule = Union[str, float, Mapping[int, float]]


@dataclass(frozen=True)
class PriceVector:
    """Nonnegative per-node attempt prices (Lagrange multipliers)."""

    lam: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.lam, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("prices must be a 1-d vector")
        if np.any(arr < 0):
            raise ValueError("prices must be nonnegative")
        object.__setattr__(self, "lam", arr)

    @classmethod
    def zeros(cls, num_nodes: int) -> "PriceVector":
        return cls(np.zeros(num_nodes))

    def replace(self, node: int, value: float) -> "PriceVector":
        lam = self.lam.copy()
        lam[node] = value
        return PriceVector(lam)

    def __getitem__(self, node: int) -> float:
        return float(self.lam[node])


@dataclass(frozen=True)
class ValueTable:
    """V[hop][s] for hop in 0..L+1 (row 0 unused), s in 0..max_deadline."""

    flow: int
    alpha: float
    values: np.ndarray  # shape (L+2, max_deadline+1)
    route_tail: np.ndarray  # tail node per hop, shape (L,)
    route_p: np.ndarray  # reliability per hop, shape (L,)
    route_price: np.ndarray  # price charged per hop, shape (L,)

    @property
    def num_hops(self) -> int:
        return len(self.route_tail)

    @property
    def max_deadline(self) -> int:
        return self.values.shape[1] - 1

    def source_value(self, s: int) -> float:
        return float(self.values[1, s])


@dataclass(frozen=True)
class PolicyTable:
    """Attempt probabilities phi[hop][s], same layout as ValueTable.values."""

    flow: int
    phi: np.ndarray  # shape (L+2, max_deadline+1); rows 1..L meaningful

    @property
    def num_hops(self) -> int:
        return self.phi.shape[0] - 2

    @property
    def max_deadline(self) -> int:
        return self.phi.shape[1] - 1


def solve_value_table(
    route: Route,
    alpha: float,
    prices: PriceVector,
    max_deadline: int,
    flow: int = 0,
) -> ValueTable:
    """Backward induction over hops L..1, s ascending.

    A max_deadline shorter than the route yields an all-zero table (delivery
    infeasible from the source), not an error.
    """
    L = len(route)
    D = int(max_deadline)
    tails = np.array([t for _, t, _ in route], dtype=np.int64)
    ps = np.array([p for _, _, p in route], dtype=np.float64)
    lam = np.array([prices[t] for t in tails], dtype=np.float64)

    V = np.zeros((L + 2, D + 1))
    V[L + 1, :] = alpha
    for i in range(L, 0, -1):
        for s in range(1, D + 1):
            if s <= L - i:
                continue  # infeasible state, stays 0
            idle = V[i, s - 1]
            attempt = -lam[i - 1] + ps[i - 1] * V[i + 1, s - 1] \
                + (1.0 - ps[i - 1]) * V[i, s - 1]
            V[i, s] = idle if idle >= attempt else attempt
    V.setflags(write=False)
    return ValueTable(flow, float(alpha), V, tails, ps, lam)


def branch_margin(vt: ValueTable) -> np.ndarray:
    """attempt-minus-idle value at each state; phi=1 iff margin > tie epsilon.

    Equivalently: attempt exactly when
    p_i * (V(i+1, s-1) - V(i, s-1)) > price[tail(i)].
    """
    L = vt.num_hops
    D = vt.max_deadline
    V = vt.values
    margin = np.full((L + 2, D + 1), -np.inf)
    for i in range(1, L + 1):
        for s in range(L - i + 1, D + 1):
            attempt = -vt.route_price[i - 1] + vt.route_p[i - 1] * V[i + 1, s - 1] \
                + (1.0 - vt.route_p[i - 1]) * V[i, s - 1]
            margin[i, s] = attempt - V[i, s - 1]
    return margin


def policy_from_table(
    vt: ValueTable,
    tie_rule: TieRule = "idle",
    tie_epsilon: float = TIE_EPSILON,
) -> PolicyTable:
    """phi=1 where attempting is strictly better, 0 where idling is, tie_rule
    at states where the two branches are within tie_epsilon.

    The default tie_rule "idle" matches the convention used when evaluating
    the dual; pass "attempt", a probability, or a per-node mapping for primal
    recovery experiments.
    """
    margin = branch_margin(vt)
    phi = np.zeros_like(vt.values)
    L = vt.num_hops
    for i in range(1, L + 1):
        tie_p = _tie_probability(tie_rule, int(vt.route_tail[i - 1]))
        for s in range(L - i + 1, vt.max_deadline + 1):
            m = margin[i, s]
            if m > tie_epsilon:
                phi[i, s] = 1.0
            elif m >= -tie_epsilon:
                phi[i, s] = tie_p
    phi.setflags(write=False)
    return PolicyTable(vt.flow, phi)


def _tie_probability(tie_rule: TieRule, tail: int) -> float:
    if tie_rule == "idle":
        return 0.0
    if tie_rule == "attempt":
        return 1.0
    if isinstance(tie_rule, Mapping):
        q = float(tie_rule.get(tail, 0.0))
    else:
        q = float(tie_rule)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"tie probability {q} not in [0,1]")
    return q


def attempt_decision(pt: PolicyTable, hop: int, time_to_go: int, u: float) -> bool:
    """True = attempt, False = idle; deterministic given the uniform draw u."""
    if not (1 <= hop <= pt.num_hops and 0 <= time_to_go <= pt.max_deadline):
        raise IndexError(f"state ({hop}, {time_to_go}) outside the policy table")
    return bool(u < pt.phi[hop, time_to_go])


def delivery_probability(route: Route, s: int) -> float:
    """P(always-attempt packet starting at hop 1 with s slots is delivered).

    Exact forward recursion; independent closed-form check for the zero-price
    value table (V = alpha * delivery_probability when all prices are 0).
    """
    L = len(route)
    if s < L:
        return 0.0
    ps = [p for _, _, p in route]
    # R[i] = P(deliver | at hop i+1 with the current number of slots left)
    R = [0.0] * (L + 2)
    R[L] = 1.0  # hop L+1 (0-indexed L) is the destination
    for slots in range(1, s + 1):
        prev = R[:]
        for i in range(L):
            R[i] = ps[i] * prev[i + 1] + (1.0 - ps[i]) * prev[i]
        R[L] = 1.0
    return R[0]
