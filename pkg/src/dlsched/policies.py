"""Policy bundles and baseline schedulers.

Four decision sources are supported:

* ``dual``   -- per-packet randomized attempts from the price-derived policy
               tables; no per-slot cap at a node (the budget is enforced on
               average, through the prices alone).
* ``edf``    -- earliest-deadline-first at each node, budgeted by a
               deterministic token bucket at the node's average rate.
* ``greedy`` -- attempt every packet that can still make its deadline.
* ``idle``   -- never attempt.

``hard_cap`` optionally applies the EDF token bucket on top of dual/greedy
decisions, for measuring the average-vs-hard constraint gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .packet_dp import PolicyTable, PriceVector, attempt_decision


@dataclass(frozen=True)
class PolicyBundle:
    mode: str  # "dual" | "edf" | "greedy" | "idle"
    tables: dict[int, PolicyTable] = field(default_factory=dict)  # flow -> table
    prices: PriceVector | None = None  # the prices the tables were solved at
    hard_cap: bool = False  # token-bucket node budgets on dual/greedy attempts
    edf_filter_infeasible: bool = True  # skip packets that cannot make it

    MODES = ("dual", "edf", "greedy", "idle")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if self.mode == "dual" and not self.tables:
            raise ValueError("dual-price bundle needs one PolicyTable per flow")

    def with_tables(self, tables: dict[int, PolicyTable],
                    prices: PriceVector) -> "PolicyBundle":
        return replace(self, tables=tables, prices=prices)


class TokenBucket:
    """Deterministic average-rate limiter with burst bounded by 1 credit.

    grant() returns the integer budget for the current slot; consume() debits
    the attempts actually made.  Attempts in any W-slot window never exceed
    rate * W + 1.
    """

    __slots__ = ("rate", "credit")

    def __init__(self, rate: float):
        self.rate = float(rate)
        self.credit = 0.0

    def grant(self) -> int:
        self.credit = min(self.credit, 1.0) + self.rate
        return int(math.floor(self.credit))

    def consume(self, n: int) -> None:
        self.credit -= n


def hops_remaining(packet, num_hops: int) -> int:
    return num_hops + 1 - packet.hop


def is_feasible(packet, num_hops: int) -> bool:
    """Can the packet still reach its destination before the deadline?"""
    return packet.time_to_go >= hops_remaining(packet, num_hops)


def edf_select(packets: list, budget: int, num_hops: dict[int, int],
               filter_infeasible: bool = True) -> list[int]:
    """Indices of the packets to attempt this slot at one node.

    Earliest deadline (smallest time-to-go) first, ties broken by earlier
    birth slot, then lower flow id, then arrival order -- which is exactly the
    packets' storage order, so a stable sort on time-to-go suffices.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    candidates = [
        idx
        for idx, p in enumerate(packets)
        if not filter_infeasible or is_feasible(p, num_hops[p.flow])
    ]
    candidates.sort(key=lambda idx: packets[idx].time_to_go)
    return candidates[:budget]


def dual_price_decide(bundle: PolicyBundle, packet, num_hops: int, u: float) -> bool:
    """Per-packet attempt decision; independent across packets at a node."""
    if packet.flow not in bundle.tables:
        raise KeyError(f"no policy table for flow {packet.flow}")
    if not is_feasible(packet, num_hops):
        return False
    return attempt_decision(
        bundle.tables[packet.flow], packet.hop, packet.time_to_go, u
    )
