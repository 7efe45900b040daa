"""Independent oracles for the single-packet DP and its policies.

``enumerate_best_value`` exhaustively scores every deterministic Markov policy
of the per-packet MDP by forward probability propagation; it shares no code
path with the backward induction in packet_dp, so agreement between the two is
a meaningful check.  ``monte_carlo_packet_reward`` estimates the realized
reward of a policy table by simulating packet trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .packet_dp import PolicyTable, PriceVector, Route

ENUMERATION_CAP = 20  # max decision states; 2**20 policies is the hard limit


class EnumerationCapError(ValueError):
    pass


@dataclass(frozen=True)
class EnumeratedPolicy:
    """Deterministic action per feasible decision state of one packet MDP."""

    actions: dict[tuple[int, int], bool]  # (hop, s) -> attempt?

    def attempts(self, hop: int, s: int) -> bool:
        return self.actions[(hop, s)]

    @property
    def all_attempt(self) -> bool:
        return all(self.actions.values())

    @property
    def all_idle(self) -> bool:
        return not any(self.actions.values())


def decision_states(num_hops: int, max_deadline: int) -> list[tuple[int, int]]:
    """States (hop, s) from which delivery is still possible, DP order."""
    return [
        (i, s)
        for i in range(num_hops, 0, -1)
        for s in range(num_hops - i + 1, max_deadline + 1)
    ]


def enumerate_best_value(
    route: Route,
    alpha: float,
    prices: PriceVector,
    max_deadline: int,
) -> tuple[float, EnumeratedPolicy]:
    """Best expected reward over all deterministic Markov policies.

    Propagates the packet state distribution forward in time for all 2^N
    policies at once (one numpy lane per policy), accumulating price charges
    and the delivery reward.
    """
    L = len(route)
    D = int(max_deadline)
    states = decision_states(L, D)
    n = len(states)
    if n > ENUMERATION_CAP:
        raise EnumerationCapError(
            f"{n} decision states exceeds the enumeration cap of {ENUMERATION_CAP}"
        )
    tails = [t for _, t, _ in route]
    ps = [p for _, _, p in route]
    lam = [prices[t] for t in tails]
    bit = {st: j for j, st in enumerate(states)}

    P = 1 << n
    idx = np.arange(P, dtype=np.int64)
    reward = np.zeros(P)
    # mass[(hop, s)] = P(packet alive in that state), per policy lane
    mass: dict[tuple[int, int], np.ndarray] = {(1, D): np.ones(P)}
    for s in range(D, 0, -1):
        for i in range(1, L + 1):
            m = mass.pop((i, s), None)
            if m is None:
                continue
            if s <= L - i:
                continue  # cannot make it; dies without reward
            act = ((idx >> bit[(i, s)]) & 1).astype(np.float64)
            attempted = m * act
            reward -= lam[i - 1] * attempted
            succ = ps[i - 1] * attempted
            if i == L:
                reward += alpha * succ
            else:
                mass[(i + 1, s - 1)] = mass.get((i + 1, s - 1), 0.0) + succ
            mass[(i, s - 1)] = mass.get((i, s - 1), 0.0) + (m - succ)

    best = int(np.argmax(reward))
    actions = {st: bool((best >> bit[st]) & 1) for st in states}
    return float(reward[best]), EnumeratedPolicy(actions)


def monte_carlo_packet_reward(
    pt: PolicyTable,
    route: Route,
    alpha: float,
    prices: PriceVector,
    n: int,
    seed: int,
    start_s: int | None = None,
) -> tuple[float, float]:
    """Mean and standard error of the per-packet reward under a policy table.

    Simulates n i.i.d. trajectories from (hop 1, s = start_s); vectorized
    across trials, deterministic given the seed.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    L = len(route)
    D = pt.max_deadline
    s0 = D if start_s is None else int(start_s)
    ps = np.array([p for _, _, p in route])
    lam = np.array([prices[t] for _, t, _ in route])

    rng = np.random.default_rng(seed)
    hop = np.ones(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    reward = np.zeros(n)
    for s in range(s0, 0, -1):
        if not alive.any():
            break
        feasible = alive & (s > L - hop)
        phi = np.where(feasible, pt.phi[np.minimum(hop, L), s], 0.0)
        attempt = feasible & (rng.random(n) < phi)
        reward -= np.where(attempt, lam[np.minimum(hop, L) - 1], 0.0)
        succ = attempt & (rng.random(n) < ps[np.minimum(hop, L) - 1])
        hop = hop + succ
        delivered = alive & (hop == L + 1)
        reward += np.where(delivered, alpha, 0.0)
        alive &= ~delivered
        alive &= (s - 1) > (L - hop)  # drop packets that can no longer make it
    mean = float(reward.mean())
    stderr = float(reward.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, stderr
