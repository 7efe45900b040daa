"""Pure-Python slot-loop kernel.

Reference implementation of the simulator inner loop; the compiled kernel in
``_speedups.pyx`` mirrors it operation-for-operation (same PCG32 streams, same
draw order, same IEEE arithmetic) so that both backends produce bit-identical
trajectories.  Any semantic change here must be made there too.

Slot order: (1) arrivals and deadline draws, (2) per-packet / per-node policy
decisions, (3) Bernoulli link outcomes and metric counting, (4) time-to-go
decrement, delivery and drop removal.
"""

from __future__ import annotations

from .rng import (
    INV32,
    STREAM_ARRIVALS,
    STREAM_CHANNEL,
    STREAM_DEADLINES,
    STREAM_POLICY,
    pcg32_next,
)

MODE_IDLE = 0
MODE_DUAL = 1
MODE_GREEDY = 2
MODE_EDF = 3


def run_slots(state, comp, nslots: int, trace=None, trace_base: int = 0) -> None:
    """Advance the simulation by nslots, mutating state in place."""
    F = comp["F"]
    V = comp["V"]
    mode = comp["mode"]
    hard_cap = comp["hard_cap"]
    edf_filter = comp["edf_filter"]
    route_off = comp["route_off"].tolist()
    hop_tail = comp["hop_tail"].tolist()
    hop_p = comp["hop_p"].tolist()
    arr_kind = comp["arr_kind"].tolist()
    arr_value = comp["arr_value"].tolist()
    arr_batch = comp["arr_batch"].tolist()
    arr_expneg = comp["arr_expneg"].tolist()
    dl_off = comp["dl_off"].tolist()
    dl_val = comp["dl_val"].tolist()
    dl_cum = comp["dl_cum"].tolist()
    dmax = comp["dmax"].tolist()
    phi_off = comp["phi_off"].tolist()
    phi = comp["phi"].tolist()
    budget = comp["budget"].tolist()
    L = [route_off[f + 1] - route_off[f] for f in range(F)]

    n = state.n
    p_flow = state.flow[:n].tolist()
    p_hop = state.hop[:n].tolist()
    p_ttg = state.ttg[:n].tolist()
    p_birth = state.birth[:n].tolist()

    rs = [int(state.rng[i, 0]) for i in range(4)]
    ri = [int(state.rng[i, 1]) for i in range(4)]
    credit = state.credit.tolist()
    arrivals = state.arrivals.tolist()
    delivered = state.delivered.tolist()
    dropped = state.dropped.tolist()
    attempts = state.attempts.tolist()
    slot = state.slot

    use_bucket = mode == MODE_EDF or hard_cap

    for t in range(nslots):
        row = trace_base + t
        # --- 1. arrivals -------------------------------------------------
        for f in range(F):
            kind = arr_kind[f]
            if kind == 0:  # deterministic batch
                count = arr_batch[f]
            elif kind == 1:  # bernoulli
                out, rs[STREAM_ARRIVALS] = pcg32_next(
                    rs[STREAM_ARRIVALS], ri[STREAM_ARRIVALS]
                )
                count = 1 if out * INV32 < arr_value[f] else 0
            else:  # poisson, Knuth inversion
                expneg = arr_expneg[f]
                count = 0
                p = 1.0
                while True:
                    out, rs[STREAM_ARRIVALS] = pcg32_next(
                        rs[STREAM_ARRIVALS], ri[STREAM_ARRIVALS]
                    )
                    p *= out * INV32
                    if p <= expneg:
                        break
                    count += 1
            arrivals[f] += count
            if trace is not None:
                trace["arrivals"][row, f] += count
            for _ in range(count):
                out, rs[STREAM_DEADLINES] = pcg32_next(
                    rs[STREAM_DEADLINES], ri[STREAM_DEADLINES]
                )
                u = out * INV32
                delta = dl_val[dl_off[f + 1] - 1]
                for j in range(dl_off[f], dl_off[f + 1]):
                    if u < dl_cum[j]:
                        delta = dl_val[j]
                        break
                p_flow.append(f)
                p_hop.append(1)
                p_ttg.append(delta)
                p_birth.append(slot)

        n = len(p_flow)
        want = [False] * n

        # --- 2. decisions ------------------------------------------------
        if mode == MODE_DUAL:
            for i in range(n):
                f = p_flow[i]
                h = p_hop[i]
                s = p_ttg[i]
                if s >= L[f] + 1 - h:
                    out, rs[STREAM_POLICY] = pcg32_next(
                        rs[STREAM_POLICY], ri[STREAM_POLICY]
                    )
                    want[i] = out * INV32 < phi[phi_off[f] + (h - 1) * (dmax[f] + 1) + s]
        elif mode == MODE_GREEDY:
            for i in range(n):
                want[i] = p_ttg[i] >= L[p_flow[i]] + 1 - p_hop[i]
        elif mode == MODE_EDF:
            for i in range(n):
                want[i] = (
                    p_ttg[i] >= L[p_flow[i]] + 1 - p_hop[i]
                    if edf_filter
                    else p_hop[i] <= L[p_flow[i]]
                )

        if use_bucket:
            # earliest-deadline order within each node: stable sort on
            # time-to-go (storage order is already birth/flow/arrival order)
            order = sorted((i for i in range(n) if want[i]),
                           key=lambda i: p_ttg[i])
            grant = [0] * V
            for v in range(V):
                credit[v] = min(credit[v], 1.0) + budget[v]
                grant[v] = int(credit[v] // 1.0)
            taken = [0] * V
            for i in order:
                f = p_flow[i]
                v = hop_tail[route_off[f] + p_hop[i] - 1]
                if taken[v] < grant[v]:
                    taken[v] += 1
                else:
                    want[i] = False
            for v in range(V):
                credit[v] -= taken[v]

        # --- 3. channel --------------------------------------------------
        for i in range(n):
            if not want[i]:
                continue
            f = p_flow[i]
            hop_idx = route_off[f] + p_hop[i] - 1
            v = hop_tail[hop_idx]
            attempts[v] += 1
            if trace is not None:
                trace["attempts"][row, v] += 1
            out, rs[STREAM_CHANNEL] = pcg32_next(
                rs[STREAM_CHANNEL], ri[STREAM_CHANNEL]
            )
            if out * INV32 < hop_p[hop_idx]:
                p_hop[i] += 1

        # --- 4. decrement, deliver, drop ---------------------------------
        keep_flow = []
        keep_hop = []
        keep_ttg = []
        keep_birth = []
        for i in range(n):
            f = p_flow[i]
            if p_hop[i] == L[f] + 1:
                delivered[f] += 1
                if trace is not None:
                    trace["delivered"][row, f] += 1
                continue
            s = p_ttg[i] - 1
            if s < L[f] + 1 - p_hop[i]:
                dropped[f] += 1
                if trace is not None:
                    trace["dropped"][row, f] += 1
                continue
            keep_flow.append(f)
            keep_hop.append(p_hop[i])
            keep_ttg.append(s)
            keep_birth.append(p_birth[i])
        p_flow, p_hop, p_ttg, p_birth = keep_flow, keep_hop, keep_ttg, keep_birth
        slot += 1

    state.store_packets(p_flow, p_hop, p_ttg, p_birth)
    for i in range(4):
        state.rng[i, 0] = rs[i]
        state.rng[i, 1] = ri[i]
    for v in range(V):
        state.credit[v] = credit[v]
        state.attempts[v] = attempts[v]
    for f in range(F):
        state.arrivals[f] = arrivals[f]
        state.delivered[f] = delivered[f]
        state.dropped[f] = dropped[f]
    state.slot = slot
