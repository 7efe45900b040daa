# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot-loop kernel.

Must stay operation-for-operation identical to ``dlsched._kernel_py`` (same
PCG32 streams, same draw order, same IEEE double arithmetic): the test suite
asserts bit-identical trajectories between the two backends.
"""

from libc.math cimport floor

import numpy as np

ctypedef unsigned long long u64
ctypedef unsigned int u32

cdef double INV32 = 1.0 / 4294967296.0
cdef u64 PCG_MULT = 6364136223846793005UL

DEF MODE_IDLE = 0
DEF MODE_DUAL = 1
DEF MODE_GREEDY = 2
DEF MODE_EDF = 3

DEF S_ARRIVALS = 0
DEF S_DEADLINES = 1
DEF S_CHANNEL = 2
DEF S_POLICY = 3


cdef inline u32 pcg32_next(u64 *state, u64 inc) noexcept nogil:
    cdef u64 x = state[0]
    state[0] = x * PCG_MULT + inc
    cdef u32 xorshifted = <u32>(((x >> 18) ^ x) >> 27)
    cdef u32 rot = <u32>(x >> 59)
    return (xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))


def run_slots(state, comp, long nslots, trace=None, long trace_base=0):
    """Advance the simulation by nslots, mutating state in place."""
    cdef long F = comp["F"]
    cdef long V = comp["V"]
    cdef int mode = comp["mode"]
    cdef int hard_cap = comp["hard_cap"]
    cdef int edf_filter = comp["edf_filter"]
    cdef long[::1] route_off = comp["route_off"]
    cdef long[::1] hop_tail = comp["hop_tail"]
    cdef double[::1] hop_p = comp["hop_p"]
    cdef long[::1] arr_kind = comp["arr_kind"]
    cdef double[::1] arr_value = comp["arr_value"]
    cdef long[::1] arr_batch = comp["arr_batch"]
    cdef double[::1] arr_expneg = comp["arr_expneg"]
    cdef long[::1] dl_off = comp["dl_off"]
    cdef long[::1] dl_val = comp["dl_val"]
    cdef double[::1] dl_cum = comp["dl_cum"]
    cdef long[::1] dmax = comp["dmax"]
    cdef long[::1] phi_off = comp["phi_off"]
    cdef double[::1] phi = comp["phi"]
    cdef double[::1] budget = comp["budget"]

    cdef long[::1] p_flow = state.flow
    cdef long[::1] p_hop = state.hop
    cdef long[::1] p_ttg = state.ttg
    cdef long[::1] p_birth = state.birth
    cdef long n = state.n
    cdef long cap = state.flow.shape[0]

    cdef u64[:, ::1] rng = state.rng
    cdef u64 rs[4]
    cdef u64 ri[4]
    cdef int k
    for k in range(4):
        rs[k] = rng[k, 0]
        ri[k] = rng[k, 1]

    cdef double[::1] credit = state.credit
    cdef long[::1] arrivals = state.arrivals
    cdef long[::1] delivered = state.delivered
    cdef long[::1] dropped = state.dropped
    cdef long[::1] attempts = state.attempts
    cdef long slot = state.slot

    cdef bint use_bucket = mode == MODE_EDF or hard_cap

    cdef bint do_trace = trace is not None
    cdef long[:, ::1] tr_arrivals = trace["arrivals"] if do_trace else None
    cdef long[:, ::1] tr_delivered = trace["delivered"] if do_trace else None
    cdef long[:, ::1] tr_dropped = trace["dropped"] if do_trace else None
    cdef long[:, ::1] tr_attempts = trace["attempts"] if do_trace else None

    # per-flow hop counts
    L_arr = np.empty(F, dtype=np.int64)
    cdef long[::1] L = L_arr
    cdef long f
    for f in range(F):
        L[f] = route_off[f + 1] - route_off[f]

    cdef long dmax_all = 0
    for f in range(F):
        if dmax[f] > dmax_all:
            dmax_all = dmax[f]
    cdef long W = dmax_all + 1

    # scratch buffers
    counts_arr = np.zeros(F, dtype=np.int64)
    cdef long[::1] counts = counts_arr
    want_arr = np.zeros(cap, dtype=np.int8)
    cdef signed char[::1] want = want_arr
    grant_arr = np.zeros(V, dtype=np.int64)
    cdef long[::1] grant = grant_arr
    taken_arr = np.zeros(V, dtype=np.int64)
    cdef long[::1] taken = taken_arr
    cnt_arr = np.zeros(V * W, dtype=np.int64)
    cdef long[::1] cnt = cnt_arr
    prefix_arr = np.zeros(V * W, dtype=np.int64)
    cdef long[::1] prefix = prefix_arr
    seen_arr = np.zeros(V * W, dtype=np.int64)
    cdef long[::1] seen = seen_arr

    cdef long t, row, i, j, v, s, h, hop_idx, delta, total_new, w, c, acc, prev
    cdef u32 out
    cdef double u, p

    for t in range(nslots):
        row = trace_base + t

        # --- 1. arrivals -------------------------------------------------
        total_new = 0
        for f in range(F):
            if arr_kind[f] == 0:
                c = arr_batch[f]
            elif arr_kind[f] == 1:
                out = pcg32_next(&rs[S_ARRIVALS], ri[S_ARRIVALS])
                c = 1 if out * INV32 < arr_value[f] else 0
            else:
                c = 0
                p = 1.0
                while True:
                    out = pcg32_next(&rs[S_ARRIVALS], ri[S_ARRIVALS])
                    p *= out * INV32
                    if p <= arr_expneg[f]:
                        break
                    c += 1
            counts[f] = c
            total_new += c
            arrivals[f] += c
            if do_trace:
                tr_arrivals[row, f] += c

        if n + total_new > cap:
            cap = max(2 * cap, n + total_new)
            state.flow = np.resize(np.asarray(p_flow), cap)
            state.hop = np.resize(np.asarray(p_hop), cap)
            state.ttg = np.resize(np.asarray(p_ttg), cap)
            state.birth = np.resize(np.asarray(p_birth), cap)
            p_flow = state.flow
            p_hop = state.hop
            p_ttg = state.ttg
            p_birth = state.birth
            want_arr = np.zeros(cap, dtype=np.int8)
            want = want_arr

        for f in range(F):
            for i in range(counts[f]):
                out = pcg32_next(&rs[S_DEADLINES], ri[S_DEADLINES])
                u = out * INV32
                delta = dl_val[dl_off[f + 1] - 1]
                for j in range(dl_off[f], dl_off[f + 1]):
                    if u < dl_cum[j]:
                        delta = dl_val[j]
                        break
                p_flow[n] = f
                p_hop[n] = 1
                p_ttg[n] = delta
                p_birth[n] = slot
                n += 1

        # --- 2. decisions ------------------------------------------------
        if mode == MODE_DUAL:
            for i in range(n):
                f = p_flow[i]
                h = p_hop[i]
                s = p_ttg[i]
                if s >= L[f] + 1 - h:
                    out = pcg32_next(&rs[S_POLICY], ri[S_POLICY])
                    want[i] = out * INV32 < phi[phi_off[f] + (h - 1) * (dmax[f] + 1) + s]
                else:
                    want[i] = 0
        elif mode == MODE_GREEDY:
            for i in range(n):
                want[i] = p_ttg[i] >= L[p_flow[i]] + 1 - p_hop[i]
        elif mode == MODE_EDF:
            for i in range(n):
                if edf_filter:
                    want[i] = p_ttg[i] >= L[p_flow[i]] + 1 - p_hop[i]
                else:
                    want[i] = p_hop[i] <= L[p_flow[i]]
        else:
            for i in range(n):
                want[i] = 0

        if use_bucket:
            for v in range(V):
                if credit[v] > 1.0:
                    credit[v] = 1.0
                credit[v] += budget[v]
                grant[v] = <long>floor(credit[v])
                taken[v] = 0
            # earliest-deadline order per node via counting by time-to-go
            for j in range(V * W):
                cnt[j] = 0
                seen[j] = 0
            for i in range(n):
                if want[i]:
                    f = p_flow[i]
                    v = hop_tail[route_off[f] + p_hop[i] - 1]
                    cnt[v * W + p_ttg[i]] += 1
            for v in range(V):
                acc = 0
                for s in range(W):
                    prev = cnt[v * W + s]
                    prefix[v * W + s] = acc
                    acc += prev
            for i in range(n):
                if want[i]:
                    f = p_flow[i]
                    v = hop_tail[route_off[f] + p_hop[i] - 1]
                    j = v * W + p_ttg[i]
                    if prefix[j] + seen[j] < grant[v]:
                        seen[j] += 1
                        taken[v] += 1
                    else:
                        seen[j] += 1
                        want[i] = 0
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
            if do_trace:
                tr_attempts[row, v] += 1
            out = pcg32_next(&rs[S_CHANNEL], ri[S_CHANNEL])
            if out * INV32 < hop_p[hop_idx]:
                p_hop[i] += 1

        # --- 4. decrement, deliver, drop ---------------------------------
        w = 0
        for i in range(n):
            f = p_flow[i]
            if p_hop[i] == L[f] + 1:
                delivered[f] += 1
                if do_trace:
                    tr_delivered[row, f] += 1
                continue
            s = p_ttg[i] - 1
            if s < L[f] + 1 - p_hop[i]:
                dropped[f] += 1
                if do_trace:
                    tr_dropped[row, f] += 1
                continue
            p_flow[w] = f
            p_hop[w] = p_hop[i]
            p_ttg[w] = s
            p_birth[w] = p_birth[i]
            w += 1
        n = w
        slot += 1

    for k in range(4):
        rng[k, 0] = rs[k]
        rng[k, 1] = ri[k]
    state.n = n
    state.slot = slot
