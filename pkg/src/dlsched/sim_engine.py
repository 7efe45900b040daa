"""Slotted-time packet-level simulator.

The slot loop itself lives in a kernel: the compiled Cython extension
(``dlsched._speedups``) when it is importable, otherwise the pure-Python
reference (``dlsched._kernel_py``).  Both consume the same PCG32 substreams in
the same order, so trajectories are bit-identical across backends and across
chunked vs. single-shot runs.  Use ``backend=`` to force one side (the
benchmark does).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel_py
from ._kernel_py import MODE_DUAL, MODE_EDF, MODE_GREEDY, MODE_IDLE
from .net_model import ValidatedSpec, route_links
from .packet_dp import PolicyTable, PriceVector
from .policies import PolicyBundle
from .rng import N_STREAMS, stream_state

try:
    from . import _speedups

    HAVE_COMPILED_KERNEL = True
except ImportError:  # pure-Python fallback
    _speedups = None
    HAVE_COMPILED_KERNEL = False

_MODE_CODE = {"idle": MODE_IDLE, "dual": MODE_DUAL, "greedy": MODE_GREEDY,
              "edf": MODE_EDF}


@dataclass(frozen=True)
class PacketState:
    """One live packet: flow, current hop index (1..L+1), slots to deadline."""

    flow: int
    hop: int
    time_to_go: int
    birth_slot: int


@dataclass(frozen=True)
class SimMetrics:
    slots: int
    arrivals: np.ndarray  # per flow
    delivered: np.ndarray  # per flow
    dropped: np.ndarray  # per flow
    attempts: np.ndarray  # per node
    in_flight: int

    @property
    def throughput(self) -> np.ndarray:
        return self.delivered / self.slots

    @property
    def usage(self) -> np.ndarray:
        return self.attempts / self.slots

    def weighted_throughput(self, weights) -> float:
        return float(np.dot(np.asarray(weights), self.throughput))

    def to_dict(self) -> dict:
        return {
            "slots": self.slots,
            "arrivals": self.arrivals.tolist(),
            "delivered": self.delivered.tolist(),
            "dropped": self.dropped.tolist(),
            "attempts": self.attempts.tolist(),
            "in_flight": self.in_flight,
            "throughput": self.throughput.tolist(),
            "usage": self.usage.tolist(),
        }


@dataclass
class SlotEvents:
    """Per-slot counts emitted by step()."""

    slot: int
    arrivals: np.ndarray
    delivered: np.ndarray
    dropped: np.ndarray
    attempts: np.ndarray


class SimState:
    """Mutable simulator state shared with the kernels."""

    def __init__(self, num_flows: int, num_nodes: int, seed: int):
        self.n = 0
        cap = 64
        self.flow = np.zeros(cap, dtype=np.int64)
        self.hop = np.zeros(cap, dtype=np.int64)
        self.ttg = np.zeros(cap, dtype=np.int64)
        self.birth = np.zeros(cap, dtype=np.int64)
        self.rng = np.zeros((N_STREAMS, 2), dtype=np.uint64)
        for stream in range(N_STREAMS):
            self.rng[stream] = stream_state(seed, stream)
        self.credit = np.zeros(num_nodes)
        self.slot = 0
        self.arrivals = np.zeros(num_flows, dtype=np.int64)
        self.delivered = np.zeros(num_flows, dtype=np.int64)
        self.dropped = np.zeros(num_flows, dtype=np.int64)
        self.attempts = np.zeros(num_nodes, dtype=np.int64)

    def store_packets(self, flow, hop, ttg, birth) -> None:
        n = len(flow)
        if n > len(self.flow):
            cap = max(2 * len(self.flow), n)
            for name in ("flow", "hop", "ttg", "birth"):
                arr = np.zeros(cap, dtype=np.int64)
                setattr(self, name, arr)
        self.flow[:n] = flow
        self.hop[:n] = hop
        self.ttg[:n] = ttg
        self.birth[:n] = birth
        self.n = n

    def packets(self) -> list[PacketState]:
        return [
            PacketState(int(self.flow[i]), int(self.hop[i]), int(self.ttg[i]),
                        int(self.birth[i]))
            for i in range(self.n)
        ]


def compile_run(spec: ValidatedSpec, bundle: PolicyBundle) -> dict:
    """Flatten spec + bundle into the array form both kernels consume."""
    F, V = spec.num_flows, spec.num_nodes
    route_off = [0]
    hop_tail: list[int] = []
    hop_p: list[float] = []
    dl_off = [0]
    dl_val: list[int] = []
    dl_cum: list[float] = []
    dmax = []
    phi_off = [0]
    phi: list[float] = []
    arr_kind, arr_value, arr_batch, arr_expneg = [], [], [], []
    for f in spec.flows:
        route = route_links(spec, f.id)
        for _, tail, p in route:
            hop_tail.append(tail)
            hop_p.append(p)
        route_off.append(len(hop_tail))
        cum = 0.0
        for d, p in f.deadline.support:
            cum += p
            dl_val.append(d)
            dl_cum.append(cum)
        dl_off.append(len(dl_val))
        D = f.deadline.max_deadline
        dmax.append(D)
        if bundle.mode == "dual":
            table = bundle.tables[f.id]
            if table.num_hops != len(route) or table.max_deadline != D:
                raise ValueError(f"policy table for flow {f.id} does not match spec")
            phi.extend(table.phi[1 : len(route) + 1].reshape(-1).tolist())
        phi_off.append(len(phi))
        kind = {"deterministic": 0, "bernoulli": 1, "poisson": 2}[f.arrival.kind]
        arr_kind.append(kind)
        arr_value.append(f.arrival.value)
        arr_batch.append(int(f.arrival.value) if kind == 0 else 0)
        arr_expneg.append(math.exp(-f.arrival.value) if kind == 2 else 0.0)
    return {
        "F": F,
        "V": V,
        "mode": _MODE_CODE[bundle.mode],
        "hard_cap": 1 if bundle.hard_cap else 0,
        "edf_filter": 1 if bundle.edf_filter_infeasible else 0,
        "route_off": np.array(route_off, dtype=np.int64),
        "hop_tail": np.array(hop_tail, dtype=np.int64),
        "hop_p": np.array(hop_p, dtype=np.float64),
        "arr_kind": np.array(arr_kind, dtype=np.int64),
        "arr_value": np.array(arr_value, dtype=np.float64),
        "arr_batch": np.array(arr_batch, dtype=np.int64),
        "arr_expneg": np.array(arr_expneg, dtype=np.float64),
        "dl_off": np.array(dl_off, dtype=np.int64),
        "dl_val": np.array(dl_val, dtype=np.int64),
        "dl_cum": np.array(dl_cum, dtype=np.float64),
        "dmax": np.array(dmax, dtype=np.int64),
        "phi_off": np.array(phi_off, dtype=np.int64),
        "phi": np.array(phi, dtype=np.float64),
        "budget": np.array(spec.budgets(), dtype=np.float64),
    }


def _select_kernel(backend: str):
    if backend == "auto":
        return _speedups if HAVE_COMPILED_KERNEL else _kernel_py
    if backend == "compiled":
        if not HAVE_COMPILED_KERNEL:
            raise RuntimeError("compiled kernel requested but not built")
        return _speedups
    if backend == "python":
        return _kernel_py
    raise ValueError(f"unknown backend {backend!r}")


class Simulation:
    """A resumable simulation run (used directly by online price learning)."""

    def __init__(
        self,
        spec: ValidatedSpec,
        bundle: PolicyBundle,
        seed: int,
        backend: str = "auto",
        collect_trace: bool = False,
        trace_slots: int = 0,
    ):
        self.spec = spec
        self.bundle = bundle
        self.kernel = _select_kernel(backend)
        self.comp = compile_run(spec, bundle)
        self.state = SimState(spec.num_flows, spec.num_nodes, seed)
        self.trace = None
        if collect_trace:
            if trace_slots <= 0:
                raise ValueError("collect_trace needs trace_slots")
            self.trace = {
                "arrivals": np.zeros((trace_slots, spec.num_flows), dtype=np.int64),
                "delivered": np.zeros((trace_slots, spec.num_flows), dtype=np.int64),
                "dropped": np.zeros((trace_slots, spec.num_flows), dtype=np.int64),
                "attempts": np.zeros((trace_slots, spec.num_nodes), dtype=np.int64),
            }

    def set_prices(self, prices: PriceVector,
                   tables: dict[int, PolicyTable] | None = None) -> None:
        """Swap in new dual tables (re-solved unless given); packets in flight
        and all RNG streams are untouched."""
        from .price_learner import solve_tables  # local import to avoid a cycle

        if tables is None:
            tables = {f: pt for f, (_, pt) in solve_tables(self.spec, prices).items()}
        self.bundle = self.bundle.with_tables(tables, prices)
        self.comp = compile_run(self.spec, self.bundle)

    def run_chunk(self, nslots: int) -> None:
        self.kernel.run_slots(self.state, self.comp, nslots, self.trace,
                              self.state.slot)

    def step(self) -> SlotEvents:
        before = (
            self.state.arrivals.copy(),
            self.state.delivered.copy(),
            self.state.dropped.copy(),
            self.state.attempts.copy(),
        )
        slot = self.state.slot
        self.run_chunk(1)
        return SlotEvents(
            slot,
            self.state.arrivals - before[0],
            self.state.delivered - before[1],
            self.state.dropped - before[2],
            self.state.attempts - before[3],
        )

    def metrics(self) -> SimMetrics:
        if self.state.slot < 1:
            raise ValueError("no slots simulated yet")
        return SimMetrics(
            self.state.slot,
            self.state.arrivals.copy(),
            self.state.delivered.copy(),
            self.state.dropped.copy(),
            self.state.attempts.copy(),
            self.state.n,
        )


def run(
    spec: ValidatedSpec,
    bundle: PolicyBundle,
    slots: int,
    seed: int,
    backend: str = "auto",
    collect_trace: bool = False,
) -> tuple[SimMetrics, dict | None]:
    """Run T slots from a fresh state; deterministic given the seed."""
    if slots < 1:
        raise ValueError("slots must be >= 1")
    sim = Simulation(spec, bundle, seed, backend, collect_trace, slots)
    sim.run_chunk(slots)
    return sim.metrics(), sim.trace


def metrics_summary(m: SimMetrics, weights) -> dict:
    """Weighted throughput, per-node budget slack, and drop fractions."""
    if m.slots <= 0:
        raise ValueError("metrics cover zero slots")
    with np.errstate(invalid="ignore", divide="ignore"):
        drop_frac = np.where(m.arrivals > 0, m.dropped / m.arrivals, 0.0)
    return {
        "slots": m.slots,
        "weighted_throughput": m.weighted_throughput(weights),
        "throughput": m.throughput.tolist(),
        "usage": m.usage.tolist(),
        "drop_fraction": drop_frac.tolist(),
    }


@dataclass
class BudgetReport:
    node: int
    budget: float
    usage: float

    @property
    def slack(self) -> float:
        return self.budget - self.usage


def budget_report(spec: ValidatedSpec, m: SimMetrics) -> list[BudgetReport]:
    return [
        BudgetReport(v, spec.nodes[v].budget, float(m.usage[v]))
        for v in range(spec.num_nodes)
    ]
