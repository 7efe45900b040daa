"""Static network description: nodes, links, flows, and validation.

The network is a directed graph with per-link success probabilities.  Each
flow has a fixed route (an ordered chain of links), a nonnegative weight, an
arrival process, and a distribution of relative deadlines.  Each node has a
budget on its time-average number of transmission attempts per slot.

Everything here is immutable once validated; a ``ValidatedSpec`` can be
shared freely across concurrent simulation runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

PROB_TOL = 1e-12


class SpecError(ValueError):
    """Raised by validate_spec; carries the full list of violations."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid network spec:\n  " + "\n  ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class NodeSpec:
    id: int
    budget: float  # max average transmission attempts per slot, > 0
    name: str = ""


@dataclass(frozen=True)
class LinkSpec:
    id: int
    tail: int  # transmitting node (the node that is charged for attempts)
    head: int
    reliability: float  # per-attempt success probability


@dataclass(frozen=True)
class DeadlineDistribution:
    """Distribution of relative deadlines (in slots) for one flow's packets."""

    support: tuple[tuple[int, float], ...]  # (deadline, probability) pairs
    max_deadline: int = 0  # 0 means "derive from support"

    def __post_init__(self):
        if self.max_deadline == 0 and self.support:
            object.__setattr__(
                self, "max_deadline", max(d for d, _ in self.support)
            )

    @property
    def mean(self) -> float:
        return sum(d * p for d, p in self.support)


@dataclass(frozen=True)
class ArrivalProcess:
    """I.i.d.-across-slots arrivals: deterministic batch, Bernoulli, or Poisson."""

    kind: str  # "deterministic" | "bernoulli" | "poisson"
    value: float  # batch size / success probability / rate

    KINDS = ("deterministic", "bernoulli", "poisson")

    @property
    def mean_rate(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class FlowSpec:
    id: int
    route: tuple[int, ...]  # ordered link ids, source to destination
    weight: float  # throughput weight, >= 0
    arrival: ArrivalProcess
    deadline: DeadlineDistribution
    name: str = ""


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    flows: tuple[FlowSpec, ...]


@dataclass(frozen=True)
class ValidatedSpec:
    """NetworkSpec plus derived indices, produced only by validate_spec."""

    network: NetworkSpec
    out_links: tuple[tuple[int, ...], ...] = field(repr=False)  # per node
    hop_counts: tuple[int, ...] = field(repr=False)  # per flow

    @property
    def nodes(self) -> tuple[NodeSpec, ...]:
        return self.network.nodes

    @property
    def links(self) -> tuple[LinkSpec, ...]:
        return self.network.links

    @property
    def flows(self) -> tuple[FlowSpec, ...]:
        return self.network.flows

    @property
    def num_nodes(self) -> int:
        return len(self.network.nodes)

    @property
    def num_flows(self) -> int:
        return len(self.network.flows)

    def budgets(self) -> list[float]:
        return [n.budget for n in self.nodes]

    def with_budget(self, node: int, budget: float) -> "ValidatedSpec":
        """Copy of this spec with one node budget replaced (for sweeps)."""
        nodes = tuple(
            NodeSpec(n.id, budget if n.id == node else n.budget, n.name)
            for n in self.nodes
        )
        return validate_spec(NetworkSpec(nodes, self.links, self.flows))


def _check_ids(entities: Iterable, label: str, violations: list[str]) -> None:
    ids = [e.id for e in entities]
    if sorted(ids) != list(range(len(ids))):
        violations.append(f"{label} ids must be dense 0..{len(ids) - 1}, got {ids}")


def spec_violations(spec: NetworkSpec) -> list[str]:
    """All invariant violations of the raw spec (empty list means valid)."""
    v: list[str] = []
    _check_ids(spec.nodes, "node", v)
    _check_ids(spec.links, "link", v)
    _check_ids(spec.flows, "flow", v)
    if v:
        return v  # id-based checks below assume dense ids

    node_ids = {n.id for n in spec.nodes}
    for n in spec.nodes:
        if not (n.budget > 0 and math.isfinite(n.budget)):
            v.append(f"node {n.id}: budget must be positive, got {n.budget}")
    for l in spec.links:
        if l.tail == l.head:
            v.append(f"link {l.id}: tail equals head ({l.tail})")
        for end in (l.tail, l.head):
            if end not in node_ids:
                v.append(f"link {l.id}: undeclared node {end}")
        if not (0.0 <= l.reliability <= 1.0):
            v.append(f"link {l.id}: reliability {l.reliability} not in [0,1]")

    link_by_id = {l.id: l for l in spec.links}
    if not spec.flows:
        v.append("network has no flows")
    for f in spec.flows:
        if not f.route:
            v.append(f"flow {f.id}: route is empty")
            continue
        missing = [lid for lid in f.route if lid not in link_by_id]
        if missing:
            v.append(f"flow {f.id}: route references unknown links {missing}")
            continue
        hops = [link_by_id[lid] for lid in f.route]
        for a, b in zip(hops, hops[1:]):
            if a.head != b.tail:
                v.append(
                    f"flow {f.id}: route discontinuity between links {a.id} and {b.id}"
                )
        visited = [h.tail for h in hops] + [hops[-1].head]
        if len(set(visited)) != len(visited):
            v.append(f"flow {f.id}: route revisits a node ({visited})")
        if f.weight < 0:
            v.append(f"flow {f.id}: weight must be nonnegative, got {f.weight}")
        _check_arrival(f, v)
        _check_deadline(f, v)
    return v


def _check_arrival(f: FlowSpec, v: list[str]) -> None:
    a = f.arrival
    if a.kind not in ArrivalProcess.KINDS:
        v.append(f"flow {f.id}: unknown arrival kind {a.kind!r}")
        return
    if not (a.value > 0 and math.isfinite(a.value)):
        v.append(f"flow {f.id}: arrival value must be positive and finite")
    if a.kind == "deterministic" and a.value != int(a.value):
        v.append(f"flow {f.id}: deterministic batch size must be an integer")
    if a.kind == "bernoulli" and not (0 < a.value <= 1):
        v.append(f"flow {f.id}: bernoulli arrival probability not in (0,1]")


def _check_deadline(f: FlowSpec, v: list[str]) -> None:
    d = f.deadline
    if not d.support:
        v.append(f"flow {f.id}: deadline distribution has empty support")
        return
    total = sum(p for _, p in d.support)
    if abs(total - 1.0) > PROB_TOL:
        v.append(f"flow {f.id}: deadline probabilities sum to {total}, not 1")
    for delta, p in d.support:
        if delta < 1 or delta != int(delta):
            v.append(f"flow {f.id}: deadline {delta} must be an integer >= 1")
        if delta > d.max_deadline:
            v.append(f"flow {f.id}: deadline {delta} exceeds bound {d.max_deadline}")
        if p < 0:
            v.append(f"flow {f.id}: negative deadline probability {p}")
    if not (d.max_deadline >= 1 and math.isfinite(d.max_deadline)):
        v.append(f"flow {f.id}: deadline bound must be finite and >= 1")


def validate_spec(spec: NetworkSpec | ValidatedSpec) -> ValidatedSpec:
    """Validate and index a spec.  Idempotent: a ValidatedSpec passes through."""
    if isinstance(spec, ValidatedSpec):
        return spec
    violations = spec_violations(spec)
    if violations:
        raise SpecError(violations)
    out: list[list[int]] = [[] for _ in spec.nodes]
    for l in spec.links:
        out[l.tail].append(l.id)
    hop_counts = tuple(len(f.route) for f in spec.flows)
    return ValidatedSpec(spec, tuple(tuple(o) for o in out), hop_counts)


def tail_node(spec: ValidatedSpec, link: int) -> int:
    """The transmitting node of a link (the node charged for its use)."""
    if not 0 <= link < len(spec.links):
        raise KeyError(f"unknown link id {link}")
    return spec.links[link].tail


def route_links(spec: ValidatedSpec, flow: int) -> list[tuple[int, int, float]]:
    """Hop-indexed view of a flow's route: (link id, tail node, reliability)."""
    if not 0 <= flow < len(spec.flows):
        raise KeyError(f"unknown flow id {flow}")
    return [
        (lid, spec.links[lid].tail, spec.links[lid].reliability)
        for lid in spec.flows[flow].route
    ]


# ---------------------------------------------------------------------------
# JSON round-trip.  Schema (all keys required unless noted):
#   {"nodes":  [{"id": int, "budget": float, "name": str (optional)}],
#    "links":  [{"id": int, "tail": int, "head": int, "reliability": float}],
#    "flows":  [{"id": int, "route": [link ids], "weight": float,
#                "arrival": {"kind": "deterministic"|"bernoulli"|"poisson",
#                            "value": number},
#                "deadline": {"support": [[deadline, prob], ...],
#                             "max_deadline": int (optional)},
#                "name": str (optional)}]}
# ---------------------------------------------------------------------------


def _reject_unknown(doc: dict, allowed: set[str], path: str) -> None:
    extra = set(doc) - allowed
    if extra:
        raise SpecError([f"{path}: unknown keys {sorted(extra)}"])


def network_from_dict(doc: dict) -> NetworkSpec:
    _reject_unknown(doc, {"nodes", "links", "flows"}, "network")
    nodes = []
    for nd in doc.get("nodes", []):
        _reject_unknown(nd, {"id", "budget", "name"}, f"nodes[{nd.get('id')}]")
        nodes.append(NodeSpec(int(nd["id"]), float(nd["budget"]), nd.get("name", "")))
    links = []
    for ld in doc.get("links", []):
        _reject_unknown(
            ld, {"id", "tail", "head", "reliability"}, f"links[{ld.get('id')}]"
        )
        links.append(
            LinkSpec(int(ld["id"]), int(ld["tail"]), int(ld["head"]),
                     float(ld["reliability"]))
        )
    flows = []
    for fd in doc.get("flows", []):
        _reject_unknown(
            fd,
            {"id", "route", "weight", "arrival", "deadline", "name"},
            f"flows[{fd.get('id')}]",
        )
        ad = fd["arrival"]
        _reject_unknown(ad, {"kind", "value"}, f"flows[{fd.get('id')}].arrival")
        dd = fd["deadline"]
        _reject_unknown(
            dd, {"support", "max_deadline"}, f"flows[{fd.get('id')}].deadline"
        )
        flows.append(
            FlowSpec(
                int(fd["id"]),
                tuple(int(x) for x in fd["route"]),
                float(fd["weight"]),
                ArrivalProcess(ad["kind"], float(ad["value"])),
                DeadlineDistribution(
                    tuple((int(d), float(p)) for d, p in dd["support"]),
                    int(dd.get("max_deadline", 0)),
                ),
                fd.get("name", ""),
            )
        )
    return NetworkSpec(tuple(nodes), tuple(links), tuple(flows))


def network_to_dict(spec: NetworkSpec | ValidatedSpec) -> dict:
    if isinstance(spec, ValidatedSpec):
        spec = spec.network
    return {
        "nodes": [
            {"id": n.id, "budget": n.budget, **({"name": n.name} if n.name else {})}
            for n in spec.nodes
        ],
        "links": [
            {"id": l.id, "tail": l.tail, "head": l.head, "reliability": l.reliability}
            for l in spec.links
        ],
        "flows": [
            {
                "id": f.id,
                "route": list(f.route),
                "weight": f.weight,
                "arrival": {"kind": f.arrival.kind, "value": f.arrival.value},
                "deadline": {
                    "support": [[d, p] for d, p in f.deadline.support],
                    "max_deadline": f.deadline.max_deadline,
                },
                **({"name": f.name} if f.name else {}),
            }
            for f in spec.flows
        ],
    }


def load_network(path: str) -> ValidatedSpec:
    with open(path) as fh:
        return validate_spec(network_from_dict(json.load(fh)))


def dump_network(spec: NetworkSpec | ValidatedSpec, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
