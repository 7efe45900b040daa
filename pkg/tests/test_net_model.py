import json

import pytest

from dlsched.net_model import (
    ArrivalProcess,
    DeadlineDistribution,
    FlowSpec,
    LinkSpec,
    NetworkSpec,
    NodeSpec,
    SpecError,
    network_from_dict,
    network_to_dict,
    route_links,
    spec_violations,
    tail_node,
    validate_spec,
)


def tiny_network(budget=1.0, reliability=0.5, tail=0, head=1):
    nodes = (NodeSpec(0, budget), NodeSpec(1, 100.0))
    links = (LinkSpec(0, tail, head, reliability),)
    flows = (
        FlowSpec(
            0,
            (0,),
            1.0,
            ArrivalProcess("deterministic", 1.0),
            DeadlineDistribution(((2, 1.0),)),
        ),
    )
    return NetworkSpec(nodes, links, flows)


class TestRelay3:
    def test_valid_and_hop_counts(self, relay3):
        assert relay3.hop_counts == (3, 2, 2)
        assert relay3.num_nodes == 8
        assert relay3.num_flows == 3
        assert len(relay3.links) == 7

    def test_tail_nodes(self, relay3):
        # first relay link leaves node 0; the third hop of flow 0 leaves node 2
        assert tail_node(relay3, 0) == 0
        assert tail_node(relay3, 2) == 2

    def test_route_links_flow0(self, relay3):
        assert route_links(relay3, 0) == [(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]

    def test_route_links_flow1_second_hop_unreliable(self, relay3):
        hops = route_links(relay3, 1)
        assert len(hops) == 2
        assert hops[1][2] == 0.5
        assert hops[1][1] == 0  # the unreliable link leaves the shared node

    def test_route_length_matches_hop_count(self, relay3):
        for f in relay3.flows:
            assert len(route_links(relay3, f.id)) == relay3.hop_counts[f.id]

    def test_budgets(self, relay3):
        assert relay3.budgets() == [100.0] * 8

    def test_with_budget(self, relay3):
        swept = relay3.with_budget(0, 25.0)
        assert swept.budgets()[0] == 25.0
        assert swept.budgets()[1:] == [100.0] * 7
        assert relay3.budgets()[0] == 100.0  # original untouched


class TestValidation:
    def test_idempotent(self, relay3):
        assert validate_spec(relay3) is relay3

    def test_tiny_network_valid(self):
        spec = validate_spec(tiny_network())
        assert spec.hop_counts == (1,)
        assert spec.out_links == ((0,), ())

    def test_zero_budget_rejected(self):
        with pytest.raises(SpecError, match="budget must be positive"):
            validate_spec(tiny_network(budget=0.0))

    def test_route_discontinuity(self):
        nodes = tuple(NodeSpec(i, 1.0) for i in range(4))
        links = (LinkSpec(0, 0, 1, 1.0), LinkSpec(1, 2, 3, 1.0))
        flows = (
            FlowSpec(
                0,
                (0, 1),
                1.0,
                ArrivalProcess("deterministic", 1.0),
                DeadlineDistribution(((3, 1.0),)),
            ),
        )
        with pytest.raises(SpecError, match="route discontinuity"):
            validate_spec(NetworkSpec(nodes, links, flows))

    def test_self_loop_link(self):
        v = spec_violations(tiny_network(tail=0, head=0))
        assert any("tail equals head" in msg for msg in v)

    def test_reliability_out_of_range(self):
        v = spec_violations(tiny_network(reliability=1.5))
        assert any("reliability" in msg for msg in v)

    def test_no_flows(self):
        base = tiny_network()
        v = spec_violations(NetworkSpec(base.nodes, base.links, ()))
        assert any("no flows" in msg for msg in v)

    def test_route_cycle_rejected(self):
        nodes = tuple(NodeSpec(i, 1.0) for i in range(2))
        links = (LinkSpec(0, 0, 1, 1.0), LinkSpec(1, 1, 0, 1.0))
        flows = (
            FlowSpec(
                0,
                (0, 1),
                1.0,
                ArrivalProcess("deterministic", 1.0),
                DeadlineDistribution(((3, 1.0),)),
            ),
        )
        v = spec_violations(NetworkSpec(nodes, links, flows))
        assert any("revisits" in msg for msg in v)

    def test_deadline_probabilities_must_sum_to_one(self):
        base = tiny_network()
        bad = FlowSpec(
            0,
            (0,),
            1.0,
            ArrivalProcess("deterministic", 1.0),
            DeadlineDistribution(((1, 0.5), (2, 0.4))),
        )
        v = spec_violations(NetworkSpec(base.nodes, base.links, (bad,)))
        assert any("sum to" in msg for msg in v)

    def test_sparse_ids_rejected(self):
        nodes = (NodeSpec(0, 1.0), NodeSpec(2, 1.0))
        base = tiny_network()
        v = spec_violations(NetworkSpec(nodes, base.links, base.flows))
        assert any("dense" in msg for msg in v)

    def test_unknown_arrival_kind(self):
        base = tiny_network()
        bad = FlowSpec(
            0,
            (0,),
            1.0,
            ArrivalProcess("uniform", 1.0),
            DeadlineDistribution(((2, 1.0),)),
        )
        v = spec_violations(NetworkSpec(base.nodes, base.links, (bad,)))
        assert any("arrival kind" in msg for msg in v)

    def test_violations_report_all_at_once(self):
        spec = tiny_network(budget=0.0, reliability=2.0)
        v = spec_violations(spec)
        assert len(v) >= 2

    def test_unknown_link_and_flow_errors(self, relay3):
        with pytest.raises(KeyError):
            tail_node(relay3, 99)
        with pytest.raises(KeyError):
            route_links(relay3, 99)


class TestJsonRoundTrip:
    def test_round_trip_identity(self, relay3):
        doc = network_to_dict(relay3)
        again = network_from_dict(doc)
        assert again == relay3.network
        assert network_to_dict(again) == doc

    def test_json_serializable(self, relay3):
        text = json.dumps(network_to_dict(relay3))
        assert network_from_dict(json.loads(text)) == relay3.network

    def test_unknown_top_level_key(self):
        with pytest.raises(SpecError, match="network: unknown keys"):
            network_from_dict({"nodes": [], "links": [], "flows": [], "title": "x"})

    def test_unknown_nested_key_has_path(self, relay3):
        doc = network_to_dict(relay3)
        doc["flows"][1]["arrival"]["burst"] = 2
        with pytest.raises(SpecError, match=r"flows\[1\].arrival"):
            network_from_dict(doc)

    def test_max_deadline_derived_from_support(self):
        d = DeadlineDistribution(((2, 0.25), (5, 0.75)))
        assert d.max_deadline == 5
        assert d.mean == pytest.approx(4.25)

    def test_arrival_mean_rate(self):
        assert ArrivalProcess("deterministic", 50.0).mean_rate == 50.0
        assert ArrivalProcess("bernoulli", 0.3).mean_rate == 0.3
        assert ArrivalProcess("poisson", 2.5).mean_rate == 2.5
