import math

import pytest

from conftest import chain_network, diamond_network, station
from gridroute.errors import ValidationError
from gridroute.powertrain import (
    BatteryState,
    ChargePolicy,
    EnergyPrices,
    EvAgent,
    PowertrainClass,
    usable_capacity,
)
from gridroute.routing import (
    candidate_stations,
    depletion_node,
    least_cost_path,
    plan_with_charging,
    recompute_route,
    route_electric_need,
)
from gridroute.transport import NodeGeo, Segment, TrafficClass, TransportNetwork

PRICES = EnergyPrices(p_ele=0.05, p_gas=2.93)
BEV = PowertrainClass.BEV100


class TestLeastCostPath:
    def test_single_edge(self):
        net = chain_network([2.0])
        r = least_cost_path(net, BEV, 0, 1, start_energy=5.0, prices=PRICES)
        assert r.nodes == (0, 1)
        # 2 mi at 4.8 mi/kWh (BEV, low traffic) priced at the flat tariff
        assert r.total_cost == pytest.approx(0.05 * 2.0 / 4.8, abs=1e-12)
        assert r.arrival_energy == pytest.approx(5.0 - 2.0 / 4.8, abs=1e-12)

    def test_trivial_start_equals_goal(self):
        net = chain_network([2.0])
        r = least_cost_path(net, BEV, 0, 0, 1.0, PRICES)
        assert r.nodes == (0,)
        assert r.total_cost == 0.0

    def test_unknown_node_rejected(self):
        net = chain_network([2.0])
        with pytest.raises(ValidationError):
            least_cost_path(net, BEV, 0, 42, 1.0, PRICES)

    def test_heavy_traffic_reroutes(self):
        """Shorter branch in heavy traffic loses to a longer clear branch."""
        # short: 6 mi at 3.1 mi/kWh = 1.935 kWh; long: 8 mi at 4.8 = 1.667 kWh
        net = diamond_network(6.0, 8.0, TrafficClass.HEAVY, TrafficClass.LOW)
        r = least_cost_path(net, BEV, 0, 3, 10.0, PRICES)
        assert r.nodes == (0, 2, 3)
        assert r.total_cost == pytest.approx(0.05 * 8.0 / 4.8, abs=1e-12)

    def test_shorter_branch_wins_when_traffic_equal(self):
        net = diamond_network(6.0, 8.0, TrafficClass.LOW, TrafficClass.LOW)
        r = least_cost_path(net, BEV, 0, 3, 10.0, PRICES)
        assert r.nodes == (0, 1, 3)

    def test_bev_respects_energy(self):
        # direct edge needs 2 kWh, battery has 1: no alternative, infeasible
        net = chain_network([9.6])
        r = least_cost_path(net, BEV, 0, 1, 1.0, PRICES)
        assert r is None

    def test_relaxed_search_ignores_energy(self):
        net = chain_network([9.6])
        r = least_cost_path(net, BEV, 0, 1, 1.0, PRICES, enforce_energy=False)
        assert r is not None
        assert r.nodes == (0, 1)

    def test_phev_gas_fallback_keeps_going(self):
        net = chain_network([8.6])
        r = least_cost_path(net, PowertrainClass.PHEV20, 0, 1, 0.0, PRICES)
        assert r is not None
        assert r.arrival_energy == 0.0

    def test_cost_matches_independent_fold(self):
        net = diamond_network(5.0, 7.0, TrafficClass.NORMAL, TrafficClass.LOW)
        r = least_cost_path(net, PowertrainClass.PHEV40, 0, 3, 0.7, PRICES)
        cost, energy = recompute_route(net, PowertrainClass.PHEV40, r.nodes, 0.7, PRICES)
        assert r.total_cost == pytest.approx(cost, abs=1e-12)
        assert r.arrival_energy == pytest.approx(energy, abs=1e-12)


class TestDepletionNode:
    def test_absent_when_energy_suffices(self):
        net = chain_network([4.8, 4.8])
        r = least_cost_path(net, BEV, 0, 2, 10.0, PRICES)
        assert depletion_node(net, r, BEV, 10.0, PRICES) is None

    def test_origin_when_starting_empty(self):
        net = chain_network([5.7])
        r = least_cost_path(net, PowertrainClass.PHEV20, 0, 1, 0.0, PRICES)
        assert depletion_node(net, r, PowertrainClass.PHEV20, 0.0, PRICES) == 0

    def test_third_node_when_energy_covers_two_segments(self):
        # PHEV60 in low traffic runs 5.6 mi per kWh, so each segment costs 1 kWh
        net = chain_network([5.6, 5.6, 5.6])
        r = least_cost_path(net, PowertrainClass.PHEV60, 0, 3, 2.0, PRICES)
        assert depletion_node(net, r, PowertrainClass.PHEV60, 2.0, PRICES) == 2


class TestRouteElectricNeed:
    def test_sum_of_segment_needs(self):
        net = chain_network([4.8, 9.6])
        need = route_electric_need(net, BEV, (0, 1, 2))
        assert need == pytest.approx(3.0, abs=1e-12)


class TestCandidateStations:
    def _grid_net(self, station_offsets_m, d_search=100.0):
        """Anchor at node 0; stations on nodes placed at given distances."""
        nodes = [NodeGeo(0, 0.0, 0.0)]
        segs = []
        stations = []
        for i, off in enumerate(station_offsets_m, start=1):
            nodes.append(NodeGeo(i, off, 0.0))
            segs.append(Segment(0, i, TrafficClass.LOW, max(off, 1.0) * 6.2137e-4))
            segs.append(Segment(i, 0, TrafficClass.LOW, max(off, 1.0) * 6.2137e-4))
            stations.append(station(i, i))
        return TransportNetwork(nodes, segs, stations)

    def test_colocated_station_found_at_k1(self):
        nodes = [NodeGeo(0, 0.0, 0.0), NodeGeo(1, 50.0, 0.0)]
        segs = [Segment(0, 1, TrafficClass.LOW, 0.1), Segment(1, 0, TrafficClass.LOW, 0.1)]
        net = TransportNetwork(nodes, segs, [station(7, 0)])
        got = candidate_stations(net, [0], net.stations, n_candidates=5, d_search=100.0)
        assert [s.id for s in got] == [7]

    def test_250m_station_needs_k3(self):
        net = self._grid_net([250.0])
        got = candidate_stations(net, [0], net.stations, n_candidates=5, d_search=100.0)
        assert [s.id for s in got] == [1]
        # the same inequality rejects radius 2x100 and accepts 3x100
        assert 2 * 100.0 < 250.0 <= 3 * 100.0

    def test_truncates_to_n_candidates(self):
        net = self._grid_net([10.0 * i for i in range(1, 11)])
        got = candidate_stations(net, [0], net.stations, n_candidates=5, d_search=100.0)
        assert len(got) == 5

    def test_empty_station_list(self):
        net = chain_network([1.0])
        assert candidate_stations(net, [0], [], 5, 100.0) == []

    def test_ordered_by_distance(self):
        net = self._grid_net([300.0, 120.0, 40.0])
        got = candidate_stations(net, [0], net.stations, n_candidates=3, d_search=500.0)
        assert [s.id for s in got] == [3, 2, 1]


class TestPlanWithCharging:
    def _ev(self, cls, soc, origin=0, destination=None, net=None):
        cap = usable_capacity(cls)
        dest = destination if destination is not None else len(net.nodes) - 1
        return EvAgent(1, cls, BatteryState(cap, soc * cap), origin, dest)

    def test_full_phev_short_trip_keeps_plain_route(self):
        net = chain_network([1.0, 1.0], stations=[station(1, 1, price=0.05)])
        ev = self._ev(PowertrainClass.PHEV40, 1.0, net=net)
        plan = plan_with_charging(net, ev, net.stations, PRICES)
        assert plan.plain_route is not None
        assert not plan.needs_charge

    def test_cheaper_price_wins_identical_legs(self):
        """Two stations on mirror branches; only the offered price differs."""
        nodes = [
            NodeGeo(0, 0.0, 0.0),
            NodeGeo(1, 1000.0, 800.0),
            NodeGeo(2, 1000.0, -800.0),
            NodeGeo(3, 2000.0, 0.0),
        ]
        segs = []
        for a, b in [(0, 1), (1, 3), (0, 2), (2, 3)]:
            segs.append(Segment(a, b, TrafficClass.LOW, 10.0))
            segs.append(Segment(b, a, TrafficClass.LOW, 10.0))
        stations = [station(1, 1, price=0.055), station(2, 2, price=0.050)]
        net = TransportNetwork(nodes, segs, stations)
        ev = self._ev(BEV, 0.5, destination=3, net=net)
        plan = plan_with_charging(
            net, ev, stations, PRICES, policy=ChargePolicy.FILL_TO_FULL, d_search=3000.0
        )
        assert plan.best_option is not None
        assert plan.best_option.station_id == 2

    def test_stranded_bev_is_infeasible(self):
        # 9.6 mi needs 2 kWh; battery 1 kWh, station unreachable past the gap
        net = chain_network([9.6, 1.0], stations=[station(1, 2, price=0.05)])
        ev = self._ev(BEV, 1.0 / usable_capacity(BEV), destination=2, net=net)
        plan = plan_with_charging(net, ev, net.stations, PRICES, d_search=50000.0)
        assert not plan.feasible

    def test_option_totals_are_consistent(self):
        net = chain_network([2.0, 2.0, 2.0], stations=[station(1, 1), station(2, 2)])
        for st in net.stations:
            st.offered_price = 0.06
        cap = usable_capacity(BEV)
        ev = EvAgent(1, BEV, BatteryState(cap, 0.4 * cap), 0, 3)
        plan = plan_with_charging(net, ev, net.stations, PRICES, d_search=5000.0)
        for opt in plan.options:
            travel = opt.leg_to_station.total_cost + opt.leg_to_destination.total_cost
            assert opt.total_cost == pytest.approx(travel + opt.charge_cost, abs=1e-9)
            assert opt.charge_cost == pytest.approx(opt.charge_kwh * 0.06, abs=1e-12)
            assert opt.leg_to_station.nodes[-1] == net.station_by_id(opt.station_id).node
            assert opt.leg_to_destination.nodes[0] == opt.leg_to_station.nodes[-1]

    def test_unpriced_station_rejected(self):
        net = chain_network([2.0, 2.0], stations=[station(1, 1)])
        cap = usable_capacity(BEV)
        ev = EvAgent(1, BEV, BatteryState(cap, 0.1 * cap), 0, 2)
        with pytest.raises(ValidationError):
            plan_with_charging(net, ev, net.stations, PRICES, d_search=5000.0)
