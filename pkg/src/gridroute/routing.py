"""Least-cost routing with battery state carried on labels, plus the bi-level
planner that inserts a single charging stop chosen from candidate stations.

The search settles nodes by cumulative cost only (ties: fewer hops, then
lower node id) while propagating remaining energy along the settled tree.
That is exact for BEVs, whose edge costs are energy-independent whenever the
edge is feasible, and for PHEVs that stay in a single mode; blended PHEV
routes are well-defined but not guaranteed globally optimal.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ValidationError
from .powertrain import (
    ChargePolicy,
    EnergyPrices,
    EvAgent,
    MU_CD,
    PowertrainClass,
    energy_after,
    required_charge,
    segment_cost,
    usable_capacity,
)
from .stations import ChargingStation
from .transport import Segment, TransportNetwork

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class PathLabel:
    node: int
    cumulative_cost: float
    remaining_energy: float
    hops: int
    predecessor: Optional[int]


@dataclass(frozen=True)
class Route:
    nodes: Tuple[int, ...]
    total_cost: float
    arrival_energy: float


@dataclass(frozen=True)
class StationOption:
    station_id: int
    leg_to_station: Route
    leg_to_destination: Route
    charge_kwh: float
    charge_cost: float
    total_cost: float


@dataclass(frozen=True)
class TripPlan:
    plain_route: Optional[Route]
    options: Tuple[StationOption, ...]
    needs_charge: bool

    @property
    def feasible(self) -> bool:
        return self.plain_route is not None or bool(self.options)

    @property
    def best_option(self) -> Optional[StationOption]:
        return self.options[0] if self.options else None


def _pick_segment(
    net: TransportNetwork,
    ev_class: PowertrainClass,
    u: int,
    v: int,
    energy: float,
    prices: EnergyPrices,
    enforce_energy: bool,
) -> Optional[Segment]:
    """Cheapest feasible u->v segment at the given battery state."""
    best: Optional[Tuple[float, Segment]] = None
    for seg in net.outgoing(u):
        if seg.to_node != v:
            continue
        need = seg.distance_mi / MU_CD[(ev_class, seg.traffic.cycle)]
        feas_energy = energy
        if ev_class.is_bev and energy + FEAS_TOL < need:
            if enforce_energy:
                continue
            feas_energy = need  # relaxed mode costs the edge as if just charged
        cost = segment_cost(ev_class, feas_energy, seg, prices)
        if best is None or cost < best[0]:
            best = (cost, seg)
    return best[1] if best else None


def least_cost_path(
    net: TransportNetwork,
    ev_class: PowertrainClass,
    start: int,
    goal: int,
    start_energy: float,
    prices: EnergyPrices,
    enforce_energy: bool = True,
) -> Optional[Route]:
    """Label-setting search for the least-dollar path from start to goal.

    Returns None when the goal is unreachable, which for a BEV includes
    running out of charge on every candidate path. enforce_energy=False
    relaxes the BEV feasibility pruning (used to find anchor nodes for
    trips that cannot complete without charging).
    """
    net.node(start)
    net.node(goal)
    if start == goal:
        return Route((start,), 0.0, start_energy)

    # node -> (cost, hops, pred, energy); settled once, cheapest first
    labels: Dict[int, Tuple[float, int, Optional[int], float]] = {
        start: (0.0, 0, None, start_energy)
    }
    settled: set = set()
    heap: List[Tuple[float, int, int]] = [(0.0, 0, start)]
    while heap:
        cost, hops, node = heapq.heappop(heap)
        if node in settled:
            continue
        cur = labels.get(node)
        if cur is None or cost != cur[0] or hops != cur[1]:
            continue  # stale heap entry
        settled.add(node)
        if node == goal:
            break
        energy = cur[3]
        for seg in net.outgoing(node):
            if seg.to_node in settled:
                continue
            need = seg.distance_mi / MU_CD[(ev_class, seg.traffic.cycle)]
            feas_energy = energy
            if ev_class.is_bev:
                if enforce_energy and energy + FEAS_TOL < need:
                    continue
                if not enforce_energy and energy + FEAS_TOL < need:
                    feas_energy = need  # cost the edge as if charged just enough
            step = segment_cost(ev_class, feas_energy, seg, prices)
            cand = (cost + step, hops + 1, node, energy_after(feas_energy, seg, ev_class))
            prev = labels.get(seg.to_node)
            if prev is None or _label_better(cand, prev):
                labels[seg.to_node] = cand
                heapq.heappush(heap, (cand[0], cand[1], seg.to_node))

    if goal not in settled:
        return None
    cost, hops, _, energy = labels[goal]
    nodes: List[int] = [goal]
    while nodes[-1] != start:
        nodes.append(labels[nodes[-1]][2])
    nodes.reverse()
    return Route(tuple(nodes), cost, energy)


def _label_better(cand: Tuple[float, int, Optional[int], float], prev: Tuple[float, int, Optional[int], float]) -> bool:
    # Deterministic ordering: cost, then hops, then predecessor id.
    if cand[0] != prev[0]:
        return cand[0] < prev[0]
    if cand[1] != prev[1]:
        return cand[1] < prev[1]
    return (cand[2] if cand[2] is not None else -1) < (prev[2] if prev[2] is not None else -1)


def recompute_route(
    net: TransportNetwork,
    ev_class: PowertrainClass,
    nodes: Sequence[int],
    start_energy: float,
    prices: EnergyPrices,
) -> Tuple[float, float]:
    """Independent fold of segment costs and energies over a node sequence.

    Returns (total_cost, arrival_energy); used as a consistency oracle on
    everything the search emits.
    """
    cost = 0.0
    energy = start_energy
    for u, v in zip(nodes, nodes[1:]):
        seg = _pick_segment(net, ev_class, u, v, energy, prices, enforce_energy=True)
        if seg is None:
            raise ValidationError(f"route has no traversable segment {u}->{v}")
        cost += segment_cost(ev_class, energy, seg, prices)
        energy = energy_after(energy, seg, ev_class)
    return cost, energy


def route_electric_need(net: TransportNetwork, ev_class: PowertrainClass, nodes: Sequence[int]) -> float:
    """kWh to drive the node sequence entirely on battery."""
    total = 0.0
    for u, v in zip(nodes, nodes[1:]):
        best = None
        for seg in net.outgoing(u):
            if seg.to_node != v:
                continue
            need = seg.distance_mi / MU_CD[(ev_class, seg.traffic.cycle)]
            if best is None or need < best:
                best = need
        if best is None:
            raise ValidationError(f"route has no segment {u}->{v}")
        total += best
    return total


def depletion_node(
    net: TransportNetwork,
    route: Route,
    ev_class: PowertrainClass,
    start_energy: float,
    prices: EnergyPrices,
) -> Optional[int]:
    """First route node where the battery hits empty before the destination."""
    if start_energy <= FEAS_TOL:
        return route.nodes[0]
    energy = start_energy
    for u, v in zip(route.nodes, route.nodes[1:]):
        seg = _pick_segment(net, ev_class, u, v, energy, prices, enforce_energy=False)
        if seg is None:
            raise ValidationError(f"route has no segment {u}->{v}")
        energy = energy_after(energy, seg, ev_class)
        if energy <= FEAS_TOL and v != route.nodes[-1]:
            return v
    return None


def candidate_stations(
    net: TransportNetwork,
    anchor_nodes: Sequence[int],
    stations: Sequence[ChargingStation],
    n_candidates: int = 5,
    d_search: float = 100.0,
) -> List[ChargingStation]:
    """Expanding-radius station search around each anchor node.

    For every anchor the radius grows in steps of d_search meters until at
    least one station falls inside; the anchor then contributes every station
    within that radius. The union is ordered by anchor distance and truncated.
    """
    if n_candidates < 1:
        raise ValidationError("n_candidates must be at least 1")
    if d_search <= 0:
        raise ValidationError("d_search must be positive")
    if not stations:
        return []
    coords = {st.id: net.node(st.node) for st in stations}
    best_per_station: Dict[int, Tuple[float, ChargingStation]] = {}
    for anchor_id in anchor_nodes:
        anchor = net.node(anchor_id)
        nearest: Optional[Tuple[float, int, ChargingStation]] = None
        for st in stations:
            pos = coords[st.id]
            dist = math.hypot(pos.lon_m - anchor.lon_m, pos.lat_m - anchor.lat_m)
            if nearest is None or (dist, st.id) < (nearest[0], nearest[1]):
                nearest = (dist, st.id, st)
        dist, _, st = nearest
        # Smallest k with dist <= k*d_search; identical to stepping k upward.
        k = max(1, math.ceil(dist / d_search - 1e-12))
        radius = k * d_search
        inside = [
            (math.hypot(coords[s.id].lon_m - anchor.lon_m, coords[s.id].lat_m - anchor.lat_m), s.id, s)
            for s in stations
        ]
        for d0, _, chosen in inside:
            if d0 > radius + 1e-9:
                continue
            prev = best_per_station.get(chosen.id)
            if prev is None or d0 < prev[0]:
                best_per_station[chosen.id] = (d0, chosen)
    ranked = sorted(best_per_station.values(), key=lambda t: (t[0], t[1].id))
    return [st for _, st in ranked[:n_candidates]]


def plan_with_charging(
    net: TransportNetwork,
    ev: EvAgent,
    stations: Sequence[ChargingStation],
    prices: EnergyPrices,
    policy: ChargePolicy = ChargePolicy.FILL_TO_FULL,
    n_candidates: int = 5,
    d_search: float = 100.0,
) -> TripPlan:
    """Plan one trip, inserting at most one charging stop.

    Trips the battery can finish return the plain route plus ranked en-route
    station options; trips that cannot finish (BEV out of range) must take
    the best option. Stations must already carry an offered price.
    """
    e0 = ev.battery.energy_kwh
    plain = least_cost_path(net, ev.ev_class, ev.origin, ev.destination, e0, prices)
    needs_charge = plain is None

    # Anchor nodes: where a stop could be inserted. Feasible, non-depleting
    # trips may stop anywhere along the route; otherwise only before the
    # battery runs dry.
    if plain is not None:
        dep = depletion_node(net, plain, ev.ev_class, e0, prices)
        anchors = list(plain.nodes) if dep is None else _nodes_before(plain.nodes, dep)
    else:
        relaxed = least_cost_path(
            net, ev.ev_class, ev.origin, ev.destination, e0, prices, enforce_energy=False
        )
        if relaxed is None:
            return TripPlan(None, (), True)  # structurally unreachable
        dep = depletion_node(net, relaxed, ev.ev_class, e0, prices)
        anchors = list(relaxed.nodes) if dep is None else _nodes_before(relaxed.nodes, dep)
    if not anchors:
        anchors = [ev.origin]

    cands = candidate_stations(net, anchors, stations, n_candidates, d_search)
    capacity = ev.battery.capacity_kwh
    options: List[StationOption] = []
    for st in cands:
        if st.offered_price is None:
            raise ValidationError(f"station {st.id} has no offered price set")
        leg1 = least_cost_path(net, ev.ev_class, ev.origin, st.node, e0, prices)
        if leg1 is None:
            continue
        probe = least_cost_path(net, ev.ev_class, st.node, ev.destination, capacity, prices)
        if probe is None:
            continue
        need2 = route_electric_need(net, ev.ev_class, probe.nodes)
        at_station = dataclasses.replace(
            ev, battery=dataclasses.replace(ev.battery, energy_kwh=min(capacity, leg1.arrival_energy))
        )
        charge = required_charge(at_station, policy, need2)
        post = min(capacity, leg1.arrival_energy + charge)
        if abs(post - capacity) <= FEAS_TOL:
            leg2 = probe
        else:
            leg2 = least_cost_path(net, ev.ev_class, st.node, ev.destination, post, prices)
            if leg2 is None:
                continue
        if ev.ev_class.is_bev and post + FEAS_TOL < route_electric_need(net, ev.ev_class, leg2.nodes):
            continue  # policy bought too little for this leg
        charge_cost = charge * st.offered_price
        options.append(
            StationOption(
                station_id=st.id,
                leg_to_station=leg1,
                leg_to_destination=leg2,
                charge_kwh=charge,
                charge_cost=charge_cost,
                total_cost=leg1.total_cost + leg2.total_cost + charge_cost,
            )
        )
    options.sort(key=lambda o: (o.total_cost, o.station_id))
    return TripPlan(plain, tuple(options), needs_charge)


def _nodes_before(nodes: Sequence[int], stop: int) -> List[int]:
    out: List[int] = []
    for n in nodes:
        if n == stop:
            break
        out.append(n)
    return out
