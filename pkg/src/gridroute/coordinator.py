"""Closed-loop scenario driver: price snapshot -> per-EV routing -> regional
admission -> DC-OPF -> new prices, iterated to a fixed point.

Scenario I holds every station at one flat tariff and runs a single pass;
Scenario II reprices stations from bus LMPs each iteration. Travel energy is
always valued at the flat tariff (the home-charging rate); station prices
apply to energy purchased at the stop. Legs and charge amounts therefore do
not depend on the price iteration, so each vehicle is planned once and only
re-priced and re-ranked inside the loop.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ValidationError
from .grid import DcopfSolution, GridCase, solve_dcopf
from .powertrain import ChargePolicy, EnergyPrices, EvAgent
from .routing import StationOption, TripPlan, plan_with_charging
from .stations import (
    ChargingRequest,
    ChargingStation,
    Region,
    RegionDemand,
    admit_and_aggregate,
    offered_price,
)
from .transport import TransportNetwork

UNCAPPED_EVS = 10**9


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "I"
    flat_price: float = 0.05  # $/kWh
    p_gas: float = 2.93  # $/gal
    charge_policy: ChargePolicy = ChargePolicy.FILL_TO_FULL
    eps_price: float = 0.01  # $/MWh
    max_iters: int = 20
    n_candidates: int = 5
    d_search: float = 100.0  # meters
    future_energy_value: float = 0.0  # $ credit for charging not strictly needed
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scenario not in ("I", "II"):
            raise ValidationError("scenario must be 'I' or 'II'")
        if self.eps_price <= 0:
            raise ValidationError("eps_price must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")


@dataclass
class IterationTrace:
    iteration: int
    lmp: Dict[int, float]
    offered: Dict[int, float]
    region_kwh: Dict[int, float]
    region_cost: Dict[int, float]
    grid_cost: float


@dataclass
class ScenarioReport:
    scenario: str
    status: str  # ok | failed
    convergence: str  # single_pass | converged | max_iters | cycling | failed
    total_power_cost: float
    total_charging_cost: float
    base_case_cost: float
    additional_cost_percent: float
    region_demand: Dict[int, dict]
    unserved_ev_ids: Tuple[int, ...]
    iterations: int
    trace: List[IterationTrace] = field(default_factory=list)
    diagnostic: str = ""


def converged(prev_lmps: Dict[int, float], curr_lmps: Dict[int, float], eps: float) -> bool:
    """True when no bus LMP moved by more than eps (inclusive)."""
    if set(prev_lmps) != set(curr_lmps):
        raise ValidationError("LMP vectors cover different bus sets")
    return max(abs(curr_lmps[b] - prev_lmps[b]) for b in prev_lmps) <= eps


def build_regions(case: GridCase, stations: Sequence[ChargingStation]) -> List[Region]:
    """Regions from bus annotations; station membership checked both ways."""
    by_region: Dict[int, List[int]] = {}
    for st in stations:
        by_region.setdefault(st.region, []).append(st.id)
    regions: List[Region] = []
    seen_regions = set()
    for bus in case.buses:
        if bus.region is None:
            continue
        if bus.region in seen_regions:
            raise ValidationError(f"region {bus.region} mapped to more than one bus")
        seen_regions.add(bus.region)
        capacity = bus.capacity_evs if bus.capacity_evs is not None else UNCAPPED_EVS
        regions.append(
            Region(
                index=bus.region,
                bus_id=bus.id,
                capacity_evs=capacity,
                station_ids=tuple(sorted(by_region.get(bus.region, ()))),
            )
        )
    unknown = set(by_region) - seen_regions
    if unknown:
        raise ValidationError(f"stations reference regions with no bus: {sorted(unknown)}")
    return sorted(regions, key=lambda r: r.index)


def _reprice(option: StationOption, price: float) -> StationOption:
    charge_cost = option.charge_kwh * price
    travel = option.leg_to_station.total_cost + option.leg_to_destination.total_cost
    return dataclasses.replace(option, charge_cost=charge_cost, total_cost=travel + charge_cost)


@dataclass
class _PlannedEv:
    ev: EvAgent
    plan: TripPlan
    station_region: Dict[int, int]

    def choose(
        self,
        prices: Dict[int, float],
        future_value: float,
        exclude_regions: frozenset = frozenset(),
    ) -> Optional[StationOption]:
        """Best charging option at current prices, or None to drive straight."""
        opts = [
            _reprice(o, prices[o.station_id])
            for o in self.plan.options
            if self.station_region[o.station_id] not in exclude_regions
        ]
        # On-path stations can tie to the last bit; quantize so rounding noise
        # in the repriced totals cannot reorder a tie between price snapshots.
        opts.sort(key=lambda o: (round(o.total_cost, 9), o.station_id))
        best = opts[0] if opts else None
        if self.plan.needs_charge:
            return best
        if (
            best is not None
            and best.charge_kwh > 1e-12
            and best.total_cost < self.plan.plain_route.total_cost + future_value
        ):
            return best
        return None


def _plan_fleet(
    net: TransportNetwork,
    fleet: Sequence[EvAgent],
    stations: Sequence[ChargingStation],
    cfg: ScenarioConfig,
) -> List[_PlannedEv]:
    travel_prices = EnergyPrices(p_ele=cfg.flat_price, p_gas=cfg.p_gas)
    station_region = {st.id: st.region for st in stations}
    planned = []
    for ev in fleet:
        plan = plan_with_charging(
            net, ev, stations, travel_prices,
            policy=cfg.charge_policy,
            n_candidates=cfg.n_candidates,
            d_search=cfg.d_search,
        )
        planned.append(_PlannedEv(ev, plan, station_region))
    return planned


def _demand_pass(
    planned: Sequence[_PlannedEv],
    prices: Dict[int, float],
    regions: Sequence[Region],
    cfg: ScenarioConfig,
) -> Tuple[Dict[int, RegionDemand], List[int], float]:
    """One routing/admission round. Returns final per-region demand, unserved
    ev ids, and total charging cost.

    Rejected vehicles get one fallback choice with every saturated region's
    stations excluded; round-one admissions are kept and fallbacks fill the
    remaining headroom so admission never churns.
    """
    station_region = planned[0].station_region if planned else {}
    requests: Dict[int, List[ChargingRequest]] = {}
    chosen_by_ev: Dict[int, StationOption] = {}
    unserved: List[int] = []
    for pev in planned:
        if not pev.plan.feasible:
            unserved.append(pev.ev.id)
            continue
        option = pev.choose(prices, cfg.future_energy_value)
        if option is None:
            if pev.plan.needs_charge:
                unserved.append(pev.ev.id)
            continue
        chosen_by_ev[pev.ev.id] = option
        req = ChargingRequest(
            ev_id=pev.ev.id,
            station_id=option.station_id,
            energy_kwh=option.charge_kwh,
            quoted_price=prices[option.station_id],
            trip_cost=option.total_cost,
            distance_mi=0.0,
        )
        requests.setdefault(station_region[option.station_id], []).append(req)

    first = admit_and_aggregate(requests, regions)
    saturated = frozenset(idx for idx, dem in first.items() if dem.rejected)
    if not saturated:
        total_cost = sum(
            r.energy_kwh * r.quoted_price for dem in first.values() for r in dem.admitted
        )
        return first, sorted(set(unserved)), float(total_cost)

    # Fallback round for the rejected vehicles.
    planned_by_id = {pev.ev.id: pev for pev in planned}
    fallback: Dict[int, List[ChargingRequest]] = {}
    for idx, dem in first.items():
        for req in dem.rejected:
            pev = planned_by_id[req.ev_id]
            option = pev.choose(prices, cfg.future_energy_value, exclude_regions=saturated)
            if option is None:
                if pev.plan.needs_charge:
                    unserved.append(req.ev_id)
                continue
            fb = ChargingRequest(
                ev_id=req.ev_id,
                station_id=option.station_id,
                energy_kwh=option.charge_kwh,
                quoted_price=prices[option.station_id],
                trip_cost=option.total_cost,
            )
            fallback.setdefault(station_region[option.station_id], []).append(fb)

    remaining = [
        dataclasses.replace(
            r, capacity_evs=max(0, r.capacity_evs - len(first[r.index].admitted))
        )
        for r in regions
    ]
    second = admit_and_aggregate(fallback, remaining)
    final: Dict[int, RegionDemand] = {}
    for r in regions:
        admitted = list(first[r.index].admitted) + list(second[r.index].admitted)
        rejected = list(second[r.index].rejected)
        for req in rejected:
            if planned_by_id[req.ev_id].plan.needs_charge:
                unserved.append(req.ev_id)
        total = float(sum(x.energy_kwh for x in sorted(admitted, key=lambda x: x.ev_id)))
        final[r.index] = RegionDemand(r.index, admitted, rejected, total, total / 1000.0)
    total_cost = sum(
        r.energy_kwh * r.quoted_price for dem in final.values() for r in dem.admitted
    )
    return final, sorted(set(unserved)), float(total_cost)


def _extra_load(demand: Dict[int, RegionDemand], regions: Sequence[Region]) -> Dict[int, float]:
    bus_of = {r.index: r.bus_id for r in regions}
    return {bus_of[idx]: dem.load_mw for idx, dem in demand.items() if dem.load_mw > 0.0}


def _region_summary(demand: Dict[int, RegionDemand]) -> Dict[int, dict]:
    out = {}
    for idx in sorted(demand):
        dem = demand[idx]
        out[idx] = {
            "admitted_evs": len(dem.admitted),
            "total_kwh": dem.total_kwh,
            "load_mw": dem.load_mw,
            "charging_cost": float(
                sum(r.energy_kwh * r.quoted_price for r in dem.admitted)
            ),
        }
    return out


def _failed_report(scenario: str, base_cost: float, diagnostic: str, trace: List[IterationTrace]) -> ScenarioReport:
    return ScenarioReport(
        scenario=scenario,
        status="failed",
        convergence="failed",
        total_power_cost=float("nan"),
        total_charging_cost=float("nan"),
        base_case_cost=base_cost,
        additional_cost_percent=float("nan"),
        region_demand={},
        unserved_ev_ids=(),
        iterations=len(trace),
        trace=trace,
        diagnostic=diagnostic,
    )


def run_scenario(
    net: TransportNetwork,
    grid_case: GridCase,
    fleet: Sequence[EvAgent],
    stations: Sequence[ChargingStation],
    cfg: ScenarioConfig,
) -> ScenarioReport:
    regions = build_regions(grid_case, stations)
    if stations and not regions:
        raise ValidationError("no bus carries a region annotation")
    base = solve_dcopf(grid_case)
    if base.status != "optimal":
        return _failed_report(cfg.scenario, float("nan"), "base case DCOPF infeasible", [])

    # Stations need a price before planning; the skeletons themselves are
    # price-independent, so the placeholder value never matters.
    for st in stations:
        st.offered_price = cfg.flat_price
    planned = _plan_fleet(net, fleet, stations, cfg)

    if cfg.scenario == "I":
        prices = {st.id: cfg.flat_price for st in stations}
        demand, unserved, charging_cost = _demand_pass(planned, prices, regions, cfg)
        sol = solve_dcopf(grid_case, _extra_load(demand, regions))
        if sol.status != "optimal":
            return _failed_report("I", base.total_cost, "DCOPF infeasible under EV demand", [])
        summary = _region_summary(demand)
        trace = [
            IterationTrace(
                iteration=1,
                lmp=dict(sol.lmp),
                offered=dict(prices),
                region_kwh={i: s["total_kwh"] for i, s in summary.items()},
                region_cost={i: s["charging_cost"] for i, s in summary.items()},
                grid_cost=sol.total_cost,
            )
        ]
        return ScenarioReport(
            scenario="I",
            status="ok",
            convergence="single_pass",
            total_power_cost=sol.total_cost,
            total_charging_cost=charging_cost,
            base_case_cost=base.total_cost,
            additional_cost_percent=100.0 * (sol.total_cost - base.total_cost) / base.total_cost,
            region_demand=summary,
            unserved_ev_ids=tuple(unserved),
            iterations=1,
            trace=trace,
        )

    # Scenario II: LMP feedback loop seeded from the no-EV base case.
    lmp = dict(base.lmp)
    bus_of = {r.index: r.bus_id for r in regions}
    history: List[Dict[int, float]] = [dict(lmp)]
    trace: List[IterationTrace] = []
    status = "max_iters"
    sol: Optional[DcopfSolution] = None
    demand: Dict[int, RegionDemand] = {}
    unserved: List[int] = []
    charging_cost = 0.0
    for iteration in range(1, cfg.max_iters + 1):
        prices = {}
        for st in stations:
            price = offered_price(lmp[bus_of[st.region]], st.cpi_percent)
            st.offered_price = price
            prices[st.id] = price
        demand, unserved, charging_cost = _demand_pass(planned, prices, regions, cfg)
        sol = solve_dcopf(grid_case, _extra_load(demand, regions))
        if sol.status != "optimal":
            return _failed_report("II", base.total_cost, "DCOPF infeasible under EV demand", trace)
        new_lmp = dict(sol.lmp)
        summary = _region_summary(demand)
        trace.append(
            IterationTrace(
                iteration=iteration,
                lmp=new_lmp,
                offered=dict(prices),
                region_kwh={i: s["total_kwh"] for i, s in summary.items()},
                region_cost={i: s["charging_cost"] for i, s in summary.items()},
                grid_cost=sol.total_cost,
            )
        )
        if converged(lmp, new_lmp, cfg.eps_price):
            status = "converged"
            break
        if any(converged(past, new_lmp, cfg.eps_price) for past in history):
            status = "cycling"
            lmp = new_lmp
            break
        history.append(dict(new_lmp))
        lmp = new_lmp

    summary = _region_summary(demand)
    return ScenarioReport(
        scenario="II",
        status="ok",
        convergence=status,
        total_power_cost=sol.total_cost,
        total_charging_cost=charging_cost,
        base_case_cost=base.total_cost,
        additional_cost_percent=100.0 * (sol.total_cost - base.total_cost) / base.total_cost,
        region_demand=summary,
        unserved_ev_ids=tuple(unserved),
        iterations=len(trace),
        trace=trace,
    )


def compare_reports(r_one: ScenarioReport, r_two: ScenarioReport) -> dict:
    """Side-by-side totals plus relative reductions, with the published
    full-scale comparison included for context."""

    def reduction(a: float, b: float) -> float:
        return 0.0 if a == 0 else 100.0 * (a - b) / a

    rows = []
    for metric, attr in (
        ("total_power_cost", "total_power_cost"),
        ("total_charging_cost", "total_charging_cost"),
        ("additional_cost_percent", "additional_cost_percent"),
    ):
        a, b = getattr(r_one, attr), getattr(r_two, attr)
        rows.append(
            {"metric": metric, "scenario_i": a, "scenario_ii": b, "reduction_percent": reduction(a, b)}
        )
    return {
        "rows": rows,
        "reference_full_scale": {
            "note": "city-scale study with 45000 vehicles, for context only",
            "total_charging_cost": {"scenario_i": 2165.0, "scenario_ii": 1287.0},
            "additional_cost_percent": {"scenario_i": 14.1, "scenario_ii": 8.8},
        },
    }
