"""Command-line front end: scenario runs, asset generation, and the OPF and
routing debug commands.

Exit codes: 0 success, 2 parse or schema failure, 3 validation failure,
4 solver failure. All randomness flows from one seed through named
sub-streams so each asset can be regenerated independently.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .coordinator import ScenarioConfig, compare_reports, run_scenario
from .errors import GridRouteError, SchemaError, ValidationError
from .fleet import generate_fleet, load_fleet, save_fleet
from .grid import load_case, solve_dcopf
from .powertrain import (
    BatteryState,
    ChargePolicy,
    EnergyPrices,
    EvAgent,
    PowertrainClass,
    usable_capacity,
)
from .report import format_comparison, format_report, write_report_files
from .routing import plan_with_charging
from .stations import offered_price, sample_cpi
from .transport import generate_synthetic, load_network, save_network

_STREAMS = {"network": 0, "fleet": 1, "cpi": 2}


def derive_seed(seed: int, stream: str) -> int:
    """Stable per-purpose seed derived from the manifest seed."""
    return int(np.random.SeedSequence([seed, _STREAMS[stream]]).generate_state(1)[0])


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument(
        "--format", choices=("pretty", "machine"), default="pretty", help="output style"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridroute",
        description="Coupled road-network and power-grid charging simulation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the scenario(s) described by a manifest")
    p_run.add_argument("--manifest", required=True, help="path to the run manifest")
    _add_common(p_run)

    p_net = sub.add_parser("gen-network", help="generate a synthetic road network file")
    p_net.add_argument("--nodes", type=int, required=True)
    p_net.add_argument(
        "--segments", type=int, required=True,
        help="number of undirected roads; each road yields two directed segments",
    )
    p_net.add_argument("--stations", type=int, required=True)
    p_net.add_argument("--regions", type=int, default=6)
    p_net.add_argument("--span-m", type=float, default=100_000.0, help="map side length in meters")
    p_net.add_argument(
        "--traffic", default="0.2,0.5,0.3", help="heavy,normal,low traffic shares"
    )
    p_net.add_argument("--cpi-range", default="0,12", help="low,high station margin percent")
    _add_common(p_net)

    p_fleet = sub.add_parser("gen-fleet", help="generate a fleet file over a network")
    p_fleet.add_argument("--net", required=True, help="network file the O-D pairs draw from")
    p_fleet.add_argument("--n", type=int, required=True, help="fleet size")
    p_fleet.add_argument(
        "--mix", default=None, help="PHEV20,PHEV40,PHEV60,BEV100 fractions summing to 1"
    )
    p_fleet.add_argument("--soc", default="0.2,0.9", help="low,high initial state of charge")
    _add_common(p_fleet)

    p_opf = sub.add_parser("opf", help="solve one DC optimal power flow case")
    p_opf.add_argument("--grid", required=True, help="grid case file")
    p_opf.add_argument(
        "--extra-load", default="", help="additional MW per bus, e.g. 5=2.5,7=1.0"
    )
    _add_common(p_opf)

    p_route = sub.add_parser("route", help="plan a single trip with charging options")
    p_route.add_argument("--net", required=True)
    p_route.add_argument("--ev-class", required=True, choices=[c.value for c in PowertrainClass])
    p_route.add_argument("--origin", type=int, required=True)
    p_route.add_argument("--destination", type=int, required=True)
    p_route.add_argument("--soc", type=float, default=0.5, help="initial state of charge in [0,1]")
    p_route.add_argument("--flat-price", type=float, default=0.05, help="$/kWh travel tariff")
    p_route.add_argument("--p-gas", type=float, default=2.93, help="$/gal gasoline price")
    p_route.add_argument(
        "--lmp", type=float, default=None,
        help="price stations from this LMP ($/MWh) and their margins instead of the flat tariff",
    )
    p_route.add_argument(
        "--policy", choices=[p.value for p in ChargePolicy], default=ChargePolicy.FILL_TO_FULL.value
    )
    p_route.add_argument("--n-candidates", type=int, default=5)
    p_route.add_argument("--d-search", type=float, default=100.0)
    _add_common(p_route)

    return parser


def _parse_floats(text: str, n: int, what: str) -> List[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise SchemaError(f"{what} needs {n} comma-separated values, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise SchemaError(f"{what} has a non-numeric entry: {text!r}") from None


def _parse_extra_load(text: str) -> Dict[int, float]:
    extra: Dict[int, float] = {}
    if not text:
        return extra
    for chunk in text.split(","):
        if "=" not in chunk:
            raise SchemaError(f"bad extra-load entry {chunk!r}, expected bus=mw")
        bus, mw = chunk.split("=", 1)
        try:
            extra[int(bus)] = extra.get(int(bus), 0.0) + float(mw)
        except ValueError:
            raise SchemaError(f"bad extra-load entry {chunk!r}") from None
    return extra


_MANIFEST_FIELDS = {"network", "grid", "fleet", "scenario_config", "out_dir", "seed", "tool_version"}
_MANIFEST_REQUIRED = {"network", "grid", "fleet", "scenario_config"}
_SCENARIO_FIELDS = {
    "scenario", "flat_price", "p_gas", "charge_policy", "eps_price",
    "max_iters", "n_candidates", "d_search", "future_energy_value",
}


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what} {path} is not valid JSON: {exc}") from exc


def _scenario_configs(doc: dict, seed: int) -> List[ScenarioConfig]:
    unknown = set(doc) - _SCENARIO_FIELDS
    if unknown:
        raise SchemaError(f"scenario config has unknown fields {sorted(unknown)}")
    which = doc.get("scenario", "both")
    if which not in ("I", "II", "both"):
        raise SchemaError("scenario must be 'I', 'II', or 'both'")
    labels = ["I", "II"] if which == "both" else [which]
    kwargs = {}
    for key in ("flat_price", "p_gas", "eps_price", "d_search", "future_energy_value"):
        if key in doc:
            kwargs[key] = float(doc[key])
    for key in ("max_iters", "n_candidates"):
        if key in doc:
            kwargs[key] = int(doc[key])
    if "charge_policy" in doc:
        try:
            kwargs["charge_policy"] = ChargePolicy(doc["charge_policy"])
        except ValueError:
            raise SchemaError(f"unknown charge_policy {doc['charge_policy']!r}") from None
    return [ScenarioConfig(scenario=label, seed=seed, **kwargs) for label in labels]


def cmd_run(args: argparse.Namespace) -> int:
    manifest_path = os.path.abspath(args.manifest)
    doc = _load_json(manifest_path, "manifest")
    if not isinstance(doc, dict):
        raise SchemaError("manifest must be an object")
    unknown = set(doc) - _MANIFEST_FIELDS
    if unknown:
        raise SchemaError(f"manifest has unknown fields {sorted(unknown)}")
    missing = _MANIFEST_REQUIRED - set(doc)
    if missing:
        raise SchemaError(f"manifest is missing fields {sorted(missing)}")

    base = os.path.dirname(manifest_path)

    def resolve(rel: str) -> str:
        return rel if os.path.isabs(rel) else os.path.join(base, rel)

    net = load_network(resolve(doc["network"]))
    case = load_case(resolve(doc["grid"]))
    fleet = load_fleet(resolve(doc["fleet"]), net)
    scenario_doc = _load_json(resolve(doc["scenario_config"]), "scenario config")
    seed = int(doc.get("seed", args.seed))
    configs = _scenario_configs(scenario_doc, seed)

    if args.out:
        out_dir = args.out
    elif "out_dir" in doc:
        out_dir = resolve(doc["out_dir"])
    else:
        out_dir = os.path.abspath("out")
    reports = {}
    for cfg in configs:
        reports[cfg.scenario] = run_scenario(net, case, fleet, net.stations, cfg)
    comparison = (
        compare_reports(reports["I"], reports["II"]) if len(reports) == 2 else None
    )

    write_report_files(out_dir, reports, comparison)
    # The manifest is copied byte for byte so the output directory is
    # self-describing.
    with open(manifest_path, "rb") as src, open(
        os.path.join(out_dir, "manifest.json"), "wb"
    ) as dst:
        dst.write(src.read())

    if args.format == "machine":
        payload = {
            "out_dir": out_dir,
            "reports": {k: r.status for k, r in reports.items()},
            "tool_version": __version__,
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for label in sorted(reports):
            print(format_report(reports[label]))
        if comparison is not None:
            print(format_comparison(comparison))
        print(f"artifacts written to {out_dir}")

    if any(r.status != "ok" for r in reports.values()):
        return 4
    return 0


def cmd_gen_network(args: argparse.Namespace) -> int:
    if not args.out:
        raise SchemaError("gen-network requires --out")
    traffic = _parse_floats(args.traffic, 3, "--traffic")
    cpi_lo, cpi_hi = _parse_floats(args.cpi_range, 2, "--cpi-range")
    net = generate_synthetic(
        n_nodes=args.nodes,
        n_segments=args.segments,
        n_stations=args.stations,
        n_regions=args.regions,
        seed=derive_seed(args.seed, "network"),
        span_m=args.span_m,
        traffic_probs=tuple(traffic),
        cpi_range=(cpi_lo, cpi_hi),
    )
    # Margins come from their own stream so repricing a map does not move it.
    margins = sample_cpi(len(net.stations), derive_seed(args.seed, "cpi"), (cpi_lo, cpi_hi))
    for st, cpi in zip(net.stations, margins):
        st.cpi_percent = cpi
    save_network(net, args.out)
    summary = {
        "nodes": len(net.nodes),
        "segments": len(net.segments),
        "stations": len(net.stations),
        "regions": args.regions,
        "out": args.out,
    }
    if args.format == "machine":
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(
            f"wrote {args.out}: {summary['nodes']} nodes, {summary['segments']} directed "
            f"segments, {summary['stations']} stations in {summary['regions']} regions"
        )
    return 0


def cmd_gen_fleet(args: argparse.Namespace) -> int:
    if not args.out:
        raise SchemaError("gen-fleet requires --out")
    net = load_network(args.net)
    mix = None
    if args.mix is not None:
        shares = _parse_floats(args.mix, 4, "--mix")
        mix = {
            PowertrainClass.PHEV20: shares[0],
            PowertrainClass.PHEV40: shares[1],
            PowertrainClass.PHEV60: shares[2],
            PowertrainClass.BEV100: shares[3],
        }
    lo, hi = _parse_floats(args.soc, 2, "--soc")
    records = generate_fleet(
        args.n, net, mix=mix, soc_range=(lo, hi), seed=derive_seed(args.seed, "fleet")
    )
    save_fleet(records, args.out)
    if args.format == "machine":
        print(json.dumps({"evs": len(records), "out": args.out}, indent=2, sort_keys=True))
    else:
        print(f"wrote {args.out}: {len(records)} vehicles")
    return 0


def cmd_opf(args: argparse.Namespace) -> int:
    case = load_case(args.grid)
    extra = _parse_extra_load(args.extra_load)
    sol = solve_dcopf(case, extra)
    if args.format == "machine":
        payload = {
            "status": sol.status,
            "dispatch_mw": list(sol.dispatch) if sol.dispatch else None,
            "lmp_usd_per_mwh": sol.lmp,
            "flow_mw": list(sol.flow) if sol.flow else None,
            "total_cost_usd_per_h": sol.total_cost,
            "binding": list(sol.binding),
            "diagnostic": sol.diagnostic,
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        if sol.status != "optimal":
            print(f"status: {sol.status} ({sol.diagnostic})")
        else:
            print("status: optimal")
            print(f"total cost: {sol.total_cost:.2f} $/h")
            for gen, p in zip(case.generators, sol.dispatch):
                print(f"  gen @ bus {gen.bus}: {p:10.4f} MW")
            for bus in sorted(sol.lmp):
                print(f"  lmp bus {bus}: {sol.lmp[bus]:10.4f} $/MWh")
            if sol.binding:
                print(f"  binding: {', '.join(sol.binding)}")
    return 0 if sol.status == "optimal" else 4


def cmd_route(args: argparse.Namespace) -> int:
    net = load_network(args.net)
    ev_class = PowertrainClass(args.ev_class)
    cap = usable_capacity(ev_class)
    if not (0.0 <= args.soc <= 1.0):
        raise ValidationError("--soc must be in [0, 1]")
    ev = EvAgent(
        id=0,
        ev_class=ev_class,
        battery=BatteryState(capacity_kwh=cap, energy_kwh=args.soc * cap),
        origin=args.origin,
        destination=args.destination,
    )
    prices = EnergyPrices(p_ele=args.flat_price, p_gas=args.p_gas)
    for st in net.stations:
        if args.lmp is not None:
            st.offered_price = offered_price(args.lmp, st.cpi_percent)
        else:
            st.offered_price = args.flat_price
    plan = plan_with_charging(
        net, ev, net.stations, prices,
        policy=ChargePolicy(args.policy),
        n_candidates=args.n_candidates,
        d_search=args.d_search,
    )
    if args.format == "machine":
        payload = {
            "feasible": plan.feasible,
            "needs_charge": plan.needs_charge,
            "plain_route": None
            if plan.plain_route is None
            else {
                "nodes": list(plan.plain_route.nodes),
                "total_cost": plan.plain_route.total_cost,
                "arrival_energy_kwh": plan.plain_route.arrival_energy,
            },
            "options": [
                {
                    "station_id": o.station_id,
                    "charge_kwh": o.charge_kwh,
                    "charge_cost": o.charge_cost,
                    "total_cost": o.total_cost,
                    "leg_to_station": list(o.leg_to_station.nodes),
                    "leg_to_destination": list(o.leg_to_destination.nodes),
                }
                for o in plan.options
            ],
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        if plan.plain_route is not None:
            r = plan.plain_route
            print(
                f"plain route ({len(r.nodes)} nodes): cost {r.total_cost:.4f} $, "
                f"arrival energy {r.arrival_energy:.4f} kWh"
            )
        else:
            print("no direct route: charging stop required")
        for i, o in enumerate(plan.options, 1):
            print(
                f"  option {i}: station {o.station_id}  charge {o.charge_kwh:.3f} kWh "
                f"(${o.charge_cost:.4f})  trip total ${o.total_cost:.4f}"
            )
        if not plan.feasible:
            print("trip infeasible: no reachable station completes it")
    return 0 if plan.feasible else 3


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "gen-network": cmd_gen_network,
        "gen-fleet": cmd_gen_fleet,
        "opf": cmd_opf,
        "route": cmd_route,
    }
    try:
        return handlers[args.command](args)
    except GridRouteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
