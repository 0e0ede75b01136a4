"""Report emission: structured JSON, flat CSV tables, and rendered figures.

Every artifact is a pure function of the report objects so reruns with the
same seed produce byte-identical output directories.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .coordinator import ScenarioReport


def report_to_dict(report: ScenarioReport) -> dict:
    doc = dataclasses.asdict(report)
    doc["unserved_ev_ids"] = list(report.unserved_ev_ids)
    return doc


def write_report_files(
    out_dir: str,
    reports: Dict[str, ScenarioReport],
    comparison: Optional[dict] = None,
) -> List[str]:
    """Write JSON, CSV, and PNG artifacts for the given scenario reports."""
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []

    def path(name: str) -> str:
        written.append(os.path.join(out_dir, name))
        return written[-1]

    for label, report in sorted(reports.items()):
        with open(path(f"report_scenario_{label}.json"), "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")

    with open(path("region_demand.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario", "region", "admitted_evs", "total_kwh", "load_mw", "charging_cost_usd"]
        )
        for label, report in sorted(reports.items()):
            for region in sorted(report.region_demand):
                row = report.region_demand[region]
                writer.writerow(
                    [
                        label,
                        region,
                        row["admitted_evs"],
                        f"{row['total_kwh']:.6f}",
                        f"{row['load_mw']:.9f}",
                        f"{row['charging_cost']:.6f}",
                    ]
                )

    with open(path("iteration_trace.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "iteration", "grid_cost_usd", "total_kwh", "charging_cost_usd"])
        for label, report in sorted(reports.items()):
            for entry in report.trace:
                writer.writerow(
                    [
                        label,
                        entry.iteration,
                        f"{entry.grid_cost:.6f}",
                        f"{sum(entry.region_kwh.values()):.6f}",
                        f"{sum(entry.region_cost.values()):.6f}",
                    ]
                )

    with open(path("lmp_trace.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "iteration", "bus", "lmp_usd_per_mwh"])
        for label, report in sorted(reports.items()):
            for entry in report.trace:
                for bus in sorted(entry.lmp):
                    writer.writerow([label, entry.iteration, bus, f"{entry.lmp[bus]:.9f}"])

    if comparison is not None:
        with open(path("summary.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "scenario_i", "scenario_ii", "reduction_percent"])
            for row in comparison["rows"]:
                writer.writerow(
                    [
                        row["metric"],
                        f"{row['scenario_i']:.6f}",
                        f"{row['scenario_ii']:.6f}",
                        f"{row['reduction_percent']:.6f}",
                    ]
                )
        with open(path("comparison.json"), "w", encoding="utf-8") as fh:
            json.dump(comparison, fh, indent=2, sort_keys=True)
            fh.write("\n")

    written.extend(render_figures(out_dir, reports))
    return written


def render_figures(out_dir: str, reports: Dict[str, ScenarioReport]) -> List[str]:
    """Bar charts of per-region demand and cost, plus the LMP iteration trace."""
    written: List[str] = []
    labels = sorted(reports)
    regions = sorted({r for rep in reports.values() for r in rep.region_demand})
    if regions:
        for name, key, ylabel in (
            ("region_demand.png", "total_kwh", "admitted demand (kWh)"),
            ("region_cost.png", "charging_cost", "charging cost ($/h)"),
        ):
            fig, ax = plt.subplots(figsize=(7.0, 4.0))
            width = 0.8 / max(1, len(labels))
            for i, label in enumerate(labels):
                rep = reports[label]
                values = [rep.region_demand.get(r, {}).get(key, 0.0) for r in regions]
                xs = [r + (i - (len(labels) - 1) / 2.0) * width for r in range(len(regions))]
                ax.bar(xs, values, width=width, label=f"scenario {label}")
            ax.set_xticks(range(len(regions)))
            ax.set_xticklabels([str(r) for r in regions])
            ax.set_xlabel("region")
            ax.set_ylabel(ylabel)
            ax.legend()
            fig.tight_layout()
            target = os.path.join(out_dir, name)
            fig.savefig(target, dpi=120)
            plt.close(fig)
            written.append(target)

    traced = [label for label in labels if reports[label].trace]
    if traced:
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        for label in traced:
            rep = reports[label]
            buses = sorted(rep.trace[0].lmp)
            iters = [e.iteration for e in rep.trace]
            style = "-" if label == "II" else "--"
            for bus in buses:
                ax.plot(
                    iters,
                    [e.lmp[bus] for e in rep.trace],
                    style,
                    linewidth=1.0,
                    label=f"{label} bus {bus}" if bus == buses[0] else None,
                )
        ax.set_xlabel("iteration")
        ax.set_ylabel("LMP ($/MWh)")
        ax.legend()
        fig.tight_layout()
        target = os.path.join(out_dir, "lmp_trace.png")
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(target)
    return written


def format_report(report: ScenarioReport) -> str:
    lines = [
        f"scenario {report.scenario}: {report.status} ({report.convergence}, "
        f"{report.iterations} iteration{'s' if report.iterations != 1 else ''})",
        f"  base case cost      : {report.base_case_cost:12.2f} $/h",
        f"  total power cost    : {report.total_power_cost:12.2f} $/h",
        f"  additional cost     : {report.additional_cost_percent:12.4f} %",
        f"  total charging cost : {report.total_charging_cost:12.2f} $/h",
    ]
    for region in sorted(report.region_demand):
        row = report.region_demand[region]
        lines.append(
            f"    region {region}: {row['admitted_evs']:5d} EVs  "
            f"{row['total_kwh']:10.2f} kWh  {row['charging_cost']:10.2f} $"
        )
    if report.unserved_ev_ids:
        lines.append(f"  unserved EVs: {len(report.unserved_ev_ids)}")
    return "\n".join(lines)


def format_comparison(comparison: dict) -> str:
    lines = [
        "comparison (scenario I vs II):",
        f"  {'metric':<26} {'scenario I':>14} {'scenario II':>14} {'reduction %':>12}",
    ]
    for row in comparison["rows"]:
        lines.append(
            f"  {row['metric']:<26} {row['scenario_i']:>14.4f} "
            f"{row['scenario_ii']:>14.4f} {row['reduction_percent']:>12.4f}"
        )
    ref = comparison.get("reference_full_scale")
    if ref:
        lines.append(f"  reference ({ref['note']}):")
        cc = ref["total_charging_cost"]
        ac = ref["additional_cost_percent"]
        lines.append(
            f"  {'total_charging_cost':<26} {cc['scenario_i']:>14.1f} {cc['scenario_ii']:>14.1f}"
        )
        lines.append(
            f"  {'additional_cost_percent':<26} {ac['scenario_i']:>14.1f} {ac['scenario_ii']:>14.1f}"
        )
    return "\n".join(lines)
