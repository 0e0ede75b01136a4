"""DC optimal power flow over a quadratic-cost case, with locational
marginal prices read off the balance-constraint multipliers.

The decision vector is [generator outputs, non-slack bus angles]; the slack
angle is eliminated rather than constrained. Line flows are susceptance
times angle difference with base power already folded into the susceptance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import qp
from .errors import SchemaError, SolverError, ValidationError


@dataclass(frozen=True)
class Bus:
    id: int
    load_mw: float
    region: Optional[int] = None
    capacity_evs: Optional[int] = None

    def __post_init__(self) -> None:
        if self.load_mw < 0:
            raise ValidationError(f"bus {self.id}: negative base load")
        if self.capacity_evs is not None and self.capacity_evs < 0:
            raise ValidationError(f"bus {self.id}: negative EV capacity")


@dataclass(frozen=True)
class Generator:
    bus: int
    a: float
    b: float
    c: float
    pmin: float
    pmax: float

    def __post_init__(self) -> None:
        if self.pmin > self.pmax:
            raise ValidationError(f"generator at bus {self.bus}: pmin exceeds pmax")
        if self.c < 0:
            raise ValidationError(f"generator at bus {self.bus}: concave cost not allowed")

    def cost(self, p: float) -> float:
        return self.a + self.b * p + self.c * p * p


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance: float  # MW/rad
    fmax: float

    def __post_init__(self) -> None:
        if self.susceptance <= 0:
            raise ValidationError(f"line {self.from_bus}-{self.to_bus}: susceptance must be positive")
        if self.fmax <= 0:
            raise ValidationError(f"line {self.from_bus}-{self.to_bus}: fmax must be positive")


@dataclass
class GridCase:
    buses: List[Bus]
    generators: List[Generator]
    lines: List[Line]
    slack_bus: int

    def __post_init__(self) -> None:
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate bus ids")
        known = set(ids)
        if self.slack_bus not in known:
            raise ValidationError(f"slack bus {self.slack_bus} not in case")
        for g in self.generators:
            if g.bus not in known:
                raise ValidationError(f"generator references missing bus {g.bus}")
        for ln in self.lines:
            if ln.from_bus not in known or ln.to_bus not in known:
                raise ValidationError(f"line {ln.from_bus}-{ln.to_bus} references a missing bus")
        if not self._connected():
            raise ValidationError("grid is not connected")

    def _connected(self) -> bool:
        adj: Dict[int, List[int]] = {b.id: [] for b in self.buses}
        for ln in self.lines:
            adj[ln.from_bus].append(ln.to_bus)
            adj[ln.to_bus].append(ln.from_bus)
        seen = {self.slack_bus}
        stack = [self.slack_bus]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.buses)

    @property
    def bus_ids(self) -> List[int]:
        return sorted(b.id for b in self.buses)

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise ValidationError(f"unknown bus {bus_id}")


@dataclass
class DcopfSolution:
    status: str  # optimal | infeasible
    dispatch: Optional[Tuple[float, ...]] = None  # MW per generator, case order
    theta: Optional[Dict[int, float]] = None  # rad per bus
    flow: Optional[Tuple[float, ...]] = None  # MW per line, case order
    lmp: Optional[Dict[int, float]] = None  # $/MWh per bus
    total_cost: Optional[float] = None  # $/h
    binding: Tuple[str, ...] = ()
    diagnostic: str = ""


def susceptance_matrix(case: GridCase) -> np.ndarray:
    """Nodal B matrix ordered by ascending bus id; rows sum to zero."""
    ids = case.bus_ids
    pos = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    mat = np.zeros((n, n))
    for ln in case.lines:
        i, j = pos[ln.from_bus], pos[ln.to_bus]
        mat[i, i] += ln.susceptance
        mat[j, j] += ln.susceptance
        mat[i, j] -= ln.susceptance
        mat[j, i] -= ln.susceptance
    return mat


def build_qp(case: GridCase, extra_load_mw: Optional[Dict[int, float]] = None):
    """Assemble the QP data for a case: returns (q, c, a_eq, b_eq, a_in, b_in,
    labels, constant_cost, loads). Inequality order is fixed: pmax per
    generator, pmin per generator, upper then lower flow per line."""
    extra = dict(extra_load_mw or {})
    known = set(case.bus_ids)
    for bus_id, mw in extra.items():
        if bus_id not in known:
            raise ValidationError(f"extra load references unknown bus {bus_id}")
        if mw < 0:
            raise ValidationError(f"extra load at bus {bus_id} is negative")

    ids = case.bus_ids
    pos = {b: i for i, b in enumerate(ids)}
    nb = len(ids)
    ng = len(case.generators)
    keep = [i for i, b in enumerate(ids) if b != case.slack_bus]
    n = ng + len(keep)

    q = np.zeros((n, n))
    c = np.zeros(n)
    for g_idx, gen in enumerate(case.generators):
        q[g_idx, g_idx] = 2.0 * gen.c
        c[g_idx] = gen.b
    constant = float(sum(g.a for g in case.generators))

    bmat = susceptance_matrix(case)
    loads = np.zeros(nb)
    for bus in case.buses:
        loads[pos[bus.id]] = bus.load_mw + extra.get(bus.id, 0.0)

    # Balance per bus: sum of local generation minus B*theta equals load.
    a_eq = np.zeros((nb, n))
    for g_idx, gen in enumerate(case.generators):
        a_eq[pos[gen.bus], g_idx] = 1.0
    for col, full_col in enumerate(keep):
        a_eq[:, ng + col] = -bmat[:, full_col]
    b_eq = loads.copy()

    rows: List[np.ndarray] = []
    rhs: List[float] = []
    labels: List[str] = []
    for g_idx, gen in enumerate(case.generators):
        row = np.zeros(n)
        row[g_idx] = 1.0
        rows.append(row)
        rhs.append(gen.pmax)
        labels.append(f"pmax[g{g_idx}@bus{gen.bus}]")
    for g_idx, gen in enumerate(case.generators):
        row = np.zeros(n)
        row[g_idx] = -1.0
        rows.append(row)
        rhs.append(-gen.pmin)
        labels.append(f"pmin[g{g_idx}@bus{gen.bus}]")
    theta_col = {full_col: ng + col for col, full_col in enumerate(keep)}
    for ln in case.lines:
        row = np.zeros(n)
        fi, ti = pos[ln.from_bus], pos[ln.to_bus]
        if fi in theta_col:
            row[theta_col[fi]] += ln.susceptance
        if ti in theta_col:
            row[theta_col[ti]] -= ln.susceptance
        rows.append(row)
        rhs.append(ln.fmax)
        labels.append(f"flow_hi[{ln.from_bus}-{ln.to_bus}]")
        rows.append(-row)
        rhs.append(ln.fmax)
        labels.append(f"flow_lo[{ln.from_bus}-{ln.to_bus}]")
    a_in = np.vstack(rows) if rows else np.zeros((0, n))
    b_in = np.asarray(rhs)

    return q, c, a_eq, b_eq, a_in, b_in, labels, constant, loads


def solve_dcopf(case: GridCase, extra_load_mw: Optional[Dict[int, float]] = None) -> DcopfSolution:
    """Minimum-cost dispatch meeting nodal balance, generator and flow limits."""
    q, c, a_eq, b_eq, a_in, b_in, labels, constant, loads = build_qp(case, extra_load_mw)
    total_load = float(loads.sum())
    total_pmax = float(sum(g.pmax for g in case.generators))
    if total_load > total_pmax + 1e-9:
        return DcopfSolution(status="infeasible", diagnostic="load exceeds total generation capacity")

    result = qp.solve_qp(q, c, a_eq, b_eq, a_in, b_in)
    if result.status != "optimal":
        return DcopfSolution(status="infeasible", diagnostic="no dispatch satisfies the limits")

    ids = case.bus_ids
    ng = len(case.generators)
    keep = [b for b in ids if b != case.slack_bus]
    x = result.x
    dispatch = tuple(float(v) for v in x[:ng])
    theta = {case.slack_bus: 0.0}
    for col, bus_id in enumerate(keep):
        theta[bus_id] = float(x[ng + col])
    flow = tuple(
        float(ln.susceptance * (theta[ln.from_bus] - theta[ln.to_bus])) for ln in case.lines
    )
    # Cost rises by -lambda per MW of extra load, so the LMP is the negated
    # balance multiplier.
    lmp = {bus_id: float(-result.eq_multipliers[i]) for i, bus_id in enumerate(ids)}
    total_cost = float(sum(g.cost(p) for g, p in zip(case.generators, dispatch)))
    binding = tuple(labels[i] for i in result.active)
    return DcopfSolution(
        status="optimal",
        dispatch=dispatch,
        theta=theta,
        flow=flow,
        lmp=lmp,
        total_cost=total_cost,
        binding=binding,
    )


def lmps(solution: DcopfSolution) -> Dict[int, float]:
    if solution.status != "optimal":
        raise ValidationError("LMPs are undefined for a non-optimal solution")
    return dict(solution.lmp)


_BUS_FIELDS = {"id", "load_mw", "region", "capacity_evs"}
_BUS_REQUIRED = {"id", "load_mw"}
_GEN_FIELDS = {"bus", "a", "b", "c", "pmin", "pmax"}
_LINE_FIELDS = {"from", "to", "susceptance", "fmax"}


def case_from_dict(doc: dict) -> GridCase:
    if not isinstance(doc, dict):
        raise SchemaError("grid document must be an object")
    unknown = set(doc) - {"buses", "generators", "lines", "slack_bus"}
    if unknown:
        raise SchemaError(f"grid document has unknown sections {sorted(unknown)}")
    for key in ("buses", "generators", "lines", "slack_bus"):
        if key not in doc:
            raise SchemaError(f"grid document is missing {key!r}")
    buses = []
    for rec in doc["buses"]:
        unknown = set(rec) - _BUS_FIELDS
        if unknown:
            raise SchemaError(f"bus record has unknown fields {sorted(unknown)}")
        missing = _BUS_REQUIRED - set(rec)
        if missing:
            raise SchemaError(f"bus record is missing fields {sorted(missing)}")
        buses.append(
            Bus(
                id=int(rec["id"]),
                load_mw=float(rec["load_mw"]),
                region=int(rec["region"]) if rec.get("region") is not None else None,
                capacity_evs=int(rec["capacity_evs"]) if rec.get("capacity_evs") is not None else None,
            )
        )
    gens = []
    for rec in doc["generators"]:
        if set(rec) != _GEN_FIELDS:
            raise SchemaError(
                f"generator record must have exactly fields {sorted(_GEN_FIELDS)}"
            )
        gens.append(
            Generator(
                bus=int(rec["bus"]), a=float(rec["a"]), b=float(rec["b"]),
                c=float(rec["c"]), pmin=float(rec["pmin"]), pmax=float(rec["pmax"]),
            )
        )
    lines = []
    for rec in doc["lines"]:
        if set(rec) != _LINE_FIELDS:
            raise SchemaError(f"line record must have exactly fields {sorted(_LINE_FIELDS)}")
        lines.append(
            Line(
                from_bus=int(rec["from"]), to_bus=int(rec["to"]),
                susceptance=float(rec["susceptance"]), fmax=float(rec["fmax"]),
            )
        )
    return GridCase(buses, gens, lines, slack_bus=int(doc["slack_bus"]))


def case_to_dict(case: GridCase) -> dict:
    buses = []
    for b in case.buses:
        rec: dict = {"id": b.id, "load_mw": b.load_mw}
        if b.region is not None:
            rec["region"] = b.region
        if b.capacity_evs is not None:
            rec["capacity_evs"] = b.capacity_evs
        buses.append(rec)
    return {
        "buses": buses,
        "generators": [
            {"bus": g.bus, "a": g.a, "b": g.b, "c": g.c, "pmin": g.pmin, "pmax": g.pmax}
            for g in case.generators
        ],
        "lines": [
            {"from": ln.from_bus, "to": ln.to_bus, "susceptance": ln.susceptance, "fmax": ln.fmax}
            for ln in case.lines
        ],
        "slack_bus": case.slack_bus,
    }


def load_case(path: str) -> GridCase:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read grid file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"grid file {path} is not valid JSON: {exc}") from exc
    return case_from_dict(doc)


def save_case(case: GridCase, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(case_to_dict(case), fh, indent=2, sort_keys=True)
        fh.write("\n")


def bundled_case() -> GridCase:
    """The packaged nine-bus case with regional EV capacities."""
    text = resources.files("gridroute").joinpath("data/ieee9.json").read_text(encoding="utf-8")
    return case_from_dict(json.loads(text))
