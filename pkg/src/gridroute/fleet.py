"""Fleet generation and the fleet file format.

Class counts follow the requested mix with largest-remainder rounding so
they always sum to the fleet size. Origins, destinations, and initial SOC
are drawn deterministically from the seed.
"""

from __future__ import annotations

import json
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import SchemaError, ValidationError
from .powertrain import BatteryState, EvAgent, PowertrainClass, usable_capacity
from .transport import TransportNetwork

DEFAULT_MIX: Dict[PowertrainClass, float] = {
    PowertrainClass.PHEV20: 0.16,
    PowertrainClass.PHEV40: 0.16,
    PowertrainClass.PHEV60: 0.16,
    PowertrainClass.BEV100: 0.52,
}

DEFAULT_SOC_RANGE = (0.2, 0.9)

_CLASS_ORDER = [
    PowertrainClass.PHEV20,
    PowertrainClass.PHEV40,
    PowertrainClass.PHEV60,
    PowertrainClass.BEV100,
]


def class_counts(n_evs: int, mix: Optional[Dict[PowertrainClass, float]] = None) -> Dict[PowertrainClass, int]:
    """Integer class counts by largest-remainder rounding of the mix."""
    mix = dict(DEFAULT_MIX if mix is None else mix)
    if set(mix) != set(_CLASS_ORDER):
        raise ValidationError("mix must cover exactly the four vehicle classes")
    if any(v < 0 for v in mix.values()):
        raise ValidationError("mix fractions must be non-negative")
    if abs(sum(mix.values()) - 1.0) > 1e-9:
        raise ValidationError("mix fractions must sum to 1")
    raw = {cls: n_evs * mix[cls] for cls in _CLASS_ORDER}
    counts = {cls: math.floor(raw[cls]) for cls in _CLASS_ORDER}
    short = n_evs - sum(counts.values())
    by_remainder = sorted(
        _CLASS_ORDER, key=lambda cls: (-(raw[cls] - counts[cls]), _CLASS_ORDER.index(cls))
    )
    for cls in by_remainder[:short]:
        counts[cls] += 1
    return counts


def generate_fleet(
    n_evs: int,
    net: TransportNetwork,
    mix: Optional[Dict[PowertrainClass, float]] = None,
    soc_range: Tuple[float, float] = DEFAULT_SOC_RANGE,
    seed: int = 0,
) -> List[dict]:
    """Deterministic fleet records: class blocks in fixed order, then O-D and
    SOC drawn per vehicle."""
    if n_evs < 0:
        raise ValidationError("n_evs must be non-negative")
    lo, hi = soc_range
    if not (0.0 <= lo <= hi <= 1.0):
        raise ValidationError("soc_range must satisfy 0 <= low <= high <= 1")
    if n_evs > 0 and len(net.nodes) < 2:
        raise ValidationError("need at least two nodes to draw O-D pairs")
    counts = class_counts(n_evs, mix)
    rng = np.random.default_rng(seed)
    node_ids = [n.id for n in net.nodes]
    records: List[dict] = []
    ev_id = 0
    for cls in _CLASS_ORDER:
        for _ in range(counts[cls]):
            o_idx = int(rng.integers(0, len(node_ids)))
            d_idx = int(rng.integers(0, len(node_ids) - 1))
            if d_idx >= o_idx:
                d_idx += 1  # distinct destination without rejection sampling
            soc = float(rng.uniform(lo, hi))
            records.append(
                {
                    "id": ev_id,
                    "class": cls.value,
                    "soc": soc,
                    "origin": node_ids[o_idx],
                    "destination": node_ids[d_idx],
                }
            )
            ev_id += 1
    return records


_EV_FIELDS = {"id", "class", "soc", "origin", "destination"}


def agents_from_records(records: Sequence[dict], net: Optional[TransportNetwork] = None) -> List[EvAgent]:
    agents: List[EvAgent] = []
    seen = set()
    for rec in records:
        unknown = set(rec) - _EV_FIELDS
        if unknown:
            raise SchemaError(f"ev record has unknown fields {sorted(unknown)}")
        missing = _EV_FIELDS - set(rec)
        if missing:
            raise SchemaError(f"ev record is missing fields {sorted(missing)}")
        try:
            cls = PowertrainClass(rec["class"])
        except ValueError:
            raise SchemaError(f"unknown vehicle class {rec['class']!r}") from None
        soc = float(rec["soc"])
        if not (0.0 <= soc <= 1.0):
            raise ValidationError(f"ev {rec['id']}: soc {soc} outside [0, 1]")
        ev_id = int(rec["id"])
        if ev_id in seen:
            raise ValidationError(f"duplicate ev id {ev_id}")
        seen.add(ev_id)
        if net is not None:
            net.node(int(rec["origin"]))
            net.node(int(rec["destination"]))
        cap = usable_capacity(cls)
        agents.append(
            EvAgent(
                id=ev_id,
                ev_class=cls,
                battery=BatteryState(capacity_kwh=cap, energy_kwh=soc * cap),
                origin=int(rec["origin"]),
                destination=int(rec["destination"]),
            )
        )
    return agents


def load_fleet(path: str, net: Optional[TransportNetwork] = None) -> List[EvAgent]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read fleet file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"fleet file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"evs"}:
        raise SchemaError("fleet document must be an object with a single 'evs' array")
    return agents_from_records(doc["evs"], net)


def save_fleet(records: Sequence[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"evs": list(records)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
