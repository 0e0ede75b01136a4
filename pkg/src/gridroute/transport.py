"""Road network model: nodes with projected coordinates, directed segments,
traffic classes, distance computation, validation, synthetic generation, and
the network file format (which also carries the charging stations).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import SchemaError, ValidationError
from .powertrain import DriveCycle
from .stations import ChargingStation

# Projected coordinates are meters; route distances are miles.
MILES_PER_METER = 6.2137e-4

# Alternate factor for datasets whose coordinates are in 100 km units.
SCALE_MILES_PER_100KM = 62.137

INFEASIBLE_DISTANCE = math.inf


class TrafficClass(str, enum.Enum):
    LOW = "low"
    NORMAL = "normal"
    HEAVY = "heavy"

    @property
    def cycle(self) -> DriveCycle:
        return _TRAFFIC_CYCLE[self]


# Congestion level decides which certification cycle applies.
_TRAFFIC_CYCLE = {
    TrafficClass.LOW: DriveCycle.HWFET,
    TrafficClass.NORMAL: DriveCycle.UDDS,
    TrafficClass.HEAVY: DriveCycle.NYC,
}


@dataclass(frozen=True)
class NodeGeo:
    id: int
    lon_m: float
    lat_m: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lon_m) and math.isfinite(self.lat_m)):
            raise ValidationError(f"node {self.id}: non-finite coordinates")


@dataclass(frozen=True)
class Segment:
    from_node: int
    to_node: int
    traffic: TrafficClass
    distance_mi: float

    def __post_init__(self) -> None:
        if self.from_node == self.to_node:
            raise ValidationError(f"segment {self.from_node}->{self.to_node} is a self-loop")
        if not (self.distance_mi > 0 and math.isfinite(self.distance_mi)):
            raise ValidationError(
                f"segment {self.from_node}->{self.to_node}: distance must be positive and finite"
            )


def segment_distance(a: NodeGeo, b: NodeGeo, connected: bool = True) -> float:
    """Straight-line distance in miles, or infinity for unconnected pairs."""
    if not connected:
        return INFEASIBLE_DISTANCE
    return MILES_PER_METER * math.hypot(a.lon_m - b.lon_m, a.lat_m - b.lat_m)


@dataclass
class TransportNetwork:
    nodes: List[NodeGeo]
    segments: List[Segment]
    stations: List[ChargingStation] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._by_id: Dict[int, NodeGeo] = {}
        for node in self.nodes:
            if node.id in self._by_id:
                raise ValidationError(f"duplicate node id {node.id}")
            self._by_id[node.id] = node
        self._adj: Dict[int, List[Segment]] = {n.id: [] for n in self.nodes}
        for seg in self.segments:
            if seg.from_node not in self._by_id or seg.to_node not in self._by_id:
                raise ValidationError(
                    f"segment {seg.from_node}->{seg.to_node} references a missing node"
                )
            self._adj[seg.from_node].append(seg)
        for st in self.stations:
            if st.node not in self._by_id:
                raise ValidationError(f"station {st.id} sits on missing node {st.node}")

    def node(self, node_id: int) -> NodeGeo:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise ValidationError(f"unknown node id {node_id}") from None

    def has_node(self, node_id: int) -> bool:
        return node_id in self._by_id

    def outgoing(self, node_id: int) -> Sequence[Segment]:
        return self._adj.get(node_id, ())

    @property
    def station_nodes(self) -> Set[int]:
        return {st.node for st in self.stations}

    def station_by_id(self, station_id: int) -> ChargingStation:
        for st in self.stations:
            if st.id == station_id:
                return st
        raise ValidationError(f"unknown station id {station_id}")


def validate_network(nodes: Sequence[dict], segments: Sequence[dict], stations: Sequence[dict]) -> List[str]:
    """Collect invariant violations from raw record dicts; empty means clean.

    Violations are data, not exceptions, so callers can report all of them
    at once.
    """
    problems: List[str] = []
    seen_ids: Set[int] = set()
    for rec in nodes:
        nid = rec.get("id")
        if nid in seen_ids:
            problems.append(f"duplicate node id {nid}")
        seen_ids.add(nid)
        for key in ("lon_m", "lat_m"):
            v = rec.get(key)
            if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
                problems.append(f"node {nid}: {key} not finite")
    for rec in segments:
        u, v = rec.get("from"), rec.get("to")
        if u == v:
            problems.append(f"segment {u}->{v} is a self-loop")
        if u not in seen_ids:
            problems.append(f"segment {u}->{v}: dangling endpoint {u}")
        if v not in seen_ids:
            problems.append(f"segment {u}->{v}: dangling endpoint {v}")
    for rec in stations:
        if rec.get("node") not in seen_ids:
            problems.append(f"station {rec.get('id')}: dangling node {rec.get('node')}")
    return problems


_NODE_FIELDS = {"id", "lon_m", "lat_m"}
_SEGMENT_FIELDS = {"from", "to", "traffic"}
_STATION_FIELDS = {"id", "node", "region", "cpi_percent"}


def _check_fields(rec: dict, allowed: Set[int], kind: str) -> None:
    unknown = set(rec) - allowed
    if unknown:
        raise SchemaError(f"{kind} record has unknown fields {sorted(unknown)}")
    missing = allowed - set(rec)
    if missing:
        raise SchemaError(f"{kind} record is missing fields {sorted(missing)}")


def network_from_dict(doc: dict) -> TransportNetwork:
    if not isinstance(doc, dict):
        raise SchemaError("network document must be an object")
    unknown = set(doc) - {"nodes", "segments", "stations"}
    if unknown:
        raise SchemaError(f"network document has unknown sections {sorted(unknown)}")
    raw_nodes = doc.get("nodes", [])
    raw_segments = doc.get("segments", [])
    raw_stations = doc.get("stations", [])
    for rec in raw_nodes:
        _check_fields(rec, _NODE_FIELDS, "node")
    for rec in raw_segments:
        _check_fields(rec, _SEGMENT_FIELDS, "segment")
    for rec in raw_stations:
        _check_fields(rec, _STATION_FIELDS, "station")

    problems = validate_network(raw_nodes, raw_segments, raw_stations)
    if problems:
        raise ValidationError("; ".join(problems))

    nodes = [NodeGeo(int(r["id"]), float(r["lon_m"]), float(r["lat_m"])) for r in raw_nodes]
    by_id = {n.id: n for n in nodes}
    segments = []
    for r in raw_segments:
        try:
            traffic = TrafficClass(r["traffic"])
        except ValueError:
            raise SchemaError(f"unknown traffic class {r['traffic']!r}") from None
        a, b = by_id[int(r["from"])], by_id[int(r["to"])]
        segments.append(
            Segment(a.id, b.id, traffic, segment_distance(a, b))
        )
    stations = [
        ChargingStation(int(r["id"]), int(r["node"]), int(r["region"]), float(r["cpi_percent"]))
        for r in raw_stations
    ]
    return TransportNetwork(nodes, segments, stations)


def network_to_dict(net: TransportNetwork) -> dict:
    return {
        "nodes": [{"id": n.id, "lon_m": n.lon_m, "lat_m": n.lat_m} for n in net.nodes],
        "segments": [
            {"from": s.from_node, "to": s.to_node, "traffic": s.traffic.value}
            for s in net.segments
        ],
        "stations": [
            {"id": st.id, "node": st.node, "region": st.region, "cpi_percent": st.cpi_percent}
            for st in net.stations
        ],
    }


def load_network(path: str) -> TransportNetwork:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read network file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"network file {path} is not valid JSON: {exc}") from exc
    return network_from_dict(doc)


def save_network(net: TransportNetwork, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh, indent=2, sort_keys=True)
        fh.write("\n")


def generate_synthetic(
    n_nodes: int,
    n_segments: int,
    n_stations: int,
    n_regions: int,
    seed: int,
    span_m: float = 100_000.0,
    traffic_probs: Tuple[float, float, float] = (0.2, 0.5, 0.3),
    cpi_range: Tuple[float, float] = (0.0, 12.0),
) -> TransportNetwork:
    """Deterministic synthetic road network with stations in regional clusters.

    n_segments counts undirected roads; every road is emitted as two directed
    segments with independently drawn traffic, since congestion is rarely
    symmetric. The graph is weakly connected by construction.
    """
    if n_nodes < 2:
        raise ValidationError("need at least two nodes")
    if n_segments < n_nodes - 1:
        raise ValidationError("n_segments below spanning-tree minimum")
    if n_segments > n_nodes * (n_nodes - 1) // 2:
        raise ValidationError("n_segments exceeds simple-graph maximum")
    if n_stations > n_nodes:
        raise ValidationError("more stations than nodes")
    if n_regions < 1:
        raise ValidationError("need at least one region")
    if 0 < n_stations < n_regions:
        raise ValidationError("fewer stations than regions")

    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, span_m, size=n_nodes)
    ys = rng.uniform(0.0, span_m, size=n_nodes)
    nodes = [NodeGeo(i, float(xs[i]), float(ys[i])) for i in range(n_nodes)]

    # Random spanning tree keeps the graph connected.
    roads: Set[Tuple[int, int]] = set()
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))
        roads.add((min(i, j), max(i, j)))

    # Extra roads go to geographically near pairs so the map stays road-like.
    coords = np.stack([xs, ys], axis=1)
    k_near = min(8, n_nodes - 1)
    order = np.argsort(
        np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=2), axis=1
    )
    attempts = 0
    while len(roads) < n_segments:
        attempts += 1
        if attempts > 200 * n_segments:
            raise ValidationError("could not place the requested number of roads")
        u = int(rng.integers(0, n_nodes))
        ranked = [int(v) for v in order[u][1 : k_near + 1]]
        v = ranked[int(rng.integers(0, len(ranked)))]
        if attempts > 50 * n_segments:
            # Dense request: fall back to arbitrary pairs.
            v = int(rng.integers(0, n_nodes))
            if v == u:
                continue
        roads.add((min(u, v), max(u, v)))

    classes = [TrafficClass.HEAVY, TrafficClass.NORMAL, TrafficClass.LOW]
    probs = np.asarray(traffic_probs, dtype=float)
    if probs.shape != (3,) or abs(probs.sum() - 1.0) > 1e-9 or (probs < 0).any():
        raise ValidationError("traffic_probs must be three non-negative shares summing to 1")
    segments: List[Segment] = []
    by_id = {n.id: n for n in nodes}
    for u, v in sorted(roads):
        for a, b in ((u, v), (v, u)):
            traffic = classes[int(rng.choice(3, p=probs))]
            segments.append(Segment(a, b, traffic, segment_distance(by_id[a], by_id[b])))

    stations: List[ChargingStation] = []
    if n_stations > 0:
        chosen = sorted(int(i) for i in rng.choice(n_nodes, size=n_stations, replace=False))
        # Contiguous regions: sweep station nodes by angle around the centroid
        # and cut the sweep into n_regions consecutive arcs.
        cx = float(np.mean([xs[i] for i in chosen]))
        cy = float(np.mean([ys[i] for i in chosen]))
        by_angle = sorted(chosen, key=lambda i: (math.atan2(ys[i] - cy, xs[i] - cx), i))
        base, extra = divmod(n_stations, n_regions)
        low, high = cpi_range
        if low > high:
            raise ValidationError("cpi range low exceeds high")
        cursor = 0
        sid = 1
        for region in range(1, n_regions + 1):
            size = base + (1 if region <= extra else 0)
            for node_id in by_angle[cursor : cursor + size]:
                cpi = float(rng.uniform(low, high))
                stations.append(ChargingStation(sid, node_id, region, cpi))
                sid += 1
            cursor += size

    return TransportNetwork(nodes, segments, stations)
