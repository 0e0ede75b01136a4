"""Shared builders for the test suite.

Networks are constructed directly from dataclasses so segment lengths can be
exact round numbers; the file loaders (which derive distance from coordinates)
get their own round-trip tests.
"""

import pytest

from gridroute.grid import Bus, Generator, GridCase, Line
from gridroute.stations import ChargingStation
from gridroute.transport import NodeGeo, Segment, TrafficClass, TransportNetwork


def chain_network(dists_mi, traffic=TrafficClass.LOW, stations=(), spacing_m=1000.0):
    """Bidirectional path graph 0-1-...-n with prescribed segment lengths."""
    n = len(dists_mi) + 1
    nodes = [NodeGeo(i, i * spacing_m, 0.0) for i in range(n)]
    segs = []
    for i, d in enumerate(dists_mi):
        segs.append(Segment(i, i + 1, traffic, float(d)))
        segs.append(Segment(i + 1, i, traffic, float(d)))
    return TransportNetwork(nodes, segs, list(stations))


def diamond_network(d_short, d_long, t_short, t_long):
    """0 -> {1 short, 2 long} -> 3, both directions."""
    nodes = [
        NodeGeo(0, 0.0, 0.0),
        NodeGeo(1, 1000.0, 1000.0),
        NodeGeo(2, 1000.0, -1000.0),
        NodeGeo(3, 2000.0, 0.0),
    ]
    half_s, half_l = d_short / 2.0, d_long / 2.0
    segs = []
    for a, b, d, t in [
        (0, 1, half_s, t_short), (1, 3, half_s, t_short),
        (0, 2, half_l, t_long), (2, 3, half_l, t_long),
    ]:
        segs.append(Segment(a, b, t, d))
        segs.append(Segment(b, a, t, d))
    return TransportNetwork(nodes, segs, [])


def two_bus_congested_case():
    """Cheap generator behind a 50 MW line; hand-solved KKT oracle.

    Load 100 at bus 2, line limit 50: P = (50, 50), LMP = (15, 40).
    """
    return GridCase(
        buses=[Bus(1, 0.0), Bus(2, 100.0)],
        generators=[
            Generator(bus=1, a=0.0, b=10.0, c=0.05, pmin=0.0, pmax=200.0),
            Generator(bus=2, a=0.0, b=30.0, c=0.10, pmin=0.0, pmax=200.0),
        ],
        lines=[Line(1, 2, susceptance=10.0, fmax=50.0)],
        slack_bus=1,
    )


def one_bus_case():
    return GridCase(
        buses=[Bus(1, 50.0)],
        generators=[Generator(bus=1, a=0.0, b=10.0, c=0.1, pmin=0.0, pmax=100.0)],
        lines=[],
        slack_bus=1,
    )


def station(sid, node, region=1, cpi=0.0, price=None):
    return ChargingStation(id=sid, node=node, region=region, cpi_percent=cpi, offered_price=price)


@pytest.fixture
def tmp_json(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return _write
