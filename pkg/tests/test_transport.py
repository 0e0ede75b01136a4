import json
import math

import pytest

from gridroute.errors import SchemaError, ValidationError
from gridroute.transport import (
    MILES_PER_METER,
    NodeGeo,
    Segment,
    TrafficClass,
    TransportNetwork,
    generate_synthetic,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
    segment_distance,
    validate_network,
)


class TestSegmentDistance:
    def test_same_point_is_zero(self):
        a = NodeGeo(1, 10.0, 20.0)
        assert segment_distance(a, a, connected=True) == 0.0

    def test_disconnected_is_infinite(self):
        a, b = NodeGeo(1, 0.0, 0.0), NodeGeo(2, 3.0, 4.0)
        assert math.isinf(segment_distance(a, b, connected=False))

    def test_hand_value(self):
        # 3-4-5 triangle scaled to km: 5000 m -> 3.10685 mi
        a, b = NodeGeo(1, 0.0, 0.0), NodeGeo(2, 3000.0, 4000.0)
        assert segment_distance(a, b) == pytest.approx(3.10685, abs=1e-9)

    def test_unit_factor(self):
        assert MILES_PER_METER == pytest.approx(6.2137e-4, rel=0.0)


class TestValidateNetwork:
    def _triangle(self):
        nodes = [
            {"id": 1, "lon_m": 0.0, "lat_m": 0.0},
            {"id": 2, "lon_m": 1000.0, "lat_m": 0.0},
            {"id": 3, "lon_m": 0.0, "lat_m": 1000.0},
        ]
        segs = [
            {"from": 1, "to": 2, "traffic": "normal"},
            {"from": 2, "to": 3, "traffic": "normal"},
            {"from": 3, "to": 1, "traffic": "normal"},
        ]
        return nodes, segs

    def test_clean_triangle(self):
        nodes, segs = self._triangle()
        assert validate_network(nodes, segs, []) == []

    def test_dangling_endpoint(self):
        nodes, segs = self._triangle()
        segs.append({"from": 1, "to": 99, "traffic": "low"})
        report = validate_network(nodes, segs, [])
        assert len(report) == 1
        assert "99" in report[0]

    def test_duplicate_node_id(self):
        nodes, segs = self._triangle()
        nodes.append({"id": 1, "lon_m": 5.0, "lat_m": 5.0})
        report = validate_network(nodes, segs, [])
        assert len(report) == 1
        assert "duplicate" in report[0]


class TestSegmentInvariants:
    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError):
            Segment(1, 1, TrafficClass.LOW, 1.0)

    def test_nonpositive_distance_rejected(self):
        with pytest.raises(ValidationError):
            Segment(1, 2, TrafficClass.LOW, 0.0)
        with pytest.raises(ValidationError):
            Segment(1, 2, TrafficClass.LOW, -1.0)


class TestFileRoundTrip:
    def test_round_trip_preserves_structure(self, tmp_path):
        net = generate_synthetic(12, 20, 4, 2, seed=5)
        p = str(tmp_path / "net.json")
        save_network(net, p)
        again = load_network(p)
        assert network_to_dict(again) == network_to_dict(net)

    def test_unknown_field_rejected(self):
        doc = {
            "nodes": [{"id": 1, "lon_m": 0.0, "lat_m": 0.0, "altitude": 9}],
            "segments": [],
            "stations": [],
        }
        with pytest.raises(SchemaError):
            network_from_dict(doc)

    def test_distance_recomputed_from_coordinates(self):
        doc = {
            "nodes": [
                {"id": 1, "lon_m": 0.0, "lat_m": 0.0},
                {"id": 2, "lon_m": 3000.0, "lat_m": 4000.0},
            ],
            "segments": [{"from": 1, "to": 2, "traffic": "low"}],
            "stations": [],
        }
        net = network_from_dict(doc)
        assert net.segments[0].distance_mi == pytest.approx(3.10685, abs=1e-9)

    def test_bad_json_is_schema_error(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError):
            load_network(str(p))


class TestGenerateSynthetic:
    def test_counts(self):
        net = generate_synthetic(30, 50, 10, 3, seed=11)
        assert len(net.nodes) == 30
        # one undirected road becomes two directed segments
        assert len(net.segments) == 100
        assert len(net.stations) == 10
        assert {s.region for s in net.stations} == {1, 2, 3}

    def test_minimum_spanning_case_is_connected(self):
        net = generate_synthetic(4, 3, 1, 1, seed=7)
        seen = {net.nodes[0].id}
        frontier = [net.nodes[0].id]
        while frontier:
            cur = frontier.pop()
            for s in net.outgoing(cur):
                if s.to_node not in seen:
                    seen.add(s.to_node)
                    frontier.append(s.to_node)
        assert len(seen) == 4

    def test_deterministic(self):
        a = generate_synthetic(25, 40, 8, 4, seed=99)
        b = generate_synthetic(25, 40, 8, 4, seed=99)
        assert network_to_dict(a) == network_to_dict(b)

    def test_different_seeds_differ(self):
        a = generate_synthetic(25, 40, 8, 4, seed=1)
        b = generate_synthetic(25, 40, 8, 4, seed=2)
        assert network_to_dict(a) != network_to_dict(b)

    def test_too_few_segments_rejected(self):
        with pytest.raises(ValidationError):
            generate_synthetic(10, 5, 1, 1, seed=0)

    def test_validates_clean(self):
        net = generate_synthetic(40, 70, 12, 6, seed=3)
        doc = network_to_dict(net)
        assert validate_network(doc["nodes"], doc["segments"], doc["stations"]) == []


class TestNetworkAccessors:
    def test_unknown_node_rejected(self):
        net = generate_synthetic(5, 6, 1, 1, seed=0)
        with pytest.raises(ValidationError):
            net.node(999)

    def test_station_lookup(self):
        net = generate_synthetic(8, 10, 3, 1, seed=4)
        st = net.stations[0]
        assert net.station_by_id(st.id) is st
