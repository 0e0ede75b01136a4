import json

import pytest

from gridroute.errors import SchemaError, ValidationError
from gridroute.fleet import (
    agents_from_records,
    class_counts,
    generate_fleet,
    load_fleet,
    save_fleet,
)
from gridroute.powertrain import PowertrainClass, usable_capacity
from gridroute.transport import generate_synthetic


class TestClassCounts:
    def test_paper_scale_split(self):
        counts = class_counts(45000)
        assert counts == {
            PowertrainClass.PHEV20: 7200,
            PowertrainClass.PHEV40: 7200,
            PowertrainClass.PHEV60: 7200,
            PowertrainClass.BEV100: 23400,
        }

    def test_counts_sum_to_n(self):
        for n in (0, 1, 7, 499, 500, 501, 45000):
            assert sum(class_counts(n).values()) == n

    def test_mix_must_sum_to_one(self):
        mix = {
            PowertrainClass.PHEV20: 0.5,
            PowertrainClass.PHEV40: 0.0,
            PowertrainClass.PHEV60: 0.0,
            PowertrainClass.BEV100: 0.4,
        }
        with pytest.raises(ValidationError):
            class_counts(10, mix=mix)

    def test_custom_mix(self):
        mix = {
            PowertrainClass.PHEV20: 0.5,
            PowertrainClass.PHEV40: 0.0,
            PowertrainClass.PHEV60: 0.0,
            PowertrainClass.BEV100: 0.5,
        }
        counts = class_counts(10, mix=mix)
        assert counts[PowertrainClass.PHEV20] == 5
        assert counts[PowertrainClass.PHEV40] == 0
        assert counts[PowertrainClass.BEV100] == 5


@pytest.fixture(scope="module")
def gen_net():
    return generate_synthetic(20, 30, 5, 2, seed=8)


@pytest.fixture(scope="module")
def file_net():
    return generate_synthetic(15, 25, 4, 2, seed=3)


class TestGenerateFleet:
    def test_deterministic(self, gen_net):
        net = gen_net
        a = generate_fleet(100, net, seed=4)
        b = generate_fleet(100, net, seed=4)
        assert a == b

    def test_origin_destination_distinct(self, gen_net):
        net = gen_net
        node_ids = {n.id for n in net.nodes}
        for rec in generate_fleet(200, net, seed=5):
            assert rec["origin"] != rec["destination"]
            assert rec["origin"] in node_ids
            assert rec["destination"] in node_ids

    def test_soc_within_range(self, gen_net):
        net = gen_net
        for rec in generate_fleet(200, net, soc_range=(0.2, 0.9), seed=6):
            assert 0.2 <= rec["soc"] <= 0.9

    def test_empty_fleet(self, gen_net):
        net = gen_net
        assert generate_fleet(0, net, seed=1) == []

    def test_ids_are_sequential(self, gen_net):
        net = gen_net
        recs = generate_fleet(50, net, seed=2)
        assert [r["id"] for r in recs] == list(range(50))


class TestAgentsAndFiles:
    def test_agents_scale_battery_by_soc(self, file_net):
        net = file_net
        recs = generate_fleet(30, net, seed=7)
        agents = agents_from_records(recs, net)
        by_id = {r["id"]: r for r in recs}
        for ag in agents:
            cap = usable_capacity(ag.ev_class)
            assert ag.battery.capacity_kwh == pytest.approx(cap, abs=1e-12)
            assert ag.battery.energy_kwh == pytest.approx(by_id[ag.id]["soc"] * cap, abs=1e-12)

    def test_duplicate_id_rejected(self, file_net):
        net = file_net
        recs = generate_fleet(2, net, seed=7)
        recs[1]["id"] = recs[0]["id"]
        with pytest.raises(ValidationError):
            agents_from_records(recs, net)

    def test_unknown_class_rejected(self, file_net):
        net = file_net
        recs = generate_fleet(1, net, seed=7)
        recs[0]["class"] = "BEV9000"
        with pytest.raises(SchemaError):
            agents_from_records(recs, net)

    def test_unknown_field_rejected(self, file_net):
        net = file_net
        recs = generate_fleet(1, net, seed=7)
        recs[0]["color"] = "red"
        with pytest.raises(SchemaError):
            agents_from_records(recs, net)

    def test_origin_not_in_network_rejected(self, file_net):
        net = file_net
        recs = generate_fleet(1, net, seed=7)
        recs[0]["origin"] = 999
        with pytest.raises(ValidationError):
            agents_from_records(recs, net)

    def test_file_round_trip(self, file_net, tmp_path):
        net = file_net
        recs = generate_fleet(25, net, seed=9)
        p = str(tmp_path / "fleet.json")
        save_fleet(recs, p)
        agents = load_fleet(p, net)
        assert len(agents) == 25
        raw = json.load(open(p))
        assert set(raw) == {"evs"}
        assert raw["evs"] == recs
