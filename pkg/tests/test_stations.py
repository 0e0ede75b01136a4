import pytest

from gridroute.errors import ValidationError
from gridroute.stations import (
    ChargingRequest,
    Region,
    admit_and_aggregate,
    implied_cpi,
    offered_price,
    sample_cpi,
)


class TestOfferedPrice:
    def test_zero_margin_passes_lmp_through(self):
        # 50 $/MWh = 5 cents/kWh
        assert offered_price(50.0, 0.0) == pytest.approx(0.05, abs=1e-15)

    def test_positive_margin(self):
        assert offered_price(50.0, 10.8) == pytest.approx(0.0554, abs=1e-12)

    def test_full_rebate_floor(self):
        assert offered_price(50.0, -100.0) == 0.0

    def test_negative_lmp_rejected(self):
        with pytest.raises(ValidationError):
            offered_price(-1.0, 0.0)

    def test_round_trip(self):
        for cpi in (-12.0, 0.0, 3.7, 11.3):
            p = offered_price(81.25, cpi)
            assert implied_cpi(p, 81.25) == pytest.approx(cpi, abs=1e-9)

    def test_implied_cpi_needs_positive_lmp(self):
        with pytest.raises(ValidationError):
            implied_cpi(0.05, 0.0)


class TestSampleCpi:
    def test_deterministic(self):
        assert sample_cpi(50, seed=9) == sample_cpi(50, seed=9)

    def test_within_range(self):
        vals = sample_cpi(200, seed=1, cpi_range=(0.0, 12.0))
        assert len(vals) == 200
        assert all(0.0 <= v <= 12.0 for v in vals)

    def test_degenerate_range(self):
        assert sample_cpi(5, seed=3, cpi_range=(5.0, 5.0)) == [5.0] * 5

    def test_inverted_range_rejected(self):
        with pytest.raises(ValidationError):
            sample_cpi(5, seed=3, cpi_range=(6.0, 5.0))


def _req(ev_id, kwh, cost=1.0, station=1):
    return ChargingRequest(
        ev_id=ev_id, station_id=station, energy_kwh=kwh, quoted_price=0.05, trip_cost=cost
    )


class TestAdmitAndAggregate:
    REGION = Region(index=1, bus_id=5, capacity_evs=500, station_ids=(1,))

    def test_zero_requests(self):
        out = admit_and_aggregate({}, [self.REGION])
        assert out[1].total_kwh == 0.0
        assert out[1].load_mw == 0.0
        assert out[1].admitted == []

    def test_aggregation_arithmetic(self):
        out = admit_and_aggregate({1: [_req(1, 10.0), _req(2, 5.0)]}, [self.REGION])
        assert out[1].total_kwh == pytest.approx(15.0, abs=1e-12)
        assert out[1].load_mw == pytest.approx(0.015, abs=1e-15)

    def test_capacity_rations_to_500(self):
        reqs = [_req(i, 1.0, cost=float(i)) for i in range(501)]
        out = admit_and_aggregate({1: reqs}, [self.REGION])
        assert len(out[1].admitted) == 500
        assert len(out[1].rejected) == 1
        # the costliest trip is the one turned away
        assert out[1].rejected[0].ev_id == 500

    def test_admission_prefers_cheap_trips_then_low_ids(self):
        region = Region(index=1, bus_id=5, capacity_evs=2, station_ids=(1,))
        reqs = [_req(3, 1.0, cost=0.5), _req(1, 1.0, cost=0.9), _req(2, 1.0, cost=0.5)]
        out = admit_and_aggregate({1: reqs}, [region])
        assert [r.ev_id for r in out[1].admitted] == [2, 3]
        assert [r.ev_id for r in out[1].rejected] == [1]

    def test_total_kwh_permutation_invariant(self):
        kwhs = [0.1 + 0.37 * i for i in range(40)]
        a = admit_and_aggregate(
            {1: [_req(i, k, cost=float(i)) for i, k in enumerate(kwhs)]}, [self.REGION]
        )
        b = admit_and_aggregate(
            {1: [_req(i, k, cost=float(-i)) for i, k in enumerate(kwhs)]}, [self.REGION]
        )
        # same admitted set in both orders -> bit-identical aggregate
        assert a[1].total_kwh == b[1].total_kwh

    def test_unknown_region_rejected(self):
        with pytest.raises(ValidationError):
            admit_and_aggregate({9: [_req(1, 1.0)]}, [self.REGION])

    def test_every_region_reported(self):
        r2 = Region(index=2, bus_id=7, capacity_evs=10, station_ids=(2,))
        out = admit_and_aggregate({1: [_req(1, 2.0)]}, [self.REGION, r2])
        assert set(out) == {1, 2}
        assert out[2].total_kwh == 0.0
