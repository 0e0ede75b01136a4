"""Charging stations: margin-based pricing, request admission, regional demand.

A station quotes energy at the bus marginal price marked up by its CPI margin.
Admitted demand per region is capped by a headcount and handed to the grid as
extra load over the one-hour step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError


@dataclass
class ChargingStation:
    id: int
    node: int
    region: int
    cpi_percent: float
    offered_price: Optional[float] = None  # $/kWh, set each pricing round

    def __post_init__(self) -> None:
        if self.cpi_percent < -100.0:
            raise ValidationError(f"station {self.id}: cpi_percent below -100")
        if self.offered_price is not None and self.offered_price < 0:
            raise ValidationError(f"station {self.id}: negative offered price")


@dataclass(frozen=True)
class Region:
    index: int
    bus_id: int
    capacity_evs: int
    station_ids: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.capacity_evs < 0:
            raise ValidationError(f"region {self.index}: negative capacity")


@dataclass(frozen=True)
class ChargingRequest:
    ev_id: int
    station_id: int
    energy_kwh: float
    quoted_price: float  # $/kWh
    trip_cost: float  # full trip cost used for admission ordering
    distance_mi: float = 0.0  # metadata, not used by admission

    def __post_init__(self) -> None:
        if self.energy_kwh < 0:
            raise ValidationError(f"request for ev {self.ev_id}: negative energy")


@dataclass
class RegionDemand:
    region: int
    admitted: List[ChargingRequest]
    rejected: List[ChargingRequest]
    total_kwh: float
    load_mw: float


def offered_price(lmp: float, cpi_percent: float) -> float:
    """$/kWh offered by a station: bus LMP ($/MWh) plus the CPI margin."""
    if lmp < 0:
        raise ValidationError("lmp must be non-negative")
    return (lmp / 1000.0) * (1.0 + cpi_percent / 100.0)


def implied_cpi(price: float, lmp: float) -> float:
    """Inverse of offered_price: recover the margin in percent."""
    base = lmp / 1000.0
    if base <= 0:
        raise ValidationError("lmp must be positive to imply a margin")
    return (price / base - 1.0) * 100.0


def sample_cpi(n_stations: int, seed: int, cpi_range: Tuple[float, float] = (0.0, 12.0)) -> List[float]:
    """Deterministic uniform CPI draws for n_stations."""
    low, high = cpi_range
    if low > high:
        raise ValidationError("cpi range low exceeds high")
    rng = np.random.default_rng(seed)
    return [float(v) for v in rng.uniform(low, high, size=n_stations)]


def admit_and_aggregate(
    requests_by_region: Dict[int, Sequence[ChargingRequest]],
    regions: Sequence[Region],
) -> Dict[int, RegionDemand]:
    """Admit up to capacity_evs requests per region, cheapest trips first.

    Ties break on ev id so the admitted set is deterministic. Every region
    gets a RegionDemand entry even when no one asked to charge there.
    """
    by_index = {r.index: r for r in regions}
    for idx in requests_by_region:
        if idx not in by_index:
            raise ValidationError(f"requests reference unknown region {idx}")
    out: Dict[int, RegionDemand] = {}
    for region in regions:
        reqs = sorted(
            requests_by_region.get(region.index, ()),
            key=lambda r: (r.trip_cost, r.ev_id),
        )
        admitted = list(reqs[: region.capacity_evs])
        rejected = list(reqs[region.capacity_evs:])
        # Sum in ev-id order: the admission sort depends on prices, the
        # aggregate fed to the grid must not.
        total = float(sum(r.energy_kwh for r in sorted(admitted, key=lambda r: r.ev_id)))
        out[region.index] = RegionDemand(
            region=region.index,
            admitted=admitted,
            rejected=rejected,
            total_kwh=total,
            load_mw=total / 1000.0,
        )
    return out
