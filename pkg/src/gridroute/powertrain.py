"""Vehicle powertrain models: efficiency lookup, per-segment cost, battery bookkeeping.

Efficiencies are certification-style aggregates per driving cycle. CD (charge
depleting) runs on battery in mi/kWh, CS (charge sustaining) on gasoline in
mi/gal. BEVs have no CS mode.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .errors import ValidationError


class DriveCycle(str, enum.Enum):
    HWFET = "HWFET"
    UDDS = "UDDS"
    NYC = "NYC"


class PowertrainClass(str, enum.Enum):
    PHEV20 = "PHEV20"
    PHEV40 = "PHEV40"
    PHEV60 = "PHEV60"
    BEV100 = "BEV100"

    @property
    def rated_range_miles(self) -> float:
        return float(self.value[-3:] if self is PowertrainClass.BEV100 else self.value[-2:])

    @property
    def is_bev(self) -> bool:
        return self is PowertrainClass.BEV100


class ChargePolicy(str, enum.Enum):
    FILL_TO_FULL = "fill_to_full"
    FILL_TO_NEED = "fill_to_need"


# Electric efficiency, mi/kWh, by (class, cycle).
MU_CD = {
    (PowertrainClass.PHEV20, DriveCycle.HWFET): 5.7,
    (PowertrainClass.PHEV20, DriveCycle.UDDS): 6.2,
    (PowertrainClass.PHEV20, DriveCycle.NYC): 4.2,
    (PowertrainClass.PHEV40, DriveCycle.HWFET): 5.7,
    (PowertrainClass.PHEV40, DriveCycle.UDDS): 6.0,
    (PowertrainClass.PHEV40, DriveCycle.NYC): 4.1,
    (PowertrainClass.PHEV60, DriveCycle.HWFET): 5.6,
    (PowertrainClass.PHEV60, DriveCycle.UDDS): 5.7,
    (PowertrainClass.PHEV60, DriveCycle.NYC): 3.8,
    (PowertrainClass.BEV100, DriveCycle.HWFET): 4.8,
    (PowertrainClass.BEV100, DriveCycle.UDDS): 5.2,
    (PowertrainClass.BEV100, DriveCycle.NYC): 3.1,
}

# Gasoline efficiency, mi/gal, by (class, cycle). No BEV entries by design.
MU_CS = {
    (PowertrainClass.PHEV20, DriveCycle.HWFET): 58.6,
    (PowertrainClass.PHEV20, DriveCycle.UDDS): 69.4,
    (PowertrainClass.PHEV20, DriveCycle.NYC): 45.7,
    (PowertrainClass.PHEV40, DriveCycle.HWFET): 58.2,
    (PowertrainClass.PHEV40, DriveCycle.UDDS): 68.0,
    (PowertrainClass.PHEV40, DriveCycle.NYC): 43.1,
    (PowertrainClass.PHEV60, DriveCycle.HWFET): 57.8,
    (PowertrainClass.PHEV60, DriveCycle.UDDS): 65.8,
    (PowertrainClass.PHEV60, DriveCycle.NYC): 40.3,
}

# Cycle used to turn a rated electric range into a usable battery size.
CAPACITY_REFERENCE_CYCLE = DriveCycle.UDDS

ZERO_TOL = 1e-12


def efficiency(ev_class: PowertrainClass, mode: str, cycle: DriveCycle) -> float:
    """Return mi/kWh for mode 'CD' or mi/gal for mode 'CS'."""
    if mode == "CD":
        return MU_CD[(ev_class, cycle)]
    if mode == "CS":
        if ev_class.is_bev:
            raise ValidationError("BEV100 has no charge-sustaining mode")
        return MU_CS[(ev_class, cycle)]
    raise ValidationError(f"unknown powertrain mode {mode!r}")


def usable_capacity(ev_class: PowertrainClass, cycle: DriveCycle = CAPACITY_REFERENCE_CYCLE) -> float:
    """Usable battery in kWh: rated electric range divided by CD efficiency."""
    return ev_class.rated_range_miles / MU_CD[(ev_class, cycle)]


@dataclass
class BatteryState:
    capacity_kwh: float
    energy_kwh: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.energy_kwh <= self.capacity_kwh + 1e-9):
            raise ValidationError(
                f"battery energy {self.energy_kwh} outside [0, {self.capacity_kwh}]"
            )


@dataclass(frozen=True)
class EnergyPrices:
    p_ele: float  # $/kWh
    p_gas: float  # $/gal

    def __post_init__(self) -> None:
        if self.p_ele < 0 or self.p_gas < 0:
            raise ValidationError("energy prices must be non-negative")


@dataclass
class EvAgent:
    id: int
    ev_class: PowertrainClass
    battery: BatteryState
    origin: int
    destination: int
    plan: Optional[object] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.origin == self.destination:
            raise ValidationError(f"ev {self.id}: origin equals destination")


def segment_cost(ev_class: PowertrainClass, entry_energy: float, seg, prices: EnergyPrices) -> float:
    """Dollar cost of driving one segment entered with the given battery energy.

    PHEVs deplete the battery first and finish on gasoline once it is empty;
    the blended middle case spends exactly entry_energy on electricity. BEVs
    must have enough charge, anything less is a caller bug.
    """
    cycle = seg.traffic.cycle
    d = seg.distance_mi
    mu_cd = MU_CD[(ev_class, cycle)]
    electric_need = d / mu_cd

    if ev_class.is_bev:
        if entry_energy < electric_need - 1e-9:
            raise ValidationError(
                f"BEV cannot cover segment needing {electric_need:.4f} kWh "
                f"with {entry_energy:.4f} kWh"
            )
        return prices.p_ele * electric_need

    if entry_energy <= ZERO_TOL:
        return prices.p_gas * d / MU_CS[(ev_class, cycle)]
    if entry_energy >= electric_need:
        return prices.p_ele * electric_need
    # Battery dies mid-segment: electric part uses all of entry_energy,
    # the remaining miles run on gasoline.
    gas_miles = d - mu_cd * entry_energy
    return prices.p_ele * entry_energy + prices.p_gas * gas_miles / MU_CS[(ev_class, cycle)]


def energy_after(entry_energy: float, seg, ev_class: PowertrainClass) -> float:
    """Battery energy on leaving the segment, clamped at zero."""
    need = seg.distance_mi / MU_CD[(ev_class, seg.traffic.cycle)]
    return max(0.0, entry_energy - need)


def required_charge(ev: EvAgent, policy: ChargePolicy, remaining_trip_energy: float) -> float:
    """kWh to buy at a stop under the given policy."""
    if remaining_trip_energy < 0:
        raise ValidationError("remaining_trip_energy must be non-negative")
    headroom = ev.battery.capacity_kwh - ev.battery.energy_kwh
    if policy is ChargePolicy.FILL_TO_FULL:
        return headroom
    return min(headroom, max(0.0, remaining_trip_energy - ev.battery.energy_kwh))
