"""Coupled simulation of an electrified road network and a power grid.

Per-vehicle least-cost routing picks charging stations, admitted charging
demand lands on grid buses, a DC optimal power flow prices it, and station
tariffs feed back into the next routing round.
"""

__version__ = "0.1.0"

from .coordinator import ScenarioConfig, ScenarioReport, compare_reports, run_scenario
from .grid import GridCase, bundled_case, load_case, solve_dcopf
from .powertrain import ChargePolicy, EvAgent, PowertrainClass
from .routing import least_cost_path, plan_with_charging
from .stations import offered_price, sample_cpi
from .transport import TransportNetwork, generate_synthetic, load_network

__all__ = [
    "__version__",
    "ScenarioConfig",
    "ScenarioReport",
    "compare_reports",
    "run_scenario",
    "GridCase",
    "bundled_case",
    "load_case",
    "solve_dcopf",
    "ChargePolicy",
    "EvAgent",
    "PowertrainClass",
    "least_cost_path",
    "plan_with_charging",
    "offered_price",
    "sample_cpi",
    "TransportNetwork",
    "generate_synthetic",
    "load_network",
]
