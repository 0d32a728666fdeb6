"""Deterministic shared-ridehailing simulator and matching library.

Riders request trips on a road network; every ``delta_s`` seconds a dispatcher
pairs compatible requests, schedules pickup/dropoff orderings inside each
rider's time windows, and places pairs on two-seat vehicles so that total
vehicle travel-time saving is maximized. Dispatch runs either centralized
(one matcher sees everything) or distributed across intersection agents that
only see vehicles within a bounded hop radius and must resolve conflicting
proposals among themselves. A second-resolution traffic loop moves vehicles
over congestible links and produces the event log the indicators are computed
from.
"""

from .config import ScenarioConfig, load_config
from .demand import Rider, Vehicle, generate_demand, load_od_file, seed_fleet
from .metrics import compute_indicators, run_sweep
from .network import RoadNetwork, generate_grid, load_network, write_network
from .sim import RunResult, Simulation, run_scenario

__version__ = "0.1.0"

__all__ = [
    "RoadNetwork", "generate_grid", "load_network", "write_network",
    "Rider", "Vehicle", "generate_demand", "load_od_file", "seed_fleet",
    "ScenarioConfig", "load_config",
    "Simulation", "RunResult", "run_scenario",
    "compute_indicators", "run_sweep",
    "__version__",
]
