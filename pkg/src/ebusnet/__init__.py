"""Electric bus network charging scheduling and real-time control."""

from .model import (
    AtStop,
    BusSnapshot,
    ConfigError,
    LineSpec,
    NetworkConfig,
    OnLink,
    Params,
    WorldState,
    charge_seconds_for,
    dwell_time,
    link_energy,
    soc_after_charge,
    soc_after_link,
    soc_target,
)
from .lp import LpResult, SimplexWorkspace, solve_lp
from .bnb import SolveResult, solve_milp
from .milp import MilpProblem, ModelBuilder

__all__ = [
    "AtStop", "BusSnapshot", "ConfigError", "LineSpec", "NetworkConfig",
    "OnLink", "Params", "WorldState", "charge_seconds_for", "dwell_time",
    "link_energy", "soc_after_charge", "soc_after_link", "soc_target",
    "LpResult", "SimplexWorkspace", "solve_lp",
    "SolveResult", "solve_milp",
    "MilpProblem", "ModelBuilder",
]

__version__ = "0.1.0"
