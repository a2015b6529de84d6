"""Constrained output consensus of linear agents via invariant sets and reference governors."""

from .errors import RgError
from .governor import ReferenceGovernor
from .mcai import McaiSet, compute_mcai
from .network import GraphSchedule, WeightedDigraph
from .polytope import HPolytope
from .regulator import AgentModel, ReferenceModel, solve_regulator
from .simulator import Scenario, SimTrace, metrics, run

__all__ = [
    "AgentModel",
    "GraphSchedule",
    "HPolytope",
    "McaiSet",
    "ReferenceGovernor",
    "ReferenceModel",
    "RgError",
    "Scenario",
    "SimTrace",
    "WeightedDigraph",
    "compute_mcai",
    "metrics",
    "run",
    "solve_regulator",
]
