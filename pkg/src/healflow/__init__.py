"""healflow: a self-healing dataflow runtime with a fault-injection simulator."""

from .core import (Engine, Envelope, FlowGraph, FlowParseError, TimelineLog,
                   VirtualClock, parse_flow, validate_graph)
from .sim import ScenarioScript, Simulation, parse_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "Engine", "Envelope", "FlowGraph", "FlowParseError", "TimelineLog",
    "VirtualClock", "parse_flow", "validate_graph",
    "ScenarioScript", "Simulation", "parse_scenario", "run_scenario",
    "__version__",
]
