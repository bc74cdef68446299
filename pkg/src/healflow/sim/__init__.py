from .scenario import (FAULT_KINDS, FaultEvent, InstanceSpec, ScenarioError,
                       ScenarioScript, WorldSpec, parse_scenario, validate_script)
from .runner import Simulation, apply_fault, run_scenario
from .world import Service, VirtualDevice, World, WORLD_INSTANCE

__all__ = [
    "FAULT_KINDS", "FaultEvent", "InstanceSpec", "ScenarioError", "ScenarioScript",
    "WorldSpec", "parse_scenario", "validate_script",
    "Simulation", "apply_fault", "run_scenario",
    "Service", "VirtualDevice", "World", "WORLD_INSTANCE",
]
