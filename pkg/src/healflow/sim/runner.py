"""Co-simulator: all instances, devices, broker and faults on one clock."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from ..cluster import LoopbackTransport
from ..core.clock import VirtualClock
from ..core.engine import Engine
from ..core.graph import FlowGraph
from ..core.timeline import TimelineLog
from ..persistence import Store
from .scenario import FaultEvent, InstanceSpec, ScenarioError, ScenarioScript, validate_script
from .world import RANK_FAULT, RANK_INSTANCE_BASE, WORLD_INSTANCE, World


def apply_fault(fault: FaultEvent, world: World) -> None:
    """Mutate the world for one device/service/link fault.

    Instance faults are handled by the Simulation, which owns the engines.
    """
    if fault.kind == "device_offline":
        world.set_device_online(fault.target, False)
    elif fault.kind == "device_online":
        world.set_device_online(fault.target, True)
    elif fault.kind == "service_down":
        world.set_service_up(fault.target, False)
    elif fault.kind == "service_up":
        world.set_service_up(fault.target, True)
    elif fault.kind == "net_delay":
        world.delays[fault.target] = fault.params.get("delay_ms", 0)
    elif fault.kind == "stuck_value":
        world.devices[fault.target].stuck = fault.params.get("value")
    elif fault.kind == "value_noise":
        world.devices[fault.target].extra_noise = fault.params.get("amp", 0.0)
    else:
        raise ScenarioError(f"fault kind {fault.kind!r} is not world-level")


class Simulation:
    """One scenario run: flows per instance, scripted faults, merged timeline."""

    def __init__(self, flows: list[FlowGraph], script: ScenarioScript, *,
                 seed: Optional[int] = None, store_dir: Optional[str] = None):
        self.script = script
        self.seed = script.seed if seed is None else seed
        self.flows = flows

        self.instances = list(script.world.instances)
        if not self.instances:
            self.instances = [InstanceSpec(f"instance-{i}", f"10.0.0.{i + 1}")
                              for i in range(len(flows))]
        if len(self.instances) != len(flows):
            raise ScenarioError(
                f"{len(flows)} flow document(s) for {len(self.instances)} declared instance(s)")
        validate_script(script, extra_instances=tuple(i.name for i in self.instances))

        self.clock = VirtualClock()
        self.log = TimelineLog()
        self.world = World(self.clock, self.log, seed=self.seed,
                           devices=script.world.devices, services=script.world.services)
        self.transport = LoopbackTransport(self.clock)

        base = Path(store_dir) if store_dir else None
        if base is not None:
            base.mkdir(parents=True, exist_ok=True)
        self.stores = {
            spec.name: Store(base / f"{spec.name}.store" if base else None)
            for spec in self.instances
        }
        self.engines = {spec.name: self._build_engine(i) for i, spec in enumerate(self.instances)}

    def _build_engine(self, index: int) -> Engine:
        spec = self.instances[index]
        return Engine(self.flows[index], instance=spec.name, address=spec.address,
                      seed=self.seed, clock=self.clock, log=self.log,
                      store=self.stores[spec.name], world=self.world,
                      transport=self.transport, rank=RANK_INSTANCE_BASE + index)

    def run(self) -> TimelineLog:
        for event in self.script.events:
            self.clock.at(event.at, lambda e=event: self._apply(e), rank=RANK_FAULT)
        self.world.start_devices()
        for name in self.engines:
            self.engines[name].start()
        self.clock.run_until(self.script.duration)
        return self.log

    def _apply(self, fault: FaultEvent) -> None:
        self.log.add(self.clock.now, WORLD_INSTANCE, "fault", fault.target,
                     value={"kind": fault.kind, **({"params": fault.params}
                                                   if fault.params else {})})
        if fault.kind == "instance_crash":
            self.engines[fault.target].halt()
        elif fault.kind == "instance_restart":
            index = next(i for i, s in enumerate(self.instances) if s.name == fault.target)
            self.engines[fault.target].halt()
            engine = self._build_engine(index)
            self.engines[fault.target] = engine
            engine.start()
        else:
            apply_fault(fault, self.world)


def run_scenario(flows: list[FlowGraph], script: ScenarioScript, *,
                 seed: Optional[int] = None, store_dir: Optional[str] = None) -> TimelineLog:
    """Co-simulate the scenario and return the merged timeline."""
    return Simulation(flows, script, seed=seed, store_dir=store_dir).run()
