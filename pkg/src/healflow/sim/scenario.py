"""Scenario scripts: the world declaration plus time-ordered fault events.

Scenario file schema (UTF-8 JSON):

    {"seed": u64, "duration_ms": u64,
     "world": {"devices": [...], "services": [...], "instances": [...]},
     "events": [{"at_ms": u64, "kind": str, "target": str, "params": {...}}]}

The world section is optional; without it a run gets auto-named instances
and an empty inventory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .world import Service, VirtualDevice

FAULT_KINDS = (
    "device_offline", "device_online",
    "instance_crash", "instance_restart",
    "net_delay", "value_noise", "stuck_value",
    "service_down", "service_up",
)

_DEVICE_FAULTS = ("device_offline", "device_online", "value_noise", "stuck_value")
_INSTANCE_FAULTS = ("instance_crash", "instance_restart")
_SERVICE_FAULTS = ("service_down", "service_up")


class ScenarioError(ValueError):
    pass


@dataclass
class FaultEvent:
    at: int
    kind: str
    target: str
    params: dict = field(default_factory=dict)


@dataclass
class InstanceSpec:
    name: str
    address: str


@dataclass
class WorldSpec:
    devices: list[VirtualDevice] = field(default_factory=list)
    services: list[Service] = field(default_factory=list)
    instances: list[InstanceSpec] = field(default_factory=list)


@dataclass
class ScenarioScript:
    seed: int
    duration: int
    events: list[FaultEvent] = field(default_factory=list)
    world: WorldSpec = field(default_factory=WorldSpec)


def _parse_device(raw: dict) -> VirtualDevice:
    kind = raw.get("kind", "periodicSensor")
    if kind not in ("periodicSensor", "nfcReader"):
        raise ScenarioError(f"unknown device kind {kind!r}")
    if not raw.get("id") or not raw.get("topic"):
        raise ScenarioError("devices need an id and a topic")
    model = raw.get("valueModel") or {}
    period = int(raw.get("period_ms", 0))
    if kind == "periodicSensor" and period <= 0:
        raise ScenarioError(f"device {raw['id']!r} needs a positive period_ms")
    reads = [(int(r["at_ms"]), r.get("value")) for r in raw.get("reads", [])]
    return VirtualDevice(
        id=raw["id"], kind=kind, topic=raw["topic"], period=period,
        base=model.get("base", 0.0), noise_amp=model.get("noiseAmp", 0.0),
        reads=sorted(reads), online=bool(raw.get("online", True)))


def _parse_world(raw: Optional[dict]) -> WorldSpec:
    raw = raw or {}
    devices = [_parse_device(d) for d in raw.get("devices", [])]
    services = [Service(id=s["id"], host=s.get("host", s["id"]), port=int(s.get("port", 80)))
                for s in raw.get("services", [])]
    instances = [InstanceSpec(name=i["name"], address=i["address"])
                 for i in raw.get("instances", [])]
    return WorldSpec(devices, services, instances)


def parse_scenario(text: str) -> ScenarioScript:
    """Parse and validate a scenario document; events are sorted by time."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario syntax error: {exc.msg} "
                            f"(line {exc.lineno}, column {exc.colno})") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")

    duration = doc.get("duration_ms")
    if not isinstance(duration, int) or duration < 0:
        raise ScenarioError("duration_ms must be a non-negative integer")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed must be a non-negative integer")

    events = []
    for raw in doc.get("events", []):
        kind = raw.get("kind")
        if kind not in FAULT_KINDS:
            raise ScenarioError(f"unknown fault kind {kind!r}")
        at = raw.get("at_ms")
        if not isinstance(at, int) or at < 0:
            raise ScenarioError(f"fault {kind!r} needs a non-negative at_ms")
        target = raw.get("target")
        if not isinstance(target, str) or not target:
            raise ScenarioError(f"fault {kind!r} needs a target id")
        params = raw.get("params") or {}
        if kind == "net_delay":
            delay = params.get("delay_ms", 0)
            if not isinstance(delay, int) or delay < 0:
                raise ScenarioError("net_delay needs a non-negative delay_ms param")
        events.append(FaultEvent(at=at, kind=kind, target=target, params=params))
    events.sort(key=lambda e: e.at)
    if events and events[-1].at > duration:
        raise ScenarioError("duration_ms must cover every event time")

    script = ScenarioScript(seed=seed, duration=duration, events=events,
                            world=_parse_world(doc.get("world")))
    validate_script(script)
    return script


def validate_script(script: ScenarioScript, extra_instances: tuple = ()) -> None:
    """Check every fault target against the declared world."""
    device_ids = {d.id for d in script.world.devices}
    service_ids = {s.id for s in script.world.services}
    instance_ids = {i.name for i in script.world.instances} | set(extra_instances)
    for event in script.events:
        if event.kind in _DEVICE_FAULTS and event.target not in device_ids:
            raise ScenarioError(f"{event.kind} targets unknown device {event.target!r}")
        if event.kind in _SERVICE_FAULTS and event.target not in service_ids:
            raise ScenarioError(f"{event.kind} targets unknown service {event.target!r}")
        if event.kind in _INSTANCE_FAULTS and event.target not in instance_ids:
            raise ScenarioError(f"{event.kind} targets unknown instance {event.target!r}")
        if event.kind == "net_delay" and event.target not in device_ids | instance_ids:
            raise ScenarioError(f"net_delay targets unknown source {event.target!r}")
