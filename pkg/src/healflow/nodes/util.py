"""Plumbing nodes: sources, sinks, broker bridges, field extraction, dedup."""

from __future__ import annotations

from ..core.envelope import Envelope
from .base import Node, Param, register


@register
class Sensor(Node):
    """Engine-hosted periodic source for standalone runs.

    Emits base plus seeded uniform noise every period, first firing one full
    period after start. Co-simulated runs model sensors in the world instead.
    """

    KIND = "sensor"
    INGRESSES = 0
    EGRESS_LABELS = ("out",)
    CONFIG = {
        "period": Param("int", required=True, minimum=0, exclusive_min=True),
        "topic": Param("str", default=None),
        "base": Param("number", default=0.0),
        "noiseAmp": Param("number", default=0.0, minimum=0),
    }

    def on_start(self) -> None:
        self.ctx.set_timer("tick", self.cfg["period"])

    def on_timer(self, tag: str) -> None:
        self.ctx.set_timer("tick", self.cfg["period"])
        amp = self.cfg["noiseAmp"]
        value = self.cfg["base"] + (self.ctx.rng.uniform(-amp, amp) if amp else 0)
        self.ctx.emit(0, value, self.cfg["topic"] or f"sensor/{self.id}")


@register
class Debug(Node):
    """Terminal sink; deliveries land in the timeline, nothing is re-emitted."""

    KIND = "debug"
    EGRESS_LABELS = ()
    CONFIG = {}


def rbe_process(payload, state: dict) -> bool:
    """Report-by-exception: forward payload iff it differs from the last one.

    state is a single-slot dict {"last": ...}; equality is deep/structural.
    Returns True when the payload should be emitted (always on the first).
    """
    if "last" in state and state["last"] == payload:
        return False
    state["last"] = payload
    return True


@register
class Rbe(Node):
    """Deduplicate sequentially repeated messages (report by exception)."""

    KIND = "rbe"
    EGRESS_LABELS = ("out",)
    CONFIG = {}

    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        self._state: dict = {}

    def on_input(self, env: Envelope, ingress: int) -> None:
        if rbe_process(env.payload, self._state):
            self.ctx.emit(0, env.payload, env.topic, env.corr)


@register
class Extract(Node):
    """Pull one field out of a record payload."""

    KIND = "extract"
    EGRESS_LABELS = ("value", "error")
    CONFIG = {
        "key": Param("str", required=True),
    }

    def on_input(self, env: Envelope, ingress: int) -> None:
        key = self.cfg["key"]
        if not isinstance(env.payload, dict):
            self.ctx.emit(1, {"kind": "malformed", "value": env.payload}, env.topic, env.corr)
        elif key not in env.payload:
            self.ctx.emit(1, {"kind": "missing-key", "key": key}, env.topic, env.corr)
        else:
            self.ctx.emit(0, env.payload[key], env.topic, env.corr)


@register
class MqttIn(Node):
    """Subscribe to a broker topic (single-level '+' wildcard supported)."""

    KIND = "mqtt-in"
    INGRESSES = 0
    EGRESS_LABELS = ("out",)
    CONFIG = {
        "topic": Param("str", required=True),
    }

    def on_start(self) -> None:
        self.ctx.subscribe(self.cfg["topic"])

    def on_external(self, topic: str, payload) -> None:
        self.ctx.emit(0, payload, topic)


@register
class MqttOut(Node):
    """Publish incoming payloads to the broker."""

    KIND = "mqtt-out"
    EGRESS_LABELS = ()
    CONFIG = {
        "topic": Param("str", default=None),
    }

    def on_input(self, env: Envelope, ingress: int) -> None:
        if self.ctx.world is None:
            self.ctx.log_warning("no broker attached, publish dropped")
            return
        self.ctx.world.publish(self.cfg["topic"] or env.topic, env.payload,
                               source=self.ctx.instance)


@register
class HttpPost(Node):
    """Deliver payloads to an external service in the world inventory.

    A successful post emits on 'posted' with topic service/<id>; those
    emissions are what delivery reports count as sink deliveries.
    """

    KIND = "http-post"
    EGRESS_LABELS = ("posted", "error")
    CONFIG = {
        "service": Param("str", required=True),
    }

    def on_input(self, env: Envelope, ingress: int) -> None:
        sid = self.cfg["service"]
        world = self.ctx.world
        svc = world.services.get(sid) if world is not None else None
        if svc is None:
            self.ctx.emit(1, {"kind": "unknown-service", "service": sid}, env.topic, env.corr)
        elif not svc.up:
            self.ctx.emit(1, {"kind": "service-down", "service": sid}, env.topic, env.corr)
        else:
            self.ctx.emit(0, env.payload, f"service/{sid}", env.corr)
