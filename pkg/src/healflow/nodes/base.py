"""Operator base class, config schema validation and the kind registry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, TYPE_CHECKING

from ..core.envelope import Envelope, is_number

if TYPE_CHECKING:  # pragma: no cover
    from ..core.engine import NodeContext
    from ..core.graph import NodeSpec

_MISSING = object()


@dataclass
class Param:
    """One config field: type, default, and range constraints.

    kind is one of: number, int, str, bool, list, record, choice, any.
    Durations are plain integer milliseconds (kind="int").
    """

    kind: str = "any"
    default: Any = _MISSING
    required: bool = False
    minimum: Any = None
    maximum: Any = None
    exclusive_min: bool = False
    choices: Optional[tuple] = None

    @property
    def has_default(self) -> bool:
        return self.default is not _MISSING


def _check_value(name: str, value: Any, p: Param) -> list[str]:
    problems = []
    if p.kind == "number" and not is_number(value):
        return [f"config {name!r} must be a number"]
    if p.kind == "int" and not (isinstance(value, int) and not isinstance(value, bool)):
        return [f"config {name!r} must be an integer"]
    if p.kind == "str" and not isinstance(value, str):
        return [f"config {name!r} must be a string"]
    if p.kind == "bool" and not isinstance(value, bool):
        return [f"config {name!r} must be a boolean"]
    if p.kind == "list" and not isinstance(value, list):
        return [f"config {name!r} must be a list"]
    if p.kind == "record" and not isinstance(value, dict):
        return [f"config {name!r} must be a record"]
    if p.kind == "choice" and value not in (p.choices or ()):
        return [f"config {name!r} must be one of {list(p.choices or ())}"]
    if p.minimum is not None and is_number(value):
        if p.exclusive_min and value <= p.minimum:
            problems.append(f"config {name!r} must be > {p.minimum}")
        elif not p.exclusive_min and value < p.minimum:
            problems.append(f"config {name!r} must be >= {p.minimum}")
    if p.maximum is not None and is_number(value) and value > p.maximum:
        problems.append(f"config {name!r} must be <= {p.maximum}")
    return problems


class Node:
    """Base class for all operators hosted by the engine.

    Subclasses declare their wiring surface (ingress count, egress labels)
    and config schema as class attributes; the engine owns all invocation,
    so node code never needs its own synchronization.
    """

    KIND = ""
    INGRESSES = 1
    EGRESS_LABELS: tuple = ("out",)
    CONFIG: dict = {}

    def __init__(self, spec: "NodeSpec", ctx: "NodeContext"):
        self.spec = spec
        self.ctx = ctx

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def cfg(self) -> dict:
        return self.spec.config

    # --- wiring surface -------------------------------------------------
    @classmethod
    def egress_labels(cls, config: dict) -> tuple:
        return cls.EGRESS_LABELS

    @classmethod
    def ingress_count(cls, config: dict) -> int:
        return cls.INGRESSES

    # --- config validation ----------------------------------------------
    @classmethod
    def validate_config(cls, config: dict) -> list[str]:
        problems = []
        for key in config:
            if key not in cls.CONFIG:
                problems.append(f"unknown config key {key!r}")
        for name, p in cls.CONFIG.items():
            if name not in config:
                if p.required:
                    problems.append(f"missing required config {name!r}")
                continue
            value = config[name]
            if value is None and not p.required:
                continue
            problems.extend(_check_value(name, value, p))
        if not problems:
            problems.extend(cls.check_config(config))
        return problems

    @classmethod
    def check_config(cls, config: dict) -> list[str]:
        """Cross-field constraints; override where fields interact."""
        return []

    # --- lifecycle hooks --------------------------------------------------
    def on_start(self) -> None:
        """Called once when the hosting engine starts (or restarts)."""

    def on_input(self, env: Envelope, ingress: int) -> None:
        """Handle one delivery on a wired ingress."""

    def on_timer(self, tag: str) -> None:
        """Handle a timer previously armed with ctx.set_timer(tag, ...)."""

    def on_external(self, topic: str, payload) -> None:
        """Handle a broker delivery (only subscription nodes accept these)."""
        self.ctx.log_warning(f"node {self.id!r} ignores broker delivery on {topic!r}")


NODE_KINDS: dict[str, type[Node]] = {}


def register(cls: type[Node]) -> type[Node]:
    if not cls.KIND:
        raise ValueError("node class must define KIND")
    if cls.KIND in NODE_KINDS:
        raise ValueError(f"duplicate node kind {cls.KIND!r}")
    NODE_KINDS[cls.KIND] = cls
    return cls
