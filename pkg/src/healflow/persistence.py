"""Durable single-slot checkpoint store and device registry.

Backing format is one append-compacted, human-readable file per instance:

    CKPT <nodeId> <timestamp> <record-as-compact-JSON>
    REG <deviceId> <kind> <endpoint> <lastSeen> <status>

Appends are replayed on load with last-line-wins semantics; compact()
rewrites the file down to the live state. A store built with path=None is
memory-only but keeps the identical semantics, which is what simulated
instance restarts rely on: the store object outlives the engine.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

logger = logging.getLogger(__name__)


class StoreError(Exception):
    """Raised when the backing file cannot be written or an op is invalid."""


@dataclass
class CheckpointRecord:
    timestamp: int
    topic: str
    payload: Any


@dataclass
class RegistryEntry:
    device_id: str
    kind: str
    endpoint: str
    last_seen: int
    status: str  # "online" | "lost"


class Store:
    """Checkpoint slots plus the device registry, optionally file-backed."""

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path is not None else None
        self._ckpt: dict[str, dict] = {}
        self._reg: dict[str, RegistryEntry] = {}
        if self.path is not None and self.path.exists():
            self._load()

    # --- checkpoint slots -------------------------------------------------
    def store_checkpoint(self, node_id: str, topic: str, payload: Any, timestamp: int) -> None:
        record = {"timestamp": timestamp, "topic": topic, "payload": payload}
        self._ckpt[node_id] = record
        self._append_ckpt(node_id, record)

    def load_checkpoint(self, node_id: str) -> Optional[CheckpointRecord]:
        record = self._ckpt.get(node_id)
        if record is None or record.get("payload") is None:
            return None
        return CheckpointRecord(record["timestamp"], record.get("topic", ""), record["payload"])

    def clear_checkpoint(self, node_id: str) -> None:
        """Drop the replayable message but keep the timestamp (replay-once)."""
        record = self._ckpt.get(node_id)
        if record is None:
            return
        record = {"timestamp": record["timestamp"], "topic": "", "payload": None}
        self._ckpt[node_id] = record
        self._append_ckpt(node_id, record)

    # --- device registry ----------------------------------------------------
    def registry_upsert(self, device_id: str, kind: str = "device",
                        endpoint: str = "", now: int = 0) -> RegistryEntry:
        prev = self._reg.get(device_id)
        last_seen = max(now, prev.last_seen) if prev else now
        entry = RegistryEntry(device_id, kind, endpoint, last_seen, "online")
        self._reg[device_id] = entry
        self._append_reg(entry)
        return entry

    def registry_mark_lost(self, device_id: str, now: int) -> RegistryEntry:
        prev = self._reg.get(device_id)
        if prev is None:
            raise StoreError(f"unknown device {device_id!r}")
        # lastSeen is retained: losing a device is not seeing it.
        entry = RegistryEntry(device_id, prev.kind, prev.endpoint, prev.last_seen, "lost")
        self._reg[device_id] = entry
        self._append_reg(entry)
        return entry

    def registry_list(self) -> list[RegistryEntry]:
        return [self._reg[k] for k in sorted(self._reg)]

    # --- file backing -------------------------------------------------------
    def compact(self) -> None:
        if self.path is None:
            return
        lines = [self._ckpt_line(node_id, rec) for node_id, rec in sorted(self._ckpt.items())]
        lines += [self._reg_line(self._reg[k]) for k in sorted(self._reg)]
        try:
            self.path.write_text("".join(lines), encoding="utf-8")
        except OSError as exc:
            raise StoreError(f"compact failed: {exc}") from exc

    @staticmethod
    def _ckpt_line(node_id: str, record: dict) -> str:
        body = json.dumps({"topic": record.get("topic", ""), "payload": record["payload"]},
                          separators=(",", ":"), sort_keys=True)
        return f"CKPT {node_id} {record['timestamp']} {body}\n"

    @staticmethod
    def _reg_line(entry: RegistryEntry) -> str:
        return (f"REG {entry.device_id} {entry.kind} {entry.endpoint or '-'} "
                f"{entry.last_seen} {entry.status}\n")

    def _append_ckpt(self, node_id: str, record: dict) -> None:
        self._append(self._ckpt_line(node_id, record))

    def _append_reg(self, entry: RegistryEntry) -> None:
        self._append(self._reg_line(entry))

    def _append(self, line: str) -> None:
        if self.path is None:
            return
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)
        except OSError as exc:
            raise StoreError(f"store write failed: {exc}") from exc

    def _load(self) -> None:
        for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                tag, rest = line.split(" ", 1)
                if tag == "CKPT":
                    node_id, timestamp, body = rest.split(" ", 2)
                    parsed = json.loads(body)
                    self._ckpt[node_id] = {"timestamp": int(timestamp),
                                           "topic": parsed.get("topic", ""),
                                           "payload": parsed.get("payload")}
                elif tag == "REG":
                    device_id, kind, endpoint, last_seen, status = rest.split(" ")
                    self._reg[device_id] = RegistryEntry(
                        device_id, kind, "" if endpoint == "-" else endpoint,
                        int(last_seen), status)
                else:
                    raise ValueError(f"unknown tag {tag!r}")
            except (ValueError, json.JSONDecodeError) as exc:
                logger.warning("skipping corrupt store line %d in %s: %s",
                               lineno, self.path, exc)


# Spec-level operation aliases.
def store_checkpoint(store: Store, node_id: str, topic: str, payload, timestamp: int) -> None:
    store.store_checkpoint(node_id, topic, payload, timestamp)


def load_checkpoint(store: Store, node_id: str) -> Optional[CheckpointRecord]:
    return store.load_checkpoint(node_id)
