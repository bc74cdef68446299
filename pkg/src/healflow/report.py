"""Run reports: delivery/loss counts, MTTR samples, marble diagrams.

Everything here is a pure function of a timeline, so reports can be
recomputed from a CSV file at any point after a run.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core.graph import FlowGraph
from .core.timeline import TimelineEntry

SINK_TOPIC_PREFIX = "service/"


@dataclass
class RunReport:
    delivered: dict = field(default_factory=dict)   # sink topic -> count
    expected: dict = field(default_factory=dict)    # world source node -> count
    mttr_samples: list = field(default_factory=list)
    uptime: dict = field(default_factory=dict)      # instance -> ms

    @property
    def expected_total(self) -> int:
        return sum(self.expected.values())

    def loss(self, sink: str) -> int:
        return self.expected_total - self.delivered.get(sink, 0)


def compute_report(entries: Iterable[TimelineEntry]) -> RunReport:
    entries = list(entries)
    report = RunReport()
    report.expected = _world_emissions(entries)
    report.delivered = _sink_deliveries(entries)
    report.mttr_samples = compute_mttr(entries)
    report.uptime = instance_uptime(entries)
    return report


def _world_emissions(entries) -> dict:
    counts: dict[str, int] = {}
    for e in entries:
        if e.kind == "emit" and e.instance == "world":
            counts[e.node] = counts.get(e.node, 0) + 1
    return counts


def _sink_deliveries(entries) -> dict:
    counts: dict[str, int] = {}
    for e in entries:
        if e.kind == "emit" and e.topic.startswith(SINK_TOPIC_PREFIX):
            counts[e.topic] = counts.get(e.topic, 0) + 1
    return counts


def compute_mttr(entries) -> list[int]:
    """One sample per failover: master crash to the first sink delivery
    emitted by any other instance."""
    samples = []
    master: Optional[str] = None
    crash_at: Optional[int] = None
    crashed: Optional[str] = None
    for e in entries:
        if e.kind == "role-change" and isinstance(e.value, dict):
            if e.value.get("role") == "master":
                master = e.instance
        elif e.kind == "fault" and isinstance(e.value, dict) \
                and e.value.get("kind") == "instance_crash":
            if e.node == master:
                crash_at, crashed = e.time, e.node
        elif (crash_at is not None and e.kind == "emit"
              and e.topic.startswith(SINK_TOPIC_PREFIX)
              and e.instance not in (crashed, "world")):
            samples.append(e.time - crash_at)
            crash_at = crashed = None
    return samples


def instance_uptime(entries) -> dict:
    """Per-instance running time, clipped by crash/restart faults."""
    entries = list(entries)
    t_end = entries[-1].time if entries else 0
    instances = sorted({e.instance for e in entries if e.instance != "world"})
    up_since = {name: 0 for name in instances}
    total = {name: 0 for name in instances}
    for e in entries:
        if e.kind != "fault" or not isinstance(e.value, dict):
            continue
        if e.value.get("kind") == "instance_crash" and e.node in up_since:
            if up_since[e.node] is not None:
                total[e.node] += e.time - up_since[e.node]
                up_since[e.node] = None
        elif e.value.get("kind") == "instance_restart" and e.node in up_since:
            if up_since[e.node] is None:
                up_since[e.node] = e.time
    for name, since in up_since.items():
        if since is not None:
            total[name] += t_end - since
    return total


def format_report(report: RunReport, metric: str, sink: Optional[str] = None) -> str:
    """Human-readable text for one metric; 'n/a' when nothing applies."""
    lines = []
    if metric == "mttr":
        samples = report.mttr_samples
        if not samples:
            lines.append("mttr: n/a (no master failover observed)")
        else:
            mean = statistics.fmean(samples)
            stdev = statistics.pstdev(samples)
            lines.append("mttr samples (ms): " + ", ".join(str(s) for s in samples))
            lines.append(f"mttr mean={mean:.1f} ms stdev={stdev:.1f} ms n={len(samples)}")
    elif metric == "loss":
        sinks = sorted(report.delivered)
        if sink is not None:
            key = sink if sink.startswith(SINK_TOPIC_PREFIX) else SINK_TOPIC_PREFIX + sink
            sinks = [key]
        if not report.expected or not sinks:
            lines.append("loss: n/a (no periodic source or sink deliveries)")
        else:
            for name, count in sorted(report.expected.items()):
                lines.append(f"source {name}: emitted={count}")
            for key in sinks:
                delivered = report.delivered.get(key, 0)
                lines.append(f"sink {key}: delivered={delivered} "
                             f"expected={report.expected_total} loss={report.loss(key)}")
    else:
        raise ValueError(f"unknown metric {metric!r}")
    for name, ms in sorted(report.uptime.items()):
        lines.append(f"uptime {name}: {ms} ms")
    return "\n".join(lines) + "\n"


# --- marble rendering -----------------------------------------------------------

def _egress_label(graph: Optional[FlowGraph], node: str, port: Optional[int]) -> str:
    port = port or 0
    if graph is not None and node in graph.by_id:
        from .nodes import NODE_KINDS
        spec = graph.by_id[node]
        labels = NODE_KINDS[spec.kind].egress_labels(spec.config)
        if len(labels) <= 1:
            return node
        if port < len(labels):
            return f"{node}:{labels[port]}"
    return f"{node}:{port}"


def default_bucket(entries, graph: Optional[FlowGraph] = None) -> int:
    """A quarter of the fastest configured cadence, or of the observed one."""
    periods = []
    if graph is not None:
        for spec in graph.nodes:
            for key in ("period", "interval", "expected", "window"):
                value = spec.config.get(key)
                if isinstance(value, int) and value > 0:
                    periods.append(value)
    if not periods:
        by_node: dict[str, int] = {}
        for e in entries:
            if e.kind != "emit":
                continue
            if e.node in by_node and e.time > by_node[e.node]:
                periods.append(e.time - by_node[e.node])
            by_node[e.node] = e.time
    return max(1, min(periods) // 4) if periods else 1000


def render_marble(entries: Iterable[TimelineEntry], *, bucket_ms: Optional[int] = None,
                  graph: Optional[FlowGraph] = None,
                  nodes: Optional[list[str]] = None) -> str:
    """Text marble diagram: one row per (node, egress), one column per bucket.

    Glyphs: '.' nothing, '*' one emission, '2'..'9' that many, '+' ten or more.
    """
    entries = list(entries)
    emits = [e for e in entries if e.kind == "emit"]
    if nodes is not None:
        known = {e.node for e in emits}
        if graph is not None:
            known |= set(graph.by_id)
        for n in nodes:
            if n not in known:
                raise ValueError(f"unknown node in filter: {n!r}")
        emits = [e for e in emits if e.node in nodes]

    if bucket_ms is None:
        bucket_ms = default_bucket(entries, graph)
    if not emits:
        return f"# marble bucket_ms={bucket_ms} (no emissions)\n"

    t_end = max(e.time for e in emits)
    n_buckets = t_end // bucket_ms + 1

    rows: dict[str, list[int]] = {}
    if graph is not None and nodes is not None:
        # Pre-create every egress row of the filtered nodes so silent
        # classes still show as empty tracks.
        from .nodes import NODE_KINDS
        for name in nodes:
            spec = graph.by_id.get(name)
            if spec is None:
                continue
            labels = NODE_KINDS[spec.kind].egress_labels(spec.config)
            for port in range(len(labels) or 1):
                rows.setdefault(_egress_label(graph, name, port), [0] * n_buckets)
    for e in emits:
        label = _egress_label(graph, e.node, e.port)
        row = rows.setdefault(label, [0] * n_buckets)
        row[e.time // bucket_ms] += 1

    width = max(len(label) for label in rows)
    lines = [f"# marble bucket_ms={bucket_ms} buckets={n_buckets}"]
    for label, counts in rows.items():
        glyphs = "".join(
            "." if c == 0 else "*" if c == 1 else str(c) if c < 10 else "+"
            for c in counts)
        lines.append(f"{label.ljust(width)} |{glyphs}|")
    return "\n".join(lines) + "\n"
