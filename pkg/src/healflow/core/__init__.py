from .clock import Timer, VirtualClock
from .envelope import Envelope, is_number, topic_matches
from .engine import Engine, GraphInvalid, NodeContext, UnknownFlowGroup
from .graph import (Diagnostic, FlowGraph, FlowParseError, NodeSpec, Wire,
                    dispatch_targets, parse_flow, validate_graph)
from .timeline import (CSV_HEADER, KINDS, TimelineEntry, TimelineLog,
                       entries_from_csv, entries_to_csv)

__all__ = [
    "Timer", "VirtualClock",
    "Envelope", "is_number", "topic_matches",
    "Engine", "GraphInvalid", "NodeContext", "UnknownFlowGroup",
    "Diagnostic", "FlowGraph", "FlowParseError", "NodeSpec", "Wire",
    "dispatch_targets", "parse_flow", "validate_graph",
    "CSV_HEADER", "KINDS", "TimelineEntry", "TimelineLog",
    "entries_from_csv", "entries_to_csv",
]
