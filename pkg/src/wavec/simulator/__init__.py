from .engine import NoStall, RandomStall, ScriptedStall, SimConfig, Simulator, StallPolicy, simulate
from .trace import EVENT_KINDS, Trace, TraceEvent, load_trace, read_csv, read_jsonl, render_timeline

__all__ = [
    "NoStall", "RandomStall", "ScriptedStall", "SimConfig", "Simulator", "StallPolicy", "simulate", "EVENT_KINDS",
    "Trace", "TraceEvent", "load_trace", "read_csv", "read_jsonl", "render_timeline",
]
