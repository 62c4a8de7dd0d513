"""Trace events, JSON-lines/CSV io and text timelines."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from ..frontend.types import value_to_json

EVENT_KINDS = {
    "spawn", "retire", "enter-block", "advance-stage", "stall", "fifo-enqueue", "fifo-dequeue", "shared-read",
    "shared-write", "wait-eval", "loop-enter", "loop-exit", "region-enter", "region-exit", "fn-enter",
}


@dataclass
class TraceEvent:
    c: int
    t: int
    k: str
    site: int | None = None
    var: str | None = None
    idx: int | None = None
    val: object = None
    p: bool | None = None

    def to_json(self) -> dict:
        d = {"c": self.c, "t": self.t, "k": self.k}
        if self.site is not None:
            d["site"] = int(self.site)
        if self.var is not None:
            d["var"] = self.var
        if self.idx is not None:
            d["idx"] = int(self.idx)
        if self.val is not None:
            d["val"] = self.val if isinstance(self.val, str) else value_to_json(self.val)
        if self.p is not None:
            d["p"] = bool(self.p)
        return d

    @staticmethod
    def from_json(d: dict) -> "TraceEvent":
        return TraceEvent(int(d["c"]), int(d["t"]), d["k"], d.get("site"), d.get("var"), d.get("idx"), d.get("val"),
                          d.get("p"))


@dataclass
class Trace:
    events: list[TraceEvent] = field(default_factory=list)
    final_state: dict = field(default_factory=dict)
    cycles: int = 0
    threads_created: int = 0
    threads_retired: int = 0

    def accesses(self) -> list[TraceEvent]:
        return [e for e in self.events if e.k in ("shared-read", "shared-write")]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in self.events)

    def summary(self) -> dict:
        return {
            "schema": 1,
            "cycles": self.cycles,
            "threads_created": self.threads_created,
            "threads_retired": self.threads_retired,
            "final_state": {k: value_to_json(v) if not isinstance(v, list) else [value_to_json(x) for x in v]
                            for k, v in sorted(self.final_state.items())},
        }


def read_jsonl(text: str) -> Trace:
    events = [TraceEvent.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]
    return Trace(events, cycles=max((e.c for e in events), default=0))


_CSV_KIND = {"R": "shared-read", "W": "shared-write", "read": "shared-read", "write": "shared-write"}


def read_csv(text: str) -> Trace:
    """Hand-authored traces: columns cycle,thread,site,kind,var,idx,value,pred.

    ``kind`` is any event kind, or R/W as shorthand for shared accesses.
    Empty cells mean "absent"; lines starting with '#' are comments.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if rows and rows[0][0].strip() == "cycle":
        rows = rows[1:]
    events = []
    for r in rows:
        r = [x.strip() for x in r] + [""] * (8 - len(r))
        cyc, thr, site, kind, var, idx, val, pred = r[:8]
        events.append(TraceEvent(
            int(cyc), int(thr), _CSV_KIND.get(kind, kind),
            int(site) if site else None,
            var or None,
            int(idx) if idx else None,
            _parse_value(val),
            None if pred == "" else pred.lower() in ("1", "true", "t", "yes"),
        ))
    return Trace(events, cycles=max((e.c for e in events), default=0))


def _parse_value(s: str):
    if s == "":
        return None
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    try:
        return int(s)
    except ValueError:
        try:
            return float(s)
        except ValueError:
            return s


def load_trace(path: str) -> Trace:
    with open(path) as fh:
        text = fh.read()
    return read_csv(text) if path.endswith(".csv") else read_jsonl(text)


def render_timeline(trace: Trace, sites: list[int] | None = None, vars: list[str] | None = None,
                    width: int = 4) -> str:
    """Grid with one row per selected site (or shared variable) and one column per cycle.

    Cells hold the id of the thread accessing that row in that cycle; ``//``
    marks a cycle in which a thread that accesses the row next was stalled.
    """
    acc = [e for e in trace.events if e.k in ("shared-read", "shared-write")]
    if sites is None and vars is None:
        sites = sorted({e.site for e in acc if e.site is not None})
    rows: list[tuple[str, list[TraceEvent]]] = []
    for s in sites or []:
        evs = [e for e in acc if e.site == s]
        var = evs[0].var if evs else "?"
        rows.append((f"s{s} {'R' if evs and evs[0].k == 'shared-read' else 'W'} {var}", evs))
    for v in vars or []:
        rows.append((v, [e for e in acc if e.var == v]))
    if not rows or not any(evs for _, evs in rows):
        return ""
    last = max(e.c for _, evs in rows for e in evs)
    stalls: dict[int, set[int]] = {}
    for e in trace.events:
        if e.k == "stall":
            stalls.setdefault(e.t, set()).add(e.c)
    label_w = max(len(r[0]) for r in rows) + 1
    head = " " * label_w + "".join(str(c).rjust(width) for c in range(last + 1))
    out = [head]
    for label, evs in rows:
        cells = [" " * (width - 1) + "." for _ in range(last + 1)]
        for e in evs:
            cells[e.c] = f"T{e.t}".rjust(width)
        # stalled cycles right before an access of this row
        for e in evs:
            c = e.c - 1
            while c >= 0 and c in stalls.get(e.t, ()) and cells[c].strip() == ".":
                cells[c] = "//".rjust(width)
                c -= 1
        out.append(label.ljust(label_w) + "".join(cells))
    return "\n".join(out) + "\n"
