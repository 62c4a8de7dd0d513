"""Trace validation against the consistency model and the scheduling constraints.

All checks are pure functions of the trace plus optional IR metadata (site
ranks and region membership). Without IR, site ids stand in for program
order and region membership comes from region-enter/exit events.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

from ..ir.model import IrProgram
from ..simulator.trace import Trace, TraceEvent

ACCESS = ("shared-read", "shared-write")


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    thread: int | None = None
    site: int | None = None
    cycle: int | None = None

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass
class SiteInfo:
    rank: dict[int, int]
    region: dict[int, tuple[int, int]]  # site -> (region id, N)


def site_info(ir: IrProgram | None) -> SiteInfo:
    if ir is None:
        return SiteInfo({}, {})
    rank = {s: i for i, s in enumerate(ir.site_order)}
    region: dict[int, tuple[int, int]] = {}
    for _, b in ir.all_blocks():
        for r in b.regions:
            inner = [o for o in b.ops if o.is_shared and r.contains(o.id)]
            for o in inner:
                prev = region.get(o.site)
                if prev is None or r.n <= prev[1]:
                    region[o.site] = (r.id, r.n)
    return SiteInfo(rank, region)


def _ordered(trace: Trace) -> list[TraceEvent]:
    # events are emitted in cycle order by the simulator; hand traces may not be
    return sorted(trace.events, key=lambda e: e.c) if any(
        a.c > b.c for a, b in zip(trace.events, trace.events[1:])) else trace.events


def _visits(trace: Trace) -> dict[int, list[list[TraceEvent]]]:
    """Shared accesses per thread, split at block entries (and at a repeated site)."""
    out: dict[int, list[list[TraceEvent]]] = defaultdict(lambda: [[]])
    for e in _ordered(trace):
        if e.k == "enter-block":
            if out[e.t][-1]:
                out[e.t].append([])
        elif e.k in ACCESS:
            cur = out[e.t][-1]
            if any(x.site == e.site for x in cur):
                cur = []
                out[e.t].append(cur)
            cur.append(e)
    return out


def _atomic_spans(trace: Trace) -> dict[int, list[tuple[int, int, int]]]:
    """Per thread: (region id, enter cycle, exit cycle) of every N=1 region visit."""
    spans: dict[int, list] = defaultdict(list)
    open_: dict[tuple[int, int], int] = {}
    for e in _ordered(trace):
        if e.k == "region-enter" and e.val == 1:
            open_[(e.t, e.site)] = e.c
        elif e.k == "region-exit" and (e.t, e.site) in open_:
            spans[e.t].append((e.site, open_.pop((e.t, e.site)), e.c))
    return spans


def check_program_order(trace: Trace, ir: IrProgram | None = None) -> list[Violation]:
    info = site_info(ir)
    spans = _atomic_spans(trace)
    out = []

    def rank(s):
        return info.rank.get(s, s)

    def same_atomic(t, a: TraceEvent, b: TraceEvent) -> bool:
        ra, rb = info.region.get(a.site), info.region.get(b.site)
        if ra is not None and rb is not None:
            return ra == rb and ra[1] == 1
        return any(x <= a.c and x <= b.c and a.c < y and b.c < y for _, x, y in spans.get(t, ()))

    for t, visits in sorted(_visits(trace).items()):
        last_cycle = -1
        for v in visits:
            prog = sorted(v, key=lambda e: rank(e.site))
            for i, a in enumerate(prog):
                for b in prog[i + 1:]:
                    if same_atomic(t, a, b):
                        continue
                    bad = b.c < a.c or (b.c == a.c and a.k == "shared-write" and a.var == b.var
                                        and b.k == "shared-read")
                    if bad:
                        out.append(Violation(
                            "ProgramOrderViolation",
                            f"thread {t}: site {b.site} at cycle {b.c} precedes site {a.site} at cycle {a.c}",
                            t, b.site, b.c))
            first = min((e.c for e in v), default=last_cycle)
            if first < last_cycle:
                out.append(Violation("ProgramOrderViolation", f"thread {t}: block visit starts at cycle {first} "
                                     f"before the previous visit ended at {last_cycle}", t, None, first))
            last_cycle = max((e.c for e in v), default=last_cycle)
    return out


def check_wavefront_order(trace: Trace, ir: IrProgram | None = None) -> list[Violation]:
    events = _ordered(trace)
    out = []
    has_entries = any(e.k == "enter-block" for e in events)
    # visit index of the latest block entry per thread, per block
    entry_pos: dict[int, int] = {}  # thread -> global entry index of its current block visit
    cur_block: dict[int, int] = {}
    counter: dict[int, int] = defaultdict(int)
    per_site: dict[int, list[tuple[int, int, int]]] = defaultdict(list)  # site -> (order key, thread, cycle)
    for e in events:
        if e.k == "enter-block":
            cur_block[e.t] = e.site
            entry_pos[e.t] = counter[e.site]
            counter[e.site] += 1
        elif e.k in ACCESS:
            key = entry_pos.get(e.t, 0) if has_entries else e.t
            per_site[e.site].append((key, e.t, e.c))
    for s, seq in sorted(per_site.items()):
        for (k0, t0, c0), (k1, t1, c1) in zip(seq, seq[1:]):
            if t0 == t1 and k0 == k1:
                continue
            if k1 < k0 or c1 <= c0:
                early, late = (t1, t0) if k1 < k0 else (t0, t1)
                out.append(Violation("WavefrontViolation",
                                     f"site {s}: thread {late} (cycle {c0 if late == t0 else c1}) must access after "
                                     f"thread {early} (cycle {c1 if late == t0 else c0})", t1, s, c1))
    out += _fifo_order(events)
    return out


def _fifo_order(events: list[TraceEvent]) -> list[Violation]:
    """Dequeue order of every plain FIFO equals its enqueue order.

    Loop exits (``exit.*``) reorder by design and call returns (``ret.*``) are
    matched by thread, so both are exempt.
    """
    out = []
    qs: dict[str, deque] = defaultdict(deque)
    for e in events:
        if e.var is None or e.var.startswith(("exit.", "ret.")):
            continue
        if e.k == "fifo-enqueue":
            qs[e.var].append(e.t)
        elif e.k == "fifo-dequeue":
            q = qs[e.var]
            if not q or q[0] != e.t:
                out.append(Violation("FifoOrderViolation",
                                     f"fifo {e.var}: thread {e.t} dequeued before {q[0] if q else 'nothing'}",
                                     e.t, None, e.c))
                if e.t in q:
                    q.remove(e.t)
            else:
                q.popleft()
    return out


def check_constraints(trace: Trace, ir: IrProgram | None = None, schedules=None) -> list[Violation]:
    events = _ordered(trace)
    info = site_info(ir)
    out = []
    # (a) occupancy
    occ: dict[int, int] = defaultdict(int)
    cap: dict[int, int] = {}
    by_cycle: dict[int, list[TraceEvent]] = defaultdict(list)
    for e in events:
        if e.k in ("region-enter", "region-exit"):
            by_cycle[e.c].append(e)
    for c in sorted(by_cycle):
        evs = by_cycle[c]
        for e in evs:
            if e.k == "region-exit":
                occ[e.site] -= 1
        for e in evs:
            if e.k == "region-enter":
                occ[e.site] += 1
                cap[e.site] = int(e.val)
        for r, n in occ.items():
            if r in cap and n > cap[r]:
                out.append(Violation("OccupancyViolation", f"region {r} holds {n} threads at cycle {c} (N={cap[r]})",
                                     None, None, c))
    # (b), (c) same-cycle writes / reads per region visit
    inside: dict[tuple[int, int], list[TraceEvent]] = {}
    visits: list[tuple[int, int, int, list[TraceEvent]]] = []
    for e in events:
        if e.k == "region-enter":
            inside[(e.t, e.site)] = []
            cap[e.site] = int(e.val)
        elif e.k == "region-exit" and (e.t, e.site) in inside:
            visits.append((e.t, e.site, cap.get(e.site, 0), inside.pop((e.t, e.site))))
        elif e.k in ACCESS:
            for (t, r), acc in inside.items():
                if t != e.t:
                    continue
                reg = info.region.get(e.site)
                if reg is None and info.region:
                    continue  # the IR says this site is outside every region
                if reg is not None and reg[0] != r:
                    continue
                acc.append(e)
    for t, r, n, acc in visits:
        w = sorted({e.c for e in acc if e.k == "shared-write"})
        if len(w) > 1:
            out.append(Violation("RegionWriteSplit", f"thread {t} writes region {r} in cycles {w}", t, None, w[0]))
        rd = sorted({e.c for e in acc if e.k == "shared-read"})
        if n == 1 and len(rd) > 1:
            out.append(Violation("RegionReadSplit", f"thread {t} reads atomic region {r} in cycles {rd}", t, None,
                                 rd[0]))
    # (d) thread rate
    last: dict[str, int] = {}
    for e in events:
        if e.k == "fn-enter" and e.val:
            if e.var in last and e.c - last[e.var] < int(e.val):
                out.append(Violation("ThreadRateViolation",
                                     f"{e.var} entered at cycles {last[e.var]} and {e.c} (II={e.val})", e.t, None,
                                     e.c))
            last[e.var] = e.c
    # (e) wait_for evaluates only the head of its context FIFO
    where: dict[int, str] = {}
    qs: dict[str, list[int]] = defaultdict(list)
    for e in events:
        if e.k == "fifo-enqueue":
            qs[e.var].append(e.t)
            where[e.t] = e.var
        elif e.k == "fifo-dequeue":
            if e.t in qs[e.var]:
                qs[e.var].remove(e.t)
            where.pop(e.t, None)
        elif e.k == "wait-eval":
            q = qs.get(where.get(e.t, ""), [])
            if not q or q[0] != e.t:
                out.append(Violation("WaitHeadViolation", f"thread {e.t} evaluated wait {e.site} at cycle {e.c} "
                                     f"while not at the head of its FIFO", e.t, e.site, e.c))
    return out


def check_ordered_loop_exit(trace: Trace, ir: IrProgram | None = None) -> list[Violation]:
    entries: dict[int, list[int]] = defaultdict(list)
    exits: dict[int, list[int]] = defaultdict(list)
    ordered: dict[int, bool] = {}
    for e in _ordered(trace):
        if e.k == "loop-enter":
            entries[e.site].append(e.t)
            ordered[e.site] = e.var != "unordered"
        elif e.k == "loop-exit":
            exits[e.site].append(e.t)
    out = []
    for lid, seq in sorted(exits.items()):
        if not ordered.get(lid, True):
            continue
        expect = entries[lid][:len(seq)]
        if seq != expect:
            i = next(i for i, (a, b) in enumerate(zip(seq, expect)) if a != b)
            out.append(Violation("LoopOrderViolation",
                                 f"loop {lid}: thread {seq[i]} exited where thread {expect[i]} was due", seq[i]))
    return out


def check_all(trace: Trace, ir: IrProgram | None = None, schedules=None) -> list[Violation]:
    return (check_program_order(trace, ir) + check_wavefront_order(trace, ir) + check_constraints(trace, ir, schedules)
            + check_ordered_loop_exit(trace, ir))
