"""Independent re-check of a stage schedule and whole-program scheduling helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..ir.model import TERMINATORS, BasicBlock, IrProgram, Region
from ..ir.verify import Diagnostic
from .schedule import LatencyTable, ScheduleConstraintSet, StageSchedule, op_cost, schedule_block, sched_deps


def region_occupancy(schedule: StageSchedule, region: Region | int) -> int:
    """Number of stages between the first and last shared access of a region (inclusive).

    Access stages count, so a RAM read enters the span where its data arrives.
    """
    rid = region if isinstance(region, int) else region.id
    if rid not in schedule.region_spans:
        return 0
    a, b = schedule.region_spans[rid]
    return b - a + 1


def effective_ii(schedule: StageSchedule, region: Region) -> int:
    """Minimum spacing between consecutive thread entries imposed by one region."""
    occ = region_occupancy(schedule, region)
    return max(1, math.ceil(occ / region.n)) if occ else 1


def validate_schedule(block: BasicBlock, sched: StageSchedule, c: ScheduleConstraintSet | None = None,
                      latencies: LatencyTable | None = None, storage: dict[str, str] | None = None) -> list[Diagnostic]:
    c = c or ScheduleConstraintSet(regions=list(block.regions))
    lt = latencies or LatencyTable()
    storage = storage or {}
    out: list[Diagnostic] = []
    where = dict(block=block.id)
    by_id = {o.id: o for o in block.ops}
    placed = [i for st in sched.stages for i in st]
    if sorted(placed) != sorted(by_id) or len(set(placed)) != len(placed):
        out.append(Diagnostic("Unscheduled", "ops are missing or scheduled twice", **where))
        return out
    st = {i: s for s, ops in enumerate(sched.stages) for i in ops}
    cl = {o.id: op_cost(lt, o, by_id, storage, c.single_stage) for o in block.ops}

    def atomic_pair(a: int, b: int) -> bool:
        return any(r.n == 1 and r.contains(a) and r.contains(b) for r in c.regions)

    for o in block.ops:
        for p in sched_deps(o):
            if st[o.id] < st[p] + cl[p][1]:
                out.append(Diagnostic("DataDependence", f"op {o.id} starts before operand {p} is ready", op=o.id,
                                      **where))
        if o.is_shared and storage.get(o.var) == "ram" and o.operands and not c.single_stage:
            a = by_id[o.operands[0]]
            if a.kind not in ("const", "read_local") and st[o.id] < st[a.id] + max(cl[a.id][1], 1):
                out.append(Diagnostic("UnregisteredAddress", f"ram address of op {o.id} is combinational", op=o.id,
                                      **where))
    shared = [o for o in block.ops if o.is_shared]
    # a read takes effect when its data arrives
    acc = {o.id: st[o.id] + (cl[o.id][1] if o.kind == "read_shared" else 0) for o in shared}
    for o in shared:
        if acc[o.id] >= len(sched.stages):
            out.append(Diagnostic("AccessPastEnd", f"op {o.id} takes effect after the last stage", op=o.id, **where))
    for i, q in enumerate(shared):
        for o in shared[i + 1:]:
            if atomic_pair(q.id, o.id):
                if q.kind == "read_shared" and o.kind == "write_shared" and acc[o.id] < acc[q.id]:
                    out.append(Diagnostic("ProgramOrder", f"region write {o.site} precedes read {q.site}", op=o.id,
                                          **where))
                continue
            strict = q.kind == "write_shared" and o.kind == "read_shared" and q.var == o.var
            if acc[o.id] < acc[q.id] + (1 if strict else 0):
                out.append(Diagnostic("ProgramOrder", f"site {o.site} is scheduled before site {q.site}", op=o.id,
                                      **where))
    for r in c.regions:
        inside = [o for o in shared if r.contains(o.id)]
        ws = {acc[o.id] for o in inside if o.kind == "write_shared"}
        rs = {acc[o.id] for o in inside if o.kind == "read_shared"}
        if len(ws) > 1:
            out.append(Diagnostic("RegionWriteSplit", f"region {r.id} writes span stages {sorted(ws)}", **where))
        if r.n == 1 and len(rs) > 1:
            out.append(Diagnostic("RegionReadSplit", f"region {r.id} reads span stages {sorted(rs)}", **where))
    term = block.ops[-1]
    if term.kind in TERMINATORS and st[term.id] != len(sched.stages) - 1:
        out.append(Diagnostic("TerminatorNotLast", "terminator is not in the last stage", op=term.id, **where))
    # combinational depth per stage, recomputed from scratch
    depth: dict[int, int] = {}
    for o in block.ops:
        deps = sched_deps(o)
        depth[o.id] = cl[o.id][0] + max((depth[p] for p in deps if st[p] == st[o.id] and cl[p][1] == 0), default=0)
        if depth[o.id] > c.depth and st[o.id] not in sched.violated_depth_stages:
            out.append(Diagnostic("DepthExceeded", f"stage {st[o.id]} chains depth {depth[o.id]} > {c.depth}",
                                  op=o.id, **where))
    if c.single_stage and len(sched.stages) != 1:
        out.append(Diagnostic("SingleStage", "wait evaluator must fit in one stage", **where))
    return out


@dataclass
class ProgramSchedule:
    blocks: dict[int, StageSchedule]
    constraints: dict[int, ScheduleConstraintSet]
    latencies: LatencyTable
    storage: dict[str, str]

    def to_json(self) -> dict:
        return {"schema": 1, "blocks": [self.blocks[k].to_json() for k in sorted(self.blocks)]}


def storage_map(prog: IrProgram) -> dict[str, str]:
    return {v.name: v.storage for v in prog.shared}


def schedule_program(prog: IrProgram, depth: int = 6, latencies: LatencyTable | None = None) -> ProgramSchedule:
    lt = latencies or LatencyTable()
    storage = storage_map(prog)
    out, cons = {}, {}
    for f, b in prog.all_blocks():
        c = ScheduleConstraintSet(depth=depth, regions=list(b.regions), thread_rate=f.attrs.get("thread_rate"),
                                  single_stage=b.kind == "wait")
        cons[b.id] = c
        out[b.id] = schedule_block(b, c, lt, storage)
    return ProgramSchedule(out, cons, lt, storage)
