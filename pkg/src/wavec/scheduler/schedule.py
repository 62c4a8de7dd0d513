"""List scheduling of a basic block into pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ScheduleInfeasible
from ..frontend.types import Float32T
from ..ir.model import TERMINATORS, BasicBlock, IrOp, Region


@dataclass
class LatencyTable:
    """Depth cost and latency per op class. Latency 0 means combinational."""

    int_cost: int = 1
    select_cost: int = 1
    fadd_cost: int = 3
    fadd_latency: int = 6
    fmul_cost: int = 3
    fmul_latency: int = 4
    fdiv_cost: int = 3
    fdiv_latency: int = 12
    imul_latency: int = 2
    ram_read_latency: int = 1
    ram_write_latency: int = 1
    reg_array_read_cost: int = 1

    def override(self, name: str, value: int) -> None:
        aliases = {"fadd": "fadd_latency", "fmul": "fmul_latency", "fdiv": "fdiv_latency", "imul": "imul_latency",
                   "ram_read": "ram_read_latency", "ram_write": "ram_write_latency"}
        key = aliases.get(name, name)
        if not hasattr(self, key):
            raise ValueError(f"unknown latency entry '{name}'")
        setattr(self, key, int(value))

    def cost_latency(self, o: IrOp, operand_types: list, storage: dict[str, str],
                     const_operand: bool = False) -> tuple[int, int]:
        """Multiplication by a constant is a shift/add network and stays combinational."""
        k = o.kind
        if k in ("const", "read_local", "write_local") or k in TERMINATORS:
            return 0, 0
        if k == "read_shared":
            if storage.get(o.var) == "ram":
                return 0, self.ram_read_latency
            return (self.reg_array_read_cost if o.operands else 0), 0
        if k == "write_shared":
            return 0, 0
        if k == "select":
            return self.select_cost, 0
        if k == "binop" and operand_types and isinstance(operand_types[0], Float32T):
            if o.op in ("+", "-"):
                return self.fadd_cost, self.fadd_latency
            if o.op == "*":
                return self.fmul_cost, self.fmul_latency
            if o.op == "/":
                return self.fdiv_cost, self.fdiv_latency
        if k == "binop" and o.op == "*" and not const_operand:
            return self.int_cost, self.imul_latency
        return self.int_cost, 0


@dataclass
class ScheduleConstraintSet:
    depth: int = 6
    regions: list[Region] = field(default_factory=list)
    thread_rate: int | None = None
    single_stage: bool = False  # wait_for evaluators run in one cycle

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("logic depth must be >= 1")


@dataclass
class StageSchedule:
    block: int
    stages: list[list[int]]
    op_stage: dict[int, tuple[int, int]]
    violated_depth_stages: list[int] = field(default_factory=list)
    region_spans: dict[int, tuple[int, int]] = field(default_factory=dict)  # region id -> (first, last) stage
    depth: dict[int, int] = field(default_factory=dict)  # op id -> chained depth within its stage

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def start(self, op_id: int) -> int:
        return self.op_stage[op_id][0]

    def to_json(self) -> dict:
        return {
            "block": self.block,
            "stages": [list(s) for s in self.stages],
            "op_stage": {str(k): list(v) for k, v in sorted(self.op_stage.items())},
            "violated_depth_stages": list(self.violated_depth_stages),
            "regions": {str(k): list(v) for k, v in sorted(self.region_spans.items())},
        }


def op_cost(lt: LatencyTable, o: IrOp, by_id: dict[int, IrOp], storage: dict[str, str],
            single_stage: bool = False) -> tuple[int, int]:
    ins = [by_id[i] for i in o.operands]
    cost, lat = lt.cost_latency(o, [x.type for x in ins], storage, any(x.kind == "const" for x in ins))
    # a wait evaluator samples its inputs combinationally in one cycle
    return (cost, 0) if single_stage else (cost, lat)


def sched_deps(o: IrOp) -> list[int]:
    """Operands that must be ready when ``o`` issues. Reads have no side effect, so
    they issue ahead of their predicate, which only decides whether the access counts."""
    if o.pred is None or o.kind == "read_shared":
        return list(o.operands)
    return list(o.operands) + [o.pred]


def _is_input(o: IrOp) -> bool:
    return o.kind in ("const", "read_local")


def access_delay(o: IrOp, cl: dict) -> int:
    """Stages between issue and the cycle a shared access takes effect.

    A RAM read samples memory at the clock edge that delivers its data
    (write-first RAM), so its access happens when the value arrives.
    """
    return cl[o.id][1] if o.kind == "read_shared" else 0


def region_of(regions: list[Region], op_id: int) -> Region | None:
    inner = None
    for r in regions:
        if r.contains(op_id) and (inner is None or r.last - r.first < inner.last - inner.first):
            inner = r
    return inner


def _same_atomic(regions: list[Region], a: int, b: int) -> bool:
    return any(r.n == 1 and r.contains(a) and r.contains(b) for r in regions)


def schedule_block(block: BasicBlock, c: ScheduleConstraintSet | None = None, latencies: LatencyTable | None = None,
                   storage: dict[str, str] | None = None) -> StageSchedule:
    c = c or ScheduleConstraintSet(regions=list(block.regions))
    lat_tab = latencies or LatencyTable()
    storage = storage or {}
    ops = block.ops
    by_id = {o.id: o for o in ops}
    cl = {}
    for o in ops:
        cl[o.id] = op_cost(lat_tab, o, by_id, storage, c.single_stage)
    regions = [r for r in c.regions]
    start, depth, violated, lb = _fixpoint(block, ops, by_id, cl, {}, c, storage)
    # compact each region: issue its reads as late as the write stage allows
    for r in regions:
        shared = [o for o in ops if r.contains(o.id) and o.is_shared]
        reads = [o.id for o in shared if o.kind == "read_shared"]
        writes = [o.id for o in shared if o.kind == "write_shared"]
        if not reads or not writes:
            continue
        w, length = start[writes[0]], max(start.values())
        lo = min(start[i] + access_delay(by_id[i], cl) for i in reads)
        for t in range(w, lo, -1):
            trial = dict(lb)
            for i in reads:
                trial[i] = max(trial.get(i, 0), t - access_delay(by_id[i], cl))
            try:
                res = _fixpoint(block, ops, by_id, cl, trial, c, storage)
            except ScheduleInfeasible:
                continue
            if res[0][writes[0]] == w and max(res[0].values()) <= length:
                start, depth, violated, lb = res
                break
    n = max(start.values(), default=0) + 1
    stages = [[] for _ in range(n)]
    for o in ops:
        stages[start[o.id]].append(o.id)
    op_stage = {o.id: (start[o.id], start[o.id] + cl[o.id][1]) for o in ops}
    spans = {}
    for r in regions:
        st = [start[o.id] + access_delay(o, cl) for o in ops if r.contains(o.id) and o.is_shared]
        if st:
            spans[r.id] = (min(st), max(st))
    return StageSchedule(block.id, stages, op_stage, sorted(violated), spans, depth)


def _fixpoint(block, ops, by_id, cl, lb, c, storage):
    """Raise lower bounds until region writes (and N=1 region reads) share a stage."""
    lb = dict(lb)
    for _ in range(4 * len(ops) + 8):
        start, depth, violated = _asap(ops, by_id, cl, lb, c, storage)
        new_lb = dict(lb)
        for r in c.regions:
            shared = [o for o in ops if r.contains(o.id) and o.is_shared]
            writes = [o.id for o in shared if o.kind == "write_shared"]
            reads = [o.id for o in shared if o.kind == "read_shared"]
            for g in [writes] + ([reads] if r.n == 1 else []):
                if g:
                    top = max(start[i] + access_delay(by_id[i], cl) for i in g)
                    for i in g:
                        want = top - access_delay(by_id[i], cl)
                        if new_lb.get(i, 0) < want:
                            new_lb[i] = want
        if new_lb == lb:
            return start, depth, violated, lb
        lb = new_lb
    raise ScheduleInfeasible(f"BB{block.id}", "region write stage", "region read stage")


def _asap(ops, by_id, cl, lb, c: ScheduleConstraintSet, storage):
    start: dict[int, int] = {}
    depth: dict[int, int] = {}
    violated: set[int] = set()
    shared_seen: list[IrOp] = []
    term_floor = 0
    for o in ops:
        cost, _ = cl[o.id]
        s = lb.get(o.id, 0)
        deps = sched_deps(o)
        for p in deps:
            s = max(s, start[p] + cl[p][1])
        if o.kind in ("read_shared", "write_shared") and storage.get(o.var) == "ram" and o.operands:
            a = by_id[o.operands[0]]
            if not _is_input(a):
                s = max(s, start[a.id] + max(cl[a.id][1], 1))
        if o.is_shared:
            # program order holds between access stages, not issue stages
            own = access_delay(o, cl)
            for q in shared_seen:
                acc = start[q.id] + access_delay(q, cl)
                if _same_atomic(c.regions, q.id, o.id):
                    if q.kind == "read_shared" and o.kind == "write_shared":
                        s = max(s, acc)
                    continue
                s = max(s, acc - own)
                if q.kind == "write_shared" and o.kind == "read_shared" and q.var == o.var:
                    s = max(s, acc + 1 - own)
        if o.kind in TERMINATORS:
            s = max(s, term_floor)
        if c.single_stage:
            s = 0
        d = cost + max((depth[p] for p in deps if start[p] == s and cl[p][1] == 0), default=0)
        if d > c.depth and cost > 0:
            if c.single_stage or d - cost == 0:
                violated.add(s)
            else:
                s += 1
                d = cost
        start[o.id] = s
        depth[o.id] = d
        term_floor = max(term_floor, s + (access_delay(o, cl) if o.is_shared else 0))
        if o.is_shared:
            shared_seen.append(o)
    return start, depth, violated
