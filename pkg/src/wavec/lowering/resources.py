"""Desk-scale resource estimate for a lowered graph."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..frontend.types import ArrayT
from ..ir.model import BasicBlock, IrFunction
from ..scheduler import StageSchedule
from .graph import PipelineGraph

FSM_KINDS = ("dispatch-fsm", "collect-fsm", "loop-arbiter", "wait-evaluator", "return-dispatch")


@dataclass
class ResourceReport:
    stage_count: int
    pipeline_register_bits: int
    fifo_count: int
    fifo_bits: int
    ram_count: int
    ram_bits: int
    rom_bits: int
    fsm_count: int
    guard_count: int
    rate_limiter_count: int

    def to_json(self) -> dict:
        return {"schema": 1, **asdict(self)}


def block_register_bits(f: IrFunction, b: BasicBlock, sc: StageSchedule) -> int:
    """Bits held in pipeline registers across the stage boundaries of one block."""
    n = sc.n_stages
    if n <= 1:
        return 0
    last_use: dict[int, int] = {}
    for o in b.ops:
        use = sc.start(o.id)
        if o.kind == "write_local":
            use = n - 1  # locals leave the block with the thread
        for p in o.operands + ([o.pred] if o.pred is not None else []):
            last_use[p] = max(last_use.get(p, 0), use)
    bits = 0
    for o in b.ops:
        if o.kind == "const" or o.id not in last_use:
            continue
        ready = sc.op_stage[o.id][1]
        bits += o.type.bits() * max(0, last_use[o.id] - ready)
    written = {o.var for o in b.ops if o.kind == "write_local"}
    for v in b.live_out - written:
        bits += f.locals[v].bits() * (n - 1)  # carried through untouched
    return bits


def compute_resource_report(g: PipelineGraph) -> ResourceReport:
    prog, sched = g.ir, g.schedule
    stage_count = sum(n.params["stages"] for n in g.nodes if n.kind in ("stage-pipeline", "wait-evaluator"))
    reg = 0
    for f, b in prog.all_blocks():
        reg += block_register_bits(f, b, sched.blocks[b.id])
    fifos = [n for n in g.nodes if n.kind == "fifo"]
    fifo_bits = sum(n.params["capacity"] * n.params["width"] for n in fifos)
    # reorder buffers and loopback storage are FIFO-like state too
    fifo_bits += sum(n.params["capacity"] * n.params["width"] for n in g.nodes if n.kind == "reorder-buffer")
    written = {o.var for _, b in prog.all_blocks() for o in b.ops if o.kind == "write_shared"}
    ram_count = ram_bits = rom_bits = 0
    for v in prog.shared:
        if v.storage != "ram":
            continue
        if v.name in written:
            ram_count += 1
            ram_bits += v.type.bits()
        else:
            rom_bits += v.type.bits()
    assert all(isinstance(v.type, ArrayT) for v in prog.shared if v.storage == "ram")
    return ResourceReport(
        stage_count=stage_count,
        pipeline_register_bits=reg,
        fifo_count=len(fifos),
        fifo_bits=fifo_bits,
        ram_count=ram_count,
        ram_bits=ram_bits,
        rom_bits=rom_bits,
        fsm_count=sum(1 for n in g.nodes if n.kind in FSM_KINDS),
        guard_count=len(g.by_kind("region-guard")),
        rate_limiter_count=len(g.by_kind("rate-limiter")),
    )
