"""Predicated CFG IR.

Within a block, ops are in SSA-like order: every operand is an earlier op of
the same block. Thread-local variables cross block boundaries through
``read_local``/``write_local`` ops. The last op of every block is its
terminator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend.elaborated import SharedVar, SStmt
from ..frontend.types import SemType, type_to_json, value_to_json

PURE_KINDS = {"const", "unop", "binop", "select", "cast", "read_local"}
TERMINATORS = {
    "jump", "loop_enter", "loop_back", "wait", "batched_call", "pipelined_do", "call", "async_call", "return",
}


@dataclass
class IrOp:
    id: int
    kind: str
    type: SemType
    operands: list[int] = field(default_factory=list)
    pred: int | None = None  # op id of a bool predicate, None = always
    op: str | None = None  # operator for unop/binop
    value: object = None  # constant value
    var: str | None = None  # local or shared variable name
    site: int | None = None  # static site id of shared accesses
    fn: str | None = None  # callee of call-like terminators
    call_site: int | None = None
    attrs: dict = field(default_factory=dict)

    @property
    def is_shared(self) -> bool:
        return self.kind in ("read_shared", "write_shared")

    def to_json(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "type": type_to_json(self.type), "operands": list(self.operands)}
        if self.pred is not None:
            d["pred"] = self.pred
        for k in ("op", "var", "site", "fn", "call_site"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        if self.kind == "const":
            d["value"] = value_to_json(self.value)
        if self.attrs:
            d["attrs"] = {k: v for k, v in sorted(self.attrs.items())}
        return d


@dataclass
class Region:
    """A ``[[schedule(n)]]``/``atomic`` block mapped onto an op id range."""

    id: int
    n: int
    atomic: bool
    first: int  # first op id (inclusive)
    last: int  # last op id (inclusive)

    def contains(self, op_id: int) -> bool:
        return self.first <= op_id <= self.last

    def to_json(self) -> dict:
        return {"id": self.id, "n": self.n, "atomic": self.atomic, "ops": [self.first, self.last]}


@dataclass
class LoopInfo:
    id: int
    ordered: bool
    pre_block: int  # block whose terminator is loop_enter
    head: int  # first body block
    latch: int  # block whose terminator is loop_back
    exit: int  # block after the loop
    body_blocks: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "id": self.id, "ordered": self.ordered, "pre": self.pre_block, "head": self.head,
            "latch": self.latch, "exit": self.exit, "body": list(self.body_blocks),
        }


@dataclass
class BasicBlock:
    id: int
    kind: str = "block"  # block | wait
    stmts: list[SStmt] = field(default_factory=list)  # structured form before if-conversion
    term_stmt: SStmt | None = None  # the splitting statement that ends the block
    ops: list[IrOp] = field(default_factory=list)
    succs: list[tuple[str, int]] = field(default_factory=list)
    regions: list[Region] = field(default_factory=list)
    live_in: set[str] = field(default_factory=set)
    live_out: set[str] = field(default_factory=set)
    loop: int | None = None  # innermost enclosing loop id

    @property
    def terminator(self) -> IrOp:
        return self.ops[-1]

    def op(self, op_id: int) -> IrOp:
        for o in self.ops:
            if o.id == op_id:
                return o
        raise KeyError(op_id)

    def shared_ops(self) -> list[IrOp]:
        return [o for o in self.ops if o.is_shared]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "ops": [o.to_json() for o in self.ops],
            "succs": [[k, t] for k, t in self.succs],
            "regions": [r.to_json() for r in self.regions],
            "live_in": sorted(self.live_in),
            "live_out": sorted(self.live_out),
        }


@dataclass
class IrFunction:
    name: str
    params: list[tuple[str, SemType]]
    ret: SemType
    kind: str  # normal | batched | async
    blocks: list[BasicBlock] = field(default_factory=list)
    entry: int = 0
    attrs: dict = field(default_factory=dict)
    loops: list[LoopInfo] = field(default_factory=list)
    locals: dict[str, SemType] = field(default_factory=dict)

    def block(self, bid: int) -> BasicBlock:
        for b in self.blocks:
            if b.id == bid:
                return b
        raise KeyError(bid)

    def loop(self, lid: int) -> LoopInfo:
        for lp in self.loops:
            if lp.id == lid:
                return lp
        raise KeyError(lid)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "params": [[n, type_to_json(t)] for n, t in self.params],
            "ret": type_to_json(self.ret),
            "attrs": dict(sorted(self.attrs.items())),
            "entry": self.entry,
            "blocks": [b.to_json() for b in self.blocks],
            "loops": [lp.to_json() for lp in self.loops],
        }


@dataclass
class IrProgram:
    shared: list[SharedVar]
    functions: list[IrFunction]
    entry: str
    site_order: list[int] = field(default_factory=list)  # source order of shared-access sites

    def function(self, name: str) -> IrFunction:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def shared_var(self, name: str) -> SharedVar:
        for v in self.shared:
            if v.name == name:
                return v
        raise KeyError(name)

    def all_blocks(self):
        for f in self.functions:
            for b in f.blocks:
                yield f, b

    def find_block(self, bid: int) -> tuple[IrFunction, BasicBlock]:
        for f, b in self.all_blocks():
            if b.id == bid:
                return f, b
        raise KeyError(bid)

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "entry": self.entry,
            "shared": [
                {"name": v.name, "type": type_to_json(v.type), "storage": v.storage, "init": value_to_json(v.init)}
                for v in self.shared
            ],
            "functions": [f.to_json() for f in self.functions],
        }
