"""Structural checks over IR. Returns diagnostics instead of raising."""

from __future__ import annotations

from dataclasses import dataclass

from ..frontend.types import BoolT, IntT
from .model import TERMINATORS, IrProgram


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    function: str = ""
    block: int | None = None
    op: int | None = None

    def __str__(self) -> str:
        where = f"{self.function}:BB{self.block}" if self.block is not None else self.function
        return f"{self.kind} at {where}: {self.message}"


def verify_ir(prog: IrProgram) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    seen_sites: dict[int, tuple[str, int]] = {}
    rank = {s: i for i, s in enumerate(prog.site_order)}
    for f in prog.functions:
        ids = {b.id for b in f.blocks}
        if f.kind == "batched":
            if not f.params or not isinstance(f.params[0][1], IntT):
                out.append(Diagnostic("BatchedIndex", "batched function needs an integer index first parameter",
                                      f.name))
        for b in f.blocks:
            defined: dict[int, object] = {}
            if not b.ops or b.ops[-1].kind not in TERMINATORS:
                out.append(Diagnostic("MissingTerminator", "block does not end in a terminator", f.name, b.id))
            for pos, o in enumerate(b.ops):
                if o.id in defined:
                    out.append(Diagnostic("DuplicateOp", f"op id {o.id} defined twice", f.name, b.id, o.id))
                for x in o.operands + ([o.pred] if o.pred is not None else []):
                    if x not in defined:
                        out.append(Diagnostic("OrderViolation", f"op {o.id} uses {x} before its definition",
                                              f.name, b.id, o.id))
                if o.pred is not None and o.pred in defined and not isinstance(defined[o.pred], BoolT):
                    out.append(Diagnostic("PredicateType", f"predicate of op {o.id} is not bool", f.name, b.id, o.id))
                if o.kind in TERMINATORS and pos != len(b.ops) - 1:
                    out.append(Diagnostic("MisplacedTerminator", f"terminator op {o.id} is not last", f.name, b.id,
                                          o.id))
                if o.is_shared:
                    if o.site in seen_sites:
                        out.append(Diagnostic("DuplicateSite", f"site {o.site} appears more than once", f.name,
                                              b.id, o.id))
                    seen_sites[o.site] = (f.name, b.id)
                defined[o.id] = o.type
            for _, t in b.succs:
                if t not in ids and not any(t in {x.id for x in g.blocks} for g in prog.functions):
                    out.append(Diagnostic("DanglingEdge", f"edge to unknown block {t}", f.name, b.id))
            sites = [o.site for o in b.ops if o.is_shared]
            ranked = [rank[s] for s in sites if s in rank]
            if ranked != sorted(ranked):
                out.append(Diagnostic("SiteOrder", f"shared accesses out of source order: {sites}", f.name, b.id))
        # connectivity from the entry block over intra-function edges
        reach, todo = set(), [f.entry]
        while todo:
            bid = todo.pop()
            if bid in reach or bid not in ids:
                continue
            reach.add(bid)
            todo += [t for k, t in f.block(bid).succs if k not in ("call", "return")]
        for b in f.blocks:
            if b.id not in reach:
                out.append(Diagnostic("Unreachable", "block is not reachable from the entry", f.name, b.id))
    return out
