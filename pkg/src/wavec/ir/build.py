"""CFG construction and if-conversion.

``build_cfg`` splits every function at calls to batched/async/non-inlined
functions, loop boundaries and ``wait_for`` sites. Conditionals stay
structured inside a block until ``if_convert`` flattens them into predicated
ops. Block ids are numbered program-wide in discovery order: a callee's
blocks are numbered right after the block that first calls it.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import IfConvertError
from ..frontend.elaborated import (
    EBin, ECast, EConst, EExpr, ELocal, ERead, ElaboratedProgram, ESelect, EUn, SAsync, SBatched, SCall, SIf,
    SLet, SLoop, SPipelinedDo, SRegion, SReturn, SSet, SStmt, SWait, SWrite, walk_stmts,
)
from ..frontend.lexer import NOWHERE
from ..frontend.types import BOOL, VOID
from .model import BasicBlock, IrFunction, IrOp, IrProgram, LoopInfo, Region

SPLITTERS = (SLoop, SWait, SBatched, SPipelinedDo, SCall, SAsync)


@dataclass
class Term:
    """A block terminator before if-conversion."""

    kind: str
    stmt: SStmt | None = None
    cond: EExpr | None = None
    loop: int | None = None


def _contains(stmts: list[SStmt], kinds) -> bool:
    return any(isinstance(s, kinds) for s in walk_stmts(stmts))


class _Names:
    def __init__(self, used: set[str]):
        self.used = used

    def fresh(self, base: str) -> str:
        k = 0
        while f"{base}{k}" in self.used:
            k += 1
        self.used.add(f"{base}{k}")
        return f"{base}{k}"


def _not(e: EExpr) -> EExpr:
    return EUn(BOOL, "!", e)


def _and(a: EExpr | None, b: EExpr) -> EExpr:
    return b if a is None else EBin(BOOL, "&&", a, b)


def hoist_waits(stmts: list[SStmt], names: _Names) -> list[SStmt]:
    """Rewrite conditionals that contain ``wait_for`` into predicated segments.

    ``if (c) { A; wait_for(e); B; }`` becomes ``p = c; if (p) {A}``, a wait on
    ``!p || e`` whose prelude runs under ``p``, then ``if (p) {B}``.
    """
    out: list[SStmt] = []
    for s in stmts:
        if isinstance(s, SIf) and _contains(s.then + s.other, SWait):
            out += _split_if(s, None, names)
        elif isinstance(s, SLoop):
            out.append(SLoop(s.pre_cond, hoist_waits(s.body, names), s.cond, s.ordered))
        elif isinstance(s, SRegion) and _contains(s.body, SWait):
            raise IfConvertError(NOWHERE, "wait_for inside a scheduling region is not supported")
        else:
            out.append(s)
    return out


def _split_if(s: SIf, outer: EExpr | None, names: _Names) -> list[SStmt]:
    c = names.fresh("cond")
    then_p, else_p = names.fresh("pred"), names.fresh("pred")
    cl = ELocal(BOOL, c)
    out: list[SStmt] = [
        SLet(c, BOOL, s.cond),
        SLet(then_p, BOOL, _and(outer, cl)),
        SLet(else_p, BOOL, _and(outer, _not(cl))),
    ]
    out += _segments(s.then, ELocal(BOOL, then_p), names)
    out += _segments(s.other, ELocal(BOOL, else_p), names)
    return out


def _segments(stmts: list[SStmt], p: ELocal, names: _Names) -> list[SStmt]:
    out: list[SStmt] = []
    group: list[SStmt] = []

    def flush():
        if group:
            out.append(SIf(p, list(group), []))
            group.clear()

    for s in stmts:
        if isinstance(s, SWait):
            flush()
            out.append(SWait([SIf(p, s.body, [])] if s.body else [], EBin(BOOL, "||", _not(p), s.cond)))
        elif isinstance(s, SIf) and _contains(s.then + s.other, SWait):
            flush()
            out += _split_if(s, p, names)
        else:
            group.append(s)
    flush()
    return out


class _CfgBuilder:
    def __init__(self, prog: ElaboratedProgram):
        self.prog = prog
        self.next_block = 0
        self.next_loop = 0
        self.fns: dict[str, IrFunction] = {}
        self.order: list[str] = []

    def new_block(self, f: IrFunction, kind: str = "block", loop: int | None = None) -> BasicBlock:
        b = BasicBlock(self.next_block, kind, loop=loop)
        self.next_block += 1
        f.blocks.append(b)
        return b

    def function(self, name: str) -> IrFunction:
        if name in self.fns:
            return self.fns[name]
        ef = self.prog.function(name)
        attrs = {}
        if ef.thread_rate is not None:
            attrs["thread_rate"] = ef.thread_rate
        f = IrFunction(ef.name, list(ef.params), ef.ret, ef.kind, attrs=attrs)
        self.fns[name] = f
        self.order.append(name)
        used = {n for n, _ in ef.params} | {s.name for s in walk_stmts(ef.body) if isinstance(s, SLet)}
        body = hoist_waits(ef.body, _Names(used))
        f.locals = {n: t for n, t in ef.params}
        for s in walk_stmts(body):
            if isinstance(s, SLet):
                f.locals[s.name] = s.type
            elif isinstance(s, SCall) and s.dest is not None:
                f.locals[s.dest] = self.prog.function(s.fn).ret
        first = self.new_block(f)
        f.entry = first.id
        last = self.seq(f, first, body, None)
        if last.term_stmt is None:
            last.term_stmt = Term("return")
        return f

    def seq(self, f: IrFunction, cur: BasicBlock, stmts: list[SStmt], loop: int | None) -> BasicBlock:
        for s in stmts:
            if cur.term_stmt is not None:
                break  # statements after a return are unreachable
            if isinstance(s, SLoop):
                lid = self.next_loop
                self.next_loop += 1
                cur.term_stmt = Term("loop_enter", s, s.pre_cond, lid)
                head = self.new_block(f, loop=lid)
                latch = self.seq(f, head, s.body, lid)
                latch.term_stmt = Term("loop_back", s, s.cond, lid)
                nxt = self.new_block(f, loop=loop)
                body_ids = [b.id for b in f.blocks if head.id <= b.id <= latch.id]
                f.loops.append(LoopInfo(lid, s.ordered, cur.id, head.id, latch.id, nxt.id, body_ids))
                cur = nxt
            elif isinstance(s, SWait):
                cur.term_stmt = Term("jump")
                w = self.new_block(f, "wait", loop=loop)
                w.stmts = list(s.body)
                w.term_stmt = Term("wait", s, s.cond)
                cur = self.new_block(f, loop=loop)
            elif isinstance(s, (SBatched, SPipelinedDo, SCall, SAsync)):
                kind = {SBatched: "batched_call", SPipelinedDo: "pipelined_do", SCall: "call", SAsync: "async_call"}
                cur.term_stmt = Term(kind[type(s)], s)
                self.function(s.fn)
                cur = self.new_block(f, loop=loop)
            elif isinstance(s, SReturn):
                cur.term_stmt = Term("return", s, s.value)
            else:
                cur.stmts.append(s)
        return cur


def build_cfg(prog: ElaboratedProgram) -> IrProgram:
    """Split every reachable function into basic blocks (structured form)."""
    b = _CfgBuilder(prog)
    b.function(prog.entry)
    for ef in prog.functions:  # unreachable functions still get a CFG
        b.function(ef.name)
    fns = [b.fns[n] for n in b.order]
    # fill in intra-function successor edges
    for f in fns:
        for blk in f.blocks:
            _set_succs(f, blk)
    site_order = [s for f in fns for blk in f.blocks for s in _stmt_sites(blk)]
    return IrProgram(list(prog.shared), fns, prog.entry, site_order)


def _stmt_sites(blk: BasicBlock) -> list[int]:
    from ..frontend.elaborated import stmt_exprs, walk_expr

    out = []

    def visit(stmts):
        for s in stmts:
            for e in stmt_exprs(s):
                out.extend(x.site for x in walk_expr(e) if isinstance(x, ERead))
            if isinstance(s, SWrite):
                out.append(s.site)
            if isinstance(s, SIf):
                visit(s.then)
                visit(s.other)
            elif isinstance(s, (SRegion,)):
                visit(s.body)

    visit(blk.stmts)
    t = blk.term_stmt
    if t is not None and t.cond is not None and t.kind == "wait":
        out.extend(x.site for x in walk_expr(t.cond) if isinstance(x, ERead))
    return out


def _set_succs(f: IrFunction, blk: BasicBlock) -> None:
    t = blk.term_stmt
    nxt = blk.id + 1
    if t.kind == "loop_enter":
        lp = f.loop(t.loop)
        blk.succs = [("fall-through", lp.head), ("loop-exit", lp.exit)]
    elif t.kind == "loop_back":
        lp = f.loop(t.loop)
        blk.succs = [("loop-back", lp.head), ("loop-exit", lp.exit)]
    elif t.kind == "return":
        blk.succs = []
    else:
        # the continuation block of a call/wait is created right after the current block,
        # except that a callee's blocks may be numbered in between
        later = [b.id for b in f.blocks if b.id > blk.id]
        nxt = min(later)
        blk.succs = [("fall-through", nxt)]


# ---- if-conversion ---------------------------------------------------------------


class _Converter:
    def __init__(self, f: IrFunction, blk: BasicBlock, prog: IrProgram, next_region: list[int]):
        self.f = f
        self.blk = blk
        self.prog = prog
        self.ops: list[IrOp] = []
        self.env: dict[str, int] = {}
        self.assigned: list[str] = []
        self.pred: int | None = None
        self.writes: list[tuple[str, int | None, int, int | None]] = []
        self.consts: dict = {}
        self.next_region = next_region

    def add(self, kind, t, operands=(), **kw) -> int:
        o = IrOp(len(self.ops), kind, t, list(operands), **kw)
        self.ops.append(o)
        return o.id

    def const(self, t, v) -> int:
        key = (str(t), repr(v))
        if key not in self.consts:
            self.consts[key] = self.add("const", t, value=v)
        return self.consts[key]

    def local(self, name: str) -> int:
        if name not in self.env:
            self.env[name] = self.add("read_local", self.f.locals[name], var=name)
        return self.env[name]

    def assign(self, name: str, value: int) -> None:
        if self.pred is not None:
            old = self.local(name)
            value = self.add("select", self.f.locals[name], [self.pred, value, old])
        self.env[name] = value
        if name not in self.assigned:
            self.assigned.append(name)

    def and_pred(self, c: int) -> int:
        if self.pred is None:
            return c
        return self.add("binop", BOOL, [self.pred, c], op="&&")

    def expr(self, e: EExpr) -> int:
        if isinstance(e, EConst):
            return self.const(e.type, e.value)
        if isinstance(e, ELocal):
            return self.local(e.name)
        if isinstance(e, ERead):
            idx = None if e.index is None else self.expr(e.index)
            raw = self.add("read_shared", e.type, [] if idx is None else [idx], var=e.var, site=e.site,
                           pred=self.pred)
            return self.forward(e.var, idx, raw, e.type)
        if isinstance(e, EBin):
            a, b = self.expr(e.lhs), self.expr(e.rhs)
            return self.add("binop", e.type, [a, b], op=e.op)
        if isinstance(e, EUn):
            return self.add("unop", e.type, [self.expr(e.operand)], op=e.op)
        if isinstance(e, ESelect):
            c, a, b = self.expr(e.cond), self.expr(e.then), self.expr(e.other)
            return self.add("select", e.type, [c, a, b])
        if isinstance(e, ECast):
            return self.add("cast", e.type, [self.expr(e.operand)])
        raise TypeError(e)

    def expr_under(self, e: EExpr, pred: int | None) -> int:
        saved, self.pred = self.pred, pred
        try:
            return self.expr(e)
        finally:
            self.pred = saved

    def forward(self, var: str, idx: int | None, raw: int, t) -> int:
        """Own earlier writes in this block are visible to later reads."""
        value = raw
        for wvar, widx, wval, wpred in self.writes:
            if wvar != var:
                continue
            conds = []
            if wpred is not None:
                conds.append(wpred)
            if idx is not None and widx != idx:
                a, b = self.ops[idx], self.ops[widx]
                if a.kind == "const" and b.kind == "const":
                    if a.value != b.value:
                        continue
                else:
                    conds.append(self.add("binop", BOOL, [idx, widx], op="=="))
            if not conds:
                value = wval
                continue
            c = conds[0]
            for extra in conds[1:]:
                c = self.add("binop", BOOL, [c, extra], op="&&")
            value = self.add("select", t, [c, wval, value], attrs={"forward": True})
        return value

    def stmts(self, ss: list[SStmt]) -> None:
        for s in ss:
            self.stmt(s)

    def stmt(self, s: SStmt) -> None:
        if isinstance(s, SLet):
            # a declaration is only visible under its own predicate, so no merge is needed
            saved, self.pred = self.pred, None
            self.assign(s.name, self.expr_under(s.init, saved))
            self.pred = saved
        elif isinstance(s, SSet):
            self.assign(s.name, self.expr(s.value))
        elif isinstance(s, SWrite):
            idx = None if s.index is None else self.expr(s.index)
            val = self.expr(s.value)
            self.add("write_shared", self.prog.shared_var(s.var).elem_type, ([] if idx is None else [idx]) + [val],
                     var=s.var, site=s.site, pred=self.pred)
            self.writes.append((s.var, idx, val, self.pred))
        elif isinstance(s, SIf):
            c = self.expr(s.cond)
            c_op = self.ops[c]
            if c_op.kind == "const":
                self.stmts(s.then if c_op.value else s.other)
                return
            saved = self.pred
            self.pred = self.and_pred(c)
            self.stmts(s.then)
            if s.other:
                self.pred = saved
                nc = self.add("unop", BOOL, [c], op="!")
                self.pred = self.and_pred(nc)
                self.stmts(s.other)
            self.pred = saved
        elif isinstance(s, SRegion):
            first = len(self.ops)
            self.stmts(s.body)
            rid = self.next_region[0]
            self.next_region[0] += 1
            self.blk.regions.append(Region(rid, s.n, s.atomic, first, len(self.ops) - 1))
        elif isinstance(s, SPLITTERS + (SReturn,)):
            raise IfConvertError(NOWHERE, f"{type(s).__name__[1:].lower()} inside a conditional cannot be if-converted")
        else:
            raise TypeError(s)

    def terminate(self) -> None:
        t: Term = self.blk.term_stmt
        kw: dict = {}
        operands: list[int] = []
        s = t.stmt
        if t.kind in ("loop_enter", "loop_back", "wait"):
            if t.cond is not None:
                operands = [self.expr(t.cond)]
            kw["attrs"] = {"loop": t.loop} if t.loop is not None else {}
        elif t.kind == "batched_call":
            operands = [self.expr(s.count)] + [self.expr(a) for a in s.args]
            kw.update(fn=s.fn, call_site=s.call_site)
        elif t.kind in ("pipelined_do", "call", "async_call"):
            operands = [self.expr(a) for a in s.args]
            kw.update(fn=s.fn, call_site=s.call_site)
            if t.kind == "call" and s.dest is not None:
                kw["attrs"] = {"dest": s.dest}
        elif t.kind == "return" and t.cond is not None:
            operands = [self.expr(t.cond)]
        for name in self.assigned:
            self.add("write_local", self.f.locals[name], [self.env[name]], var=name)
        ret_t = VOID
        if t.kind == "return" and operands:
            ret_t = self.ops[operands[0]].type
        self.add(t.kind, ret_t, operands, **kw)

    def run(self) -> list[IrOp]:
        self.stmts(self.blk.stmts)
        self.terminate()
        return self.ops


def if_convert(f: IrFunction, prog: IrProgram, next_region: list[int] | None = None) -> IrFunction:
    """Flatten every block of ``f`` into predicated ops (in place)."""
    counter = next_region if next_region is not None else [0]
    for blk in f.blocks:
        blk.regions = []
        blk.ops = _Converter(f, blk, prog, counter).run()
    compute_liveness(f)
    return f


def compute_liveness(f: IrFunction) -> None:
    use: dict[int, set[str]] = {}
    defs: dict[int, set[str]] = {}
    for b in f.blocks:
        use[b.id] = {o.var for o in b.ops if o.kind == "read_local"}
        defs[b.id] = {o.var for o in b.ops if o.kind == "write_local"}
        b.live_in, b.live_out = set(), set()
    changed = True
    while changed:
        changed = False
        for b in reversed(f.blocks):
            out: set[str] = set()
            for k, s in b.succs:
                if k not in ("call", "return"):
                    out |= f.block(s).live_in
            t = b.terminator
            if t.kind == "call" and t.attrs.get("dest"):
                out.discard(t.attrs["dest"])
            inn = use[b.id] | (out - defs[b.id])
            if out != b.live_out or inn != b.live_in:
                b.live_out, b.live_in = out, inn
                changed = True


def add_call_edges(prog: IrProgram) -> None:
    """Record cross-function call/return edges for CFG dumps."""
    for f in prog.functions:
        for b in f.blocks:
            b.succs = [(k, t) for k, t in b.succs if k not in ("call",)]
            t = b.terminator
            if t.kind in ("batched_call", "pipelined_do", "call", "async_call"):
                callee = prog.function(t.fn)
                b.succs.append(("call", callee.entry))
    for f in prog.functions:
        for b in f.blocks:
            b.succs = [(k, t) for k, t in b.succs if k != "return"]
    for f in prog.functions:
        for b in f.blocks:
            t = b.terminator
            if t.kind in ("batched_call", "pipelined_do", "call"):
                cont = [s for k, s in b.succs if k == "fall-through"][0]
                for rb in prog.function(t.fn).blocks:
                    if rb.terminator.kind == "return":
                        rb.succs.append(("return", cont))


def convert_program(prog: IrProgram) -> IrProgram:
    counter = [0]
    for f in prog.functions:
        if_convert(f, prog, counter)
    add_call_edges(prog)
    return prog

