"""IR transformations: single-call-site inlining, block merging and cleanup.

Shared-memory ops are never deleted, merged or reordered by any pass here:
the compiler does not reason about inter-thread dependencies.
"""

from __future__ import annotations

from ..frontend.types import BoolT, VOID
from ..semantics import cast_value, eval_binop, eval_unop
from .build import add_call_edges, build_cfg, compute_liveness, convert_program
from .model import PURE_KINDS, BasicBlock, IrFunction, IrOp, IrProgram

CALL_KINDS = ("batched_call", "pipelined_do", "call", "async_call")


# ---- optimize ----------------------------------------------------------------------


def _fold(o: IrOp, ops: dict[int, IrOp]):
    """Return the constant value of ``o`` if all its inputs are constant, else None."""
    vals = [ops[i] for i in o.operands]
    if not all(v.kind == "const" for v in vals):
        return None
    xs = [v.value for v in vals]
    if o.kind == "binop":
        return eval_binop(o.op, xs[0], xs[1], o.type, vals[0].type)
    if o.kind == "unop":
        return eval_unop(o.op, xs[0], o.type)
    if o.kind == "cast":
        return cast_value(xs[0], o.type)
    return None


def optimize_block(b: BasicBlock) -> bool:
    """Constant folding, copy propagation and dead pure-op elimination."""
    changed = False
    rep: dict[int, int] = {}
    by_id: dict[int, IrOp] = {}
    consts: dict = {}
    pure: dict = {}  # structural key -> op id, for common subexpressions
    kept: list[IrOp] = []
    for o in b.ops:
        o.operands = [rep.get(i, i) for i in o.operands]
        if o.pred is not None:
            o.pred = rep.get(o.pred, o.pred)
            p = by_id[o.pred]
            if p.kind == "const" and p.value is True:
                o.pred = None
                changed = True
        target = None
        if o.kind == "const":
            key = (str(o.type), repr(o.value))
            target = consts.get(key)
            if target is None:
                consts[key] = o.id
        elif o.kind in ("binop", "unop", "cast"):
            key = (o.kind, o.op, str(o.type), tuple(o.operands))
            if key in pure:
                target = pure[key]
            elif o.kind == "cast" and by_id[o.operands[0]].type == o.type:
                target = o.operands[0]
            else:
                v = _fold(o, by_id)
                if v is not None:
                    o.kind, o.operands, o.op, o.value = "const", [], None, v
                    key = (str(o.type), repr(v))
                    target = consts.get(key)
                    if target is None:
                        consts[key] = o.id
                    changed = True
                elif o.kind == "binop" and o.op in ("&&", "||"):
                    target = _short_circuit(o, by_id)
                elif o.kind == "unop" and o.op == "!" and by_id[o.operands[0]].kind == "unop" \
                        and by_id[o.operands[0]].op == "!":
                    target = by_id[o.operands[0]].operands[0]
        elif o.kind == "select":
            c, a, z = o.operands
            if by_id[c].kind == "const":
                target = a if by_id[c].value else z
            elif a == z:
                target = a
            elif _is_bool_const(by_id[a], True) and _is_bool_const(by_id[z], False):
                target = c
        if target is not None and target != o.id:
            rep[o.id] = target
            changed = True
            continue
        by_id[o.id] = o
        if o.kind in ("binop", "unop", "cast", "select"):
            pure.setdefault((o.kind, o.op, str(o.type), tuple(o.operands)), o.id)
        kept.append(o)
    # keep only the last write_local of each variable
    seen: set[str] = set()
    final: list[IrOp] = []
    for o in reversed(kept):
        if o.kind == "write_local":
            if o.var in seen:
                changed = True
                continue
            seen.add(o.var)
        final.append(o)
    final.reverse()
    # dead pure ops
    while True:
        used = set()
        for o in final:
            used.update(o.operands)
            if o.pred is not None:
                used.add(o.pred)
        alive = [o for o in final if o.kind not in PURE_KINDS or o.id in used]
        if len(alive) == len(final):
            break
        final = alive
        changed = True
    b.ops = final
    return changed


def _is_bool_const(o: IrOp, v: bool) -> bool:
    return o.kind == "const" and isinstance(o.type, BoolT) and o.value is v


def _short_circuit(o: IrOp, by_id: dict[int, IrOp]) -> int | None:
    a, z = (by_id[i] for i in o.operands)
    for x, other in ((a, z), (z, a)):
        if x.kind == "const" and isinstance(x.type, BoolT):
            if o.op == "&&" and x.value is True or o.op == "||" and x.value is False:
                return other.id
        # x op (x op y) == x op y
        if other.kind == "binop" and other.op == o.op and x.id in other.operands:
            return other.id
    return None


def drop_dead_local_writes(f: IrFunction) -> bool:
    changed = False
    for b in f.blocks:
        keep = [o for o in b.ops if o.kind != "write_local" or o.var in b.live_out]
        if len(keep) != len(b.ops):
            b.ops = keep
            changed = True
    return changed


def optimize(prog: IrProgram) -> IrProgram:
    """Run the cleanup passes to a fixpoint (in place)."""
    for f in prog.functions:
        while True:
            changed = False
            for b in f.blocks:
                changed |= optimize_block(b)
            compute_liveness(f)
            changed |= drop_dead_local_writes(f)
            if not changed:
                break
    return prog


# ---- single-call-site inlining --------------------------------------------------------


def _call_sites(prog: IrProgram) -> dict[str, list[tuple[IrFunction, BasicBlock]]]:
    sites: dict[str, list] = {}
    for f in prog.functions:
        for b in f.blocks:
            t = b.terminator
            if t.kind in CALL_KINDS:
                sites.setdefault(t.fn, []).append((f, b))
    return sites


def _next_id(b: BasicBlock) -> int:
    return max((o.id for o in b.ops), default=-1) + 1


def inline_single_callsite(prog: IrProgram) -> IrProgram:
    """Merge every plain function with exactly one (normal) call site into its caller."""
    while True:
        sites = _call_sites(prog)
        cand = None
        for g in prog.functions:
            uses = sites.get(g.name, [])
            if (g.name != prog.entry and g.kind == "normal" and not g.attrs and len(uses) == 1
                    and uses[0][1].terminator.kind == "call" and uses[0][0] is not g):
                cand = (g, *uses[0])
                break
        if cand is None:
            break
        _inline(prog, *cand)
    for f in prog.functions:
        merge_blocks(f)
        compute_liveness(f)
    return prog


def _inline(prog: IrProgram, g: IrFunction, f: IrFunction, b: BasicBlock) -> None:
    call = b.terminator
    cont = [t for k, t in b.succs if k == "fall-through"][0]
    ren = {n: f"{g.name}__{n}" for n in g.locals}
    for name, t in g.locals.items():
        f.locals[ren[name]] = t
    for gb in g.blocks:
        for o in gb.ops:
            if o.kind in ("read_local", "write_local"):
                o.var = ren[o.var]
        if gb.loop is None:
            gb.loop = b.loop
        gb.succs = [(k, t) for k, t in gb.succs if k != "return"]
    # argument passing and the jump into the callee
    b.ops.pop()
    nid = _next_id(b)
    for (pname, pt), arg in zip(g.params, call.operands):
        b.ops.append(IrOp(nid, "write_local", pt, [arg], var=ren[pname]))
        nid += 1
    b.ops.append(IrOp(nid, "jump", VOID))
    b.succs = [("fall-through", g.entry)]
    dest = call.attrs.get("dest")
    for gb in g.blocks:
        t = gb.terminator
        if t.kind != "return":
            continue
        gb.ops.pop()
        nid = _next_id(gb)
        if dest is not None and t.operands:
            gb.ops.append(IrOp(nid, "write_local", f.locals[dest], [t.operands[0]], var=dest))
            nid += 1
        gb.ops.append(IrOp(nid, "jump", VOID))
        gb.succs = [("fall-through", cont)]
    pos = f.blocks.index(b) + 1
    f.blocks[pos:pos] = g.blocks
    f.loops += g.loops
    prog.functions.remove(g)


def _preds(f: IrFunction, bid: int) -> list[int]:
    return [b.id for b in f.blocks for _, t in b.succs if t == bid]


def merge_blocks(f: IrFunction) -> None:
    """Merge ``X -> Y`` when X ends in a plain jump and Y has no other predecessor."""
    changed = True
    while changed:
        changed = False
        for x in f.blocks:
            t = x.terminator
            if t.kind != "jump" or x.kind != "block" or len(x.succs) != 1:
                continue
            yid = x.succs[0][1]
            y = f.block(yid)
            if y.kind != "block" or y is x or _preds(f, yid) != [x.id] or yid == f.entry:
                continue
            if any(lp.head == yid for lp in f.loops):
                continue
            _merge(f, x, y)
            changed = True
            break


def _merge(f: IrFunction, x: BasicBlock, y: BasicBlock) -> None:
    x.ops.pop()
    env = {o.var: o.operands[0] for o in x.ops if o.kind == "write_local"}
    nid = _next_id(x)
    remap: dict[int, int] = {}
    old_ids = [o.id for o in y.ops]
    aliased: set[int] = set()
    for o in y.ops:
        if o.kind == "read_local" and o.var in env:
            remap[o.id] = env[o.var]
            aliased.add(o.id)
            continue
        remap[o.id] = nid
        o.id = nid
        nid += 1
        o.operands = [remap[i] for i in o.operands]
        if o.pred is not None:
            o.pred = remap[o.pred]
        x.ops.append(o)
    moved = {i: remap[i] for i in old_ids if i not in aliased}
    for r in y.regions:
        inside = [moved[i] for i in old_ids if r.first <= i <= r.last and i in moved]
        if inside:
            r.first, r.last = min(inside), max(inside)
        x.regions.append(r)
    x.succs = y.succs
    f.blocks.remove(y)
    for lp in f.loops:
        for attr in ("pre_block", "head", "latch", "exit"):
            if getattr(lp, attr) == y.id:
                setattr(lp, attr, x.id)
        lp.body_blocks = [bid for bid in lp.body_blocks if bid != y.id]


def lower_program(prog) -> IrProgram:
    """Elaborated program -> optimized IR."""
    ir = convert_program(build_cfg(prog))
    inline_single_callsite(ir)
    optimize(ir)
    add_call_edges(ir)
    return ir
