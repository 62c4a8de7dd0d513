"""Cycle-accurate execution of a lowered pipeline graph.

Every cycle: threads move (downstream nodes first, so space freed this cycle
can be reused), a thread arriving in a stage executes that stage's ops with
shared state as of the start of the cycle, and buffered shared writes commit
at the end of the cycle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..errors import MaxCyclesExceeded, SimDeadlock, SimWriteConflict
from ..frontend.types import ArrayT, IntT, coerce, zero_value
from ..ir.model import IrOp
from ..lowering.graph import PipelineGraph
from ..semantics import cast_value, eval_binop, eval_unop
from .runtime import (
    Collect, Dispatch, Fifo, HostPort, Join, LoopArbiter, PriorityMerge, RateLimiter, ReorderBuffer, Thread, Token,
)
from .trace import Trace, TraceEvent

# ---- stall injection ----------------------------------------------------------------------


class StallPolicy:
    def stalled(self, c: int, node: str, stage: int | None) -> bool:
        return False


class NoStall(StallPolicy):
    pass


class RandomStall(StallPolicy):
    """Each occupied position independently stalls with probability ``p``."""

    def __init__(self, seed: int, p: float = 0.1):
        self.rng = random.Random(seed)
        self.p = p
        self.cache: dict = {}

    def stalled(self, c: int, node: str, stage: int | None) -> bool:
        key = (c, node, stage)
        if key not in self.cache:
            if len(self.cache) > 4096:
                self.cache.clear()
            self.cache[key] = self.rng.random() < self.p
        return self.cache[key]


class ScriptedStall(StallPolicy):
    """Stalls given as (cycle, node) or (cycle, node, stage); a missing stage stalls the whole node."""

    def __init__(self, stalls):
        self.set = set()
        for s in stalls:
            c, node, *rest = s
            self.set.add((int(c), str(node), int(rest[0]) if rest and rest[0] is not None else None))

    def stalled(self, c: int, node: str, stage: int | None) -> bool:
        return (c, node, None) in self.set or (c, node, stage) in self.set


@dataclass
class SimConfig:
    max_cycles: int = 200_000
    stall: StallPolicy = field(default_factory=NoStall)
    record_stage_events: bool = True


# ---- pipelines ------------------------------------------------------------------------------


class PipelineRT:
    def __init__(self, sim: "Simulator", node, f, block, sched, port):
        self.sim = sim
        self.id = node.id
        self.f = f
        self.block = block
        self.port = port
        self.n = sched.n_stages
        self.slots: list[Thread | None] = [None] * self.n
        by_id = {o.id: o for o in block.ops}
        # a shared read executes in the stage its data arrives, sampling that cycle's start-of-cycle state
        self.stage_ops: list[list[IrOp]] = [[] for _ in sched.stages]
        for o in block.ops:
            a, z = sched.op_stage[o.id]
            self.stage_ops[z if o.kind == "read_shared" else a].append(o)
        self.term = block.terminator
        self.types = {o.id: o.type for o in block.ops}
        # region guards: first stage, last stage, shared credit cell
        self.guards = []
        for r in block.regions:
            if r.id in sched.region_spans:
                a, z = sched.region_spans[r.id]
                self.guards.append({"region": r, "first": a, "last": z, "credits": r.n})
        self.is_entry = block.id == f.entry
        self.rate = f.attrs.get("thread_rate")

    def resident(self) -> int:
        return sum(1 for t in self.slots if t is not None)

    def _enter_ok(self, stage: int) -> bool:
        return all(g["credits"] > 0 for g in self.guards if g["first"] == stage)

    def _enter(self, c: int, t: Thread, stage: int) -> None:
        for g in self.guards:
            if g["first"] == stage:
                g["credits"] -= 1
                self.sim.event(c, t.id, "region-enter", site=g["region"].id, val=g["region"].n)

    def _leave(self, c: int, t: Thread, stage: int) -> None:
        for g in self.guards:
            if g["last"] == stage:
                g["credits"] += 1
                self.sim.event(c, t.id, "region-exit", site=g["region"].id, val=g["region"].n)

    def step(self, c: int) -> None:
        sim = self.sim
        blocked = False
        for k in range(self.n - 1, -1, -1):
            t = self.slots[k]
            if t is None:
                continue
            if not blocked and sim.stalls.stalled(c, self.id, k):
                sim.injected = True
                blocked = True
            if not blocked:
                if k == self.n - 1:
                    if sim.route_out(c, self, t):
                        self._leave(c, t, k)
                        self.slots[k] = None
                        sim.progress = True
                        continue
                elif self.slots[k + 1] is None and self._enter_ok(k + 1):
                    self._leave(c, t, k)
                    self.slots[k], self.slots[k + 1] = None, t
                    self._enter(c, t, k + 1)
                    if sim.cfg.record_stage_events:
                        sim.event(c, t.id, "advance-stage", site=self.block.id, val=k + 1)
                    sim.execute(c, t, self, self.stage_ops[k + 1])
                    sim.progress = True
                    continue
            blocked = True
            if sim.cfg.record_stage_events:
                sim.event(c, t.id, "stall", site=self.block.id, val=k)
        if blocked or self.slots[0] is not None or self.port is None:
            return
        if not self._enter_ok(0):
            return
        item = self.port.peek(c)
        if item is None:
            return
        t = self.port.pop(c)
        self.slots[0] = t
        sim.progress = True
        t.vals, t.new_locals, t.pending_reads = {}, {}, []
        if self.is_entry:
            sim.event(c, t.id, "fn-enter", var=self.f.name, val=self.rate)
        sim.event(c, t.id, "enter-block", site=self.block.id)
        self._enter(c, t, 0)
        sim.execute(c, t, self, self.stage_ops[0])


class WaitRT:
    """Evaluates the wait condition for the head thread only; side effects commit only when it holds."""

    def __init__(self, sim: "Simulator", node, f, block, port, out: Fifo):
        self.sim = sim
        self.id = node.id
        self.f = f
        self.block = block
        self.port = port
        self.out = out
        self.ops = list(block.ops)
        self.types = {o.id: o.type for o in block.ops}
        self.term = block.terminator

    def resident(self) -> int:
        return 0

    def step(self, c: int) -> None:
        sim = self.sim
        if self.port.peek(c) is None or not self.out.can_push():
            return
        if sim.stalls.stalled(c, self.id, 0):
            sim.injected = True
            return
        t = self.port.peek(c)
        t.vals, t.new_locals, t.pending_reads = {}, {}, []
        mark = len(sim.events)
        writes_mark = len(sim.writes)
        sim.execute(c, t, self, self.ops)
        ok = bool(t.vals[self.term.operands[0]]) if self.term.operands else True
        staged = sim.events[mark:]
        del sim.events[mark:]
        sim.event(c, t.id, "wait-eval", site=self.block.id, val=ok)
        if not ok:
            del sim.writes[writes_mark:]
            return
        self.port.pop(c)
        sim.event(c, t.id, "enter-block", site=self.block.id)
        sim.events.extend(staged)
        sim.apply_locals(t)
        self.out.push(c, t)
        sim.progress = True


# ---- simulator ------------------------------------------------------------------------------


class Simulator:
    def __init__(self, graph: PipelineGraph, inputs: dict | None = None, cfg: SimConfig | None = None):
        self.g = graph
        self.ir = graph.ir
        self.cfg = cfg or SimConfig()
        self.stalls = self.cfg.stall
        self.events: list[TraceEvent] = []
        self.writes: list[tuple] = []
        self.next_tid = 0
        self.created = 0
        self.retired = 0
        self.host_done = False
        self.progress = False
        self.injected = False
        self.store = self._init_store(inputs or {})
        self._build()

    # -- state ----------------------------------------------------------------------------

    def _init_store(self, inputs: dict) -> dict:
        store = {}
        for v in self.ir.shared:
            val = inputs.get(v.name, v.init)
            if isinstance(v.type, ArrayT):
                vals = list(val) if isinstance(val, (list, tuple)) else [val] * v.type.length
                if len(vals) != v.type.length:
                    raise ValueError(f"input '{v.name}' has {len(vals)} elements, expected {v.type.length}")
                store[v.name] = [coerce(x, v.type.elem) for x in vals]
            else:
                store[v.name] = coerce(val, v.type)
        return store

    def event(self, c: int, t: int, k: str, **kw) -> TraceEvent:
        e = TraceEvent(c, t, k, **kw)
        self.events.append(e)
        return e

    def new_thread(self, c: int, fn: str, locals_: dict, call_site, parent) -> Thread:
        t = Thread(self.next_tid, fn, dict(locals_), call_site, parent)
        self.next_tid += 1
        self.created += 1
        self.event(c, t.id, "spawn", var=fn, val=parent)
        return t

    def retire(self, c: int, t: Thread) -> None:
        self.retired += 1
        self.event(c, t.id, "retire")
        if t.call_site is None:
            self.host_done = True

    # -- construction ---------------------------------------------------------------------

    def _build(self) -> None:
        g, prog = self.g, self.ir
        self.fifos: dict[str, Fifo] = {}
        self.ports: dict[str, object] = {}
        for n in g.nodes:
            if n.kind == "fifo":
                self.fifos[n.id] = Fifo(self, n.id, n.params["capacity"], n.params["role"])
                self.ports[n.id] = self.fifos[n.id]
        self.collects: dict[int, Collect] = {}
        self.dispatch: dict[int, Dispatch] = {}
        for n in g.nodes:
            if n.kind == "collect-fsm":
                s = n.params["call_site"]
                self.collects[s] = Collect(self, n.id, self.fifos[f"ret.{s}"], n.params["mode"])
        for n in g.nodes:
            if n.kind == "dispatch-fsm":
                s = n.params["call_site"]
                callee = prog.function(n.params["callee"])
                bits = callee.params[0][1].width if callee.params and isinstance(callee.params[0][1], IntT) else 32
                d = Dispatch(self, n.id, self.fifos[f"grp.{s}"], self.collects[s], callee, n.params["mode"], bits, s)
                self.dispatch[s] = d
                self.ports[n.id] = d
        self.robs: dict[int, ReorderBuffer] = {}
        self.arbs: dict[int, LoopArbiter] = {}
        for n in g.nodes:
            p = n.params
            if n.kind == "loop-arbiter":
                back, entry = p["inputs"]
                a = LoopArbiter(n.id, self.fifos[back], self.fifos[entry], p["admission"])
                self.arbs[p["loop"]] = a
                self.ports[n.id] = a
            elif n.kind == "reorder-buffer":
                r = ReorderBuffer(self, n.id, p["loop"], p["ordered"], p["capacity"])
                self.robs[p["loop"]] = r
                self.ports[n.id] = r
            elif n.kind == "join":
                self.ports[n.id] = Join(n.id, self.fifos[p["context"]], self.fifos[p["ret"]], p["dest"])
        for n in g.nodes:  # arbiters over call sites may read dispatch ports
            if n.kind == "call-arbiter":
                self.ports[n.id] = PriorityMerge([self.ports[x] for x in n.params["inputs"]])
        for n in g.nodes:  # rate limiters wrap an already built port
            if n.kind == "rate-limiter":
                src = g.producers(n.id)[0]
                self.ports[n.id] = RateLimiter(n.id, self.ports[src], n.params["ii"])
        # call-site metadata used when routing calls and returns
        self.site_kind: dict[int, str] = {}
        for _, b in prog.all_blocks():
            t = b.terminator
            if t.call_site is not None:
                self.site_kind[t.call_site] = t.kind
        self.rt: dict[str, object] = {}
        self.block_rt: dict[int, object] = {}
        host = self.new_thread(0, prog.entry, {}, None, None)
        entry_fn = prog.function(prog.entry)
        for f, b in prog.all_blocks():
            node = g.node(f"BB{b.id}")
            src = node.params.get("input")
            port = self.ports[src] if src is not None else None
            if b.id == entry_fn.entry and port is None:
                port = HostPort(host)
            if b.kind == "wait":
                out = self.fifos[g.consumers(node.id)[0]]
                rt = WaitRT(self, node, f, b, port, out)
            else:
                rt = PipelineRT(self, node, f, b, g.schedule.blocks[b.id], port)
            self.rt[node.id] = rt
            self.block_rt[b.id] = rt
        # step order: depth-first post-order from the entry visits consumers before producers
        order, seen = [], set()

        def visit(nid):
            stack = [(nid, iter(g.consumers(nid)))]
            seen.add(nid)
            while stack:
                cur, it = stack[-1]
                nxt = next((x for x in it if x not in seen), None)
                if nxt is None:
                    stack.pop()
                    order.append(cur)
                else:
                    seen.add(nxt)
                    stack.append((nxt, iter(g.consumers(nxt))))

        visit(g.entry)
        for n in g.nodes:
            if n.id not in seen:
                visit(n.id)
        self.steppers = []
        for nid in order:
            if nid in self.rt:
                self.steppers.append(self.rt[nid])
            n = g.node(nid)
            if n.kind == "collect-fsm":
                self.steppers.append(self.collects[n.params["call_site"]])

    # -- op execution -----------------------------------------------------------------------

    def execute(self, c: int, t: Thread, rt, ops: list[IrOp]) -> None:
        vals = t.vals
        for o in ops:
            k = o.kind
            if k == "const":
                v = o.value
            elif k == "read_local":
                v = t.locals[o.var] if o.var in t.locals else zero_value(rt.f.locals[o.var])
            elif k == "binop":
                a, b = o.operands
                v = eval_binop(o.op, vals[a], vals[b], o.type, rt.types[a])
            elif k == "unop":
                v = eval_unop(o.op, vals[o.operands[0]], o.type)
            elif k == "cast":
                v = cast_value(vals[o.operands[0]], o.type)
            elif k == "select":
                s, a, b = o.operands
                v = vals[a] if vals[s] else vals[b]
            elif k == "read_shared":
                cur = self.store[o.var]
                idx = None
                if o.operands:
                    idx = int(vals[o.operands[0]]) % len(cur)
                    v = cur[idx]
                else:
                    v = cur
                p = None if o.pred is None else vals.get(o.pred)
                e = self.event(c, t.id, "shared-read", site=o.site, var=o.var, idx=idx, val=v,
                               p=True if o.pred is None else p)
                if o.pred is not None and o.pred not in vals:
                    t.pending_reads.append((e, o.pred))
            elif k == "write_shared":
                cur = self.store[o.var]
                idx = None
                if len(o.operands) == 2:
                    idx = int(vals[o.operands[0]]) % len(cur)
                v = vals[o.operands[-1]]
                p = True if o.pred is None else bool(vals[o.pred])
                self.event(c, t.id, "shared-write", site=o.site, var=o.var, idx=idx, val=v, p=p)
                if p:
                    self.writes.append((o.var, idx, v, t.id))
                v = None
            elif k == "write_local":
                t.new_locals[o.var] = vals[o.operands[0]]
                v = None
            elif k == "return":
                v = vals[o.operands[0]] if o.operands else None
                t.ret = v
            else:  # other terminators are resolved when the thread leaves the block
                v = None
            vals[o.id] = v
        if t.pending_reads:
            left = []
            for e, pid in t.pending_reads:
                if pid in vals:
                    e.p = bool(vals[pid])
                else:
                    left.append((e, pid))
            t.pending_reads = left

    def apply_locals(self, t: Thread) -> None:
        t.locals.update(t.new_locals)
        t.new_locals = {}

    # -- leaving a block ----------------------------------------------------------------------

    def route_out(self, c: int, rt: PipelineRT, t: Thread) -> bool:
        term = rt.term
        kind = term.kind
        f, b = rt.f, rt.block
        ops = [t.vals[i] for i in term.operands]
        g = self.g
        if kind == "jump":
            q = self.fifos[g.consumers(rt.id)[0]]
            if not q.can_push():
                return False
            self.apply_locals(t)
            q.push(c, t)
        elif kind == "loop_enter":
            lid = term.attrs["loop"]
            arb, rob = self.arbs[lid], self.robs[lid]
            go = bool(ops[0]) if ops else True
            entry = arb.inputs[1]
            if go and not (entry.can_push() and arb.inside < arb.admission and rob.can_assign()):
                return False
            if not go and not (rob.can_assign() and rob.can_push()):
                return False
            self.apply_locals(t)
            rob.assign(t)
            self.event(c, t.id, "loop-enter", site=lid, var="ordered" if rob.ordered else "unordered")
            if go:
                arb.inside += 1
                entry.push(c, t)
            else:
                rob.push(c, t)
        elif kind == "loop_back":
            lid = term.attrs["loop"]
            arb, rob = self.arbs[lid], self.robs[lid]
            again = bool(ops[0]) if ops else False
            back = arb.inputs[0]
            if again and not back.can_push() or not again and not rob.can_push():
                return False
            self.apply_locals(t)
            if again:
                back.push(c, t)
            else:
                arb.inside -= 1
                rob.push(c, t)
        elif kind in ("call", "async_call"):
            s = term.call_site
            callee = self.ir.function(term.fn)
            arg = self.fifos[f"arg.{s}"]
            nxt = self.fifos[f"ctx.{s}"] if kind == "call" else self.fifos[f"e.{b.id}.{dict(b.succs)['fall-through']}"]
            if not (arg.can_push() and nxt.can_push()):
                return False
            self.apply_locals(t)
            child = self.new_thread(c, callee.name, {n: v for (n, _), v in zip(callee.params, ops)}, s, t.id)
            arg.push(c, child)
            nxt.push(c, t)
        elif kind in ("batched_call", "pipelined_do"):
            s = term.call_site
            grp, ctx = self.fifos[f"grp.{s}"], self.fifos[f"ctx.{s}"]
            if not (grp.can_push() and ctx.can_push()):
                return False
            self.apply_locals(t)
            if kind == "batched_call":
                tok = Token("group", t.id, parent=t.id, count=int(ops[0]), args=ops[1:], call_site=s)
            else:
                tok = Token("group", t.id, parent=t.id, args=ops, call_site=s)
            grp.push(c, tok)
            ctx.push(c, t)
        elif kind == "return":
            return self._return(c, t)
        else:
            raise AssertionError(kind)
        return True

    def _return(self, c: int, t: Thread) -> bool:
        s = t.call_site
        if s is None:
            self.retire(c, t)
            return True
        kind = self.site_kind[s]
        if kind == "call":
            ret = self.fifos[f"ret.{s}"]
            if not ret.can_push():
                return False
            ret.push(c, Token("return", t.id, parent=t.parent, value=t.ret, call_site=s))
        elif kind in ("batched_call", "pipelined_do"):
            self.collects[s].child_return(t.group, t.ret)
        self.retire(c, t)
        return True

    # -- main loop ----------------------------------------------------------------------------

    def resident(self) -> int:
        return self.created - self.retired

    def run(self) -> Trace:
        idle = 0
        window = 2 + max([n.params["ii"] for n in self.g.by_kind("rate-limiter")] + [1])
        for c in range(self.cfg.max_cycles):
            self.progress = False
            self.injected = False
            for s in self.steppers:
                s.step(c)
            self._commit(c)
            if self.host_done and self.resident() == 0:
                return self._finish(c)
            if self.progress or self.injected:
                idle = 0
            else:
                idle += 1
                if idle > window:
                    raise SimDeadlock(c, self._blocked())
        raise MaxCyclesExceeded(self.cfg.max_cycles)

    def _commit(self, c: int) -> None:
        if not self.writes:
            return
        owner: dict = {}
        for var, idx, v, tid in self.writes:
            key = (var, idx)
            if key in owner and owner[key] != tid:
                raise SimWriteConflict(c, var, idx)
            owner[key] = tid
            if idx is None:
                self.store[var] = v
            else:
                self.store[var][idx] = v
        self.writes = []

    def _blocked(self) -> list[str]:
        out = [rt.id for rt in self.rt.values() if isinstance(rt, PipelineRT) and rt.resident()]
        out += [q.id for q in self.fifos.values() if len(q)]
        return sorted(out)

    def _finish(self, c: int) -> Trace:
        final = {k: (list(v) if isinstance(v, list) else v) for k, v in self.store.items()}
        return Trace(self.events, final, c, self.created, self.retired)


def simulate(graph: PipelineGraph, inputs: dict | None = None, cfg: SimConfig | None = None) -> Trace:
    return Simulator(graph, inputs, cfg).run()
