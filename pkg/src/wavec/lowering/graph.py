"""Lowering of scheduled IR into a graph of pipelines, FIFOs and controllers.

Each block becomes one node (a stage pipeline, or a wait evaluator for
``wait`` blocks). Every block input is a single *port* node: a FIFO, a loop
arbiter, a join of a call context with its return, a reorder buffer at a loop
exit, or an arbiter over the call sites of a function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend.types import SemType
from ..ir.model import BasicBlock, IrFunction, IrProgram
from ..scheduler import ProgramSchedule

NODE_KINDS = {
    "stage-pipeline", "fifo", "dispatch-fsm", "collect-fsm", "loop-arbiter", "wait-evaluator", "region-guard",
    "rate-limiter", "return-dispatch", "call-arbiter", "join", "reorder-buffer",
}
FIFO_ROLES = {"argument", "context", "return", "loop-entry", "loop-exit", "wait-context", "edge"}


@dataclass
class Node:
    id: str
    kind: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"id": self.id, "kind": self.kind, "params": self.params}


@dataclass
class FifoConfig:
    capacity: int = 2
    role_capacity: dict[str, int] = field(default_factory=dict)

    def cap(self, role: str) -> int:
        return max(1, self.role_capacity.get(role, self.capacity))


@dataclass
class PipelineGraph:
    nodes: list[Node]
    edges: list[tuple[str, str]]
    entry: str
    shared_stores: list[dict]
    ir: IrProgram | None = None
    schedule: ProgramSchedule | None = None

    def node(self, nid: str) -> Node:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise KeyError(nid)

    def by_kind(self, kind: str) -> list[Node]:
        return [n for n in self.nodes if n.kind == kind]

    def producers(self, nid: str) -> list[str]:
        return [a for a, b in self.edges if b == nid]

    def consumers(self, nid: str) -> list[str]:
        return [b for a, b in self.edges if a == nid]

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "entry": self.entry,
            "nodes": [n.to_json() for n in self.nodes],
            "edges": [list(e) for e in self.edges],
            "shared_stores": self.shared_stores,
        }

    def to_dot(self) -> str:
        shape = {"fifo": "box3d", "stage-pipeline": "box", "wait-evaluator": "diamond", "join": "invtriangle"}
        lines = ["digraph wavec {", "  rankdir=TB;"]
        for n in self.nodes:
            label = n.id if n.kind != "stage-pipeline" else f"{n.id}\\n{n.params['stages']} stages"
            lines.append(f'  "{n.id}" [label="{label}", shape={shape.get(n.kind, "ellipse")}];')
        for a, b in self.edges:
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _width(types: list[SemType]) -> int:
    return sum(t.bits() for t in types)


def _site_bits(n: int) -> int:
    return max(0, (n - 1).bit_length())


class _Lowerer:
    def __init__(self, prog: IrProgram, sched: ProgramSchedule, fifo: FifoConfig):
        self.prog = prog
        self.sched = sched
        self.fifo = fifo
        self.nodes: list[Node] = []
        self.edges: list[tuple[str, str]] = []
        self.ids: set[str] = set()
        self.sites: dict[str, list[tuple[IrFunction, BasicBlock]]] = {}
        for f, b in prog.all_blocks():
            t = b.terminator
            if t.fn is not None:
                self.sites.setdefault(t.fn, []).append((f, b))

    def add(self, nid: str, kind: str, **params) -> str:
        assert kind in NODE_KINDS and nid not in self.ids, nid
        self.ids.add(nid)
        self.nodes.append(Node(nid, kind, params))
        return nid

    def fifo_node(self, nid: str, role: str, width: int, capacity: int | None = None, **extra) -> str:
        assert role in FIFO_ROLES
        cap = capacity if capacity is not None else self.fifo.cap(role)
        return self.add(nid, "fifo", role=role, capacity=cap, width=width, **extra)

    def wire(self, a: str, b: str) -> None:
        self.edges.append((a, b))

    def live_width(self, f: IrFunction, names) -> int:
        return _width([f.locals[n] for n in sorted(names)])

    # ---- per function --------------------------------------------------------------

    def function(self, f: IrFunction) -> None:
        sites = self.sites.get(f.name, [])
        cs_bits = _site_bits(len(sites))
        entry = f.block(f.entry)
        sources = []
        for cf, cb in sites:
            t = cb.terminator
            s = t.call_site
            if t.kind in ("batched_call", "pipelined_do"):
                g = self.fifo_node(f"grp.{s}", "argument", _width([cb.op(i).type for i in t.operands]), call_site=s)
                d = self.add(f"dispatch.{s}", "dispatch-fsm", call_site=s, callee=f.name, mode=t.kind,
                             index_type=str(f.params[0][1]) if f.params else "uint32")
                self.wire(g, d)
                sources.append(d)
            else:
                width = _width([cb.op(i).type for i in t.operands]) + cs_bits
                sources.append(self.fifo_node(f"arg.{s}", "argument", width, call_site=s))
        if len(sources) > 1:
            port = self.add(f"entry.{f.name}", "call-arbiter", inputs=list(sources))
            for s in sources:
                self.wire(s, port)
        elif sources:
            port = sources[0]
        else:
            port = None
        rate = f.attrs.get("thread_rate")
        if rate and port is not None:
            r = self.add(f"rate.{f.name}", "rate-limiter", ii=int(rate), function=f.name)
            self.wire(port, r)
            port = r
        self.entry_port[f.name] = port
        self.retd[f.name] = self.add(f"retd.{f.name}", "return-dispatch", function=f.name,
                                     table=[cb.terminator.call_site for _, cb in sites])

    def block_nodes(self, f: IrFunction, b: BasicBlock) -> None:
        sc = self.sched.blocks[b.id]
        if b.kind == "wait":
            self.add(f"BB{b.id}", "wait-evaluator", block=b.id, function=f.name, stages=1)
        else:
            self.add(f"BB{b.id}", "stage-pipeline", block=b.id, function=f.name, stages=sc.n_stages,
                     schedule=[list(s) for s in sc.stages])
        for r in b.regions:
            if r.id in sc.region_spans:
                a, z = sc.region_spans[r.id]
                g = self.add(f"guard.{r.id}", "region-guard", region=r.id, n=r.n, span=z - a + 1, first_stage=a,
                             last_stage=z, block=b.id)
                self.wire(g, f"BB{b.id}")

    def block_edges(self, f: IrFunction, b: BasicBlock) -> None:
        me = f"BB{b.id}"
        t = b.terminator
        succ = {k: s for k, s in b.succs}
        if t.kind == "jump":
            nxt = f.block(succ["fall-through"])
            role = "wait-context" if nxt.kind == "wait" else "edge"
            q = self.fifo_node(f"e.{b.id}.{nxt.id}", role, self.live_width(f, b.live_out))
            self.wire(me, q)
            self.input[nxt.id] = q
        elif t.kind == "wait":
            nxt = succ["fall-through"]
            q = self.fifo_node(f"e.{b.id}.{nxt}", "edge", self.live_width(f, b.live_out))
            self.wire(me, q)
            self.input[nxt] = q
        elif t.kind == "loop_enter":
            lp = f.loop(t.attrs["loop"])
            body = sum(self.sched.blocks[x].n_stages for x in lp.body_blocks)
            cap = max(body, 1)
            head = f.block(lp.head)
            q = self.fifo_node(f"loopin.{lp.id}", "loop-entry", self.live_width(f, head.live_in))
            back = self.fifo_node(f"loopback.{lp.id}", "loop-entry", self.live_width(f, head.live_in), capacity=cap)
            arb = self.add(f"arb.{lp.id}", "loop-arbiter", loop=lp.id, inputs=[back, q], admission=cap)
            ex = f.block(lp.exit)
            rob = self.add(f"exit.{lp.id}", "reorder-buffer", loop=lp.id, ordered=lp.ordered, capacity=cap,
                           width=self.live_width(f, ex.live_in))
            self.wire(me, q)
            self.wire(me, rob)
            self.wire(back, arb)
            self.wire(q, arb)
            self.input[lp.head] = arb
            self.input[lp.exit] = rob
            self.loops[lp.id] = (arb, back, rob)
        elif t.kind == "loop_back":
            arb, back, rob = self.loops[t.attrs["loop"]]
            self.wire(me, back)
            self.wire(me, rob)
        elif t.kind in ("call", "batched_call", "pipelined_do"):
            s = t.call_site
            cont = f.block(succ["fall-through"])
            callee = self.prog.function(t.fn)
            ctx = self.fifo_node(f"ctx.{s}", "context", self.live_width(f, cont.live_in - {t.attrs.get("dest")}),
                                 call_site=s)
            if t.kind == "call":
                ret = self.fifo_node(f"ret.{s}", "return", callee.ret.bits(), capacity=self.fifo.cap("context"),
                                     call_site=s)
                self.wire(self.retd[callee.name], ret)
                self.wire(me, f"arg.{s}")
            else:
                col = self.add(f"collect.{s}", "collect-fsm", call_site=s, mode=t.kind)
                ret = self.fifo_node(f"ret.{s}", "return", 0, capacity=self.fifo.cap("context"), call_site=s)
                self.wire(f"dispatch.{s}", col)
                self.wire(self.retd[callee.name], col)
                self.wire(col, ret)
                self.wire(me, f"grp.{s}")
            j = self.add(f"join.{s}", "join", call_site=s, context=ctx, ret=ret, dest=t.attrs.get("dest"))
            self.wire(me, ctx)
            self.wire(ctx, j)
            self.wire(ret, j)
            self.input[cont.id] = j
        elif t.kind == "async_call":
            cont = succ["fall-through"]
            q = self.fifo_node(f"e.{b.id}.{cont}", "edge", self.live_width(f, b.live_out))
            self.wire(me, f"arg.{t.call_site}")
            self.wire(me, q)
            self.input[cont] = q
        elif t.kind == "return":
            self.wire(me, self.retd[f.name])

    def run(self) -> PipelineGraph:
        self.entry_port: dict[str, str | None] = {}
        self.retd: dict[str, str] = {}
        self.input: dict[int, str] = {}
        self.loops: dict[int, tuple[str, str, str]] = {}
        for f in self.prog.functions:
            self.function(f)
        for f, b in self.prog.all_blocks():
            self.block_nodes(f, b)
        for f, b in self.prog.all_blocks():
            self.block_edges(f, b)
        for f in self.prog.functions:
            port = self.entry_port[f.name]
            if port is not None:
                self.input[f.entry] = port
        for f, b in self.prog.all_blocks():
            if b.id in self.input:
                self.wire(self.input[b.id], f"BB{b.id}")
            self.node(f"BB{b.id}").params["input"] = self.input.get(b.id)
        stores = [{"var": v.name, "storage": v.storage, "bits": v.type.bits()} for v in self.prog.shared]
        entry_block = self.prog.function(self.prog.entry).entry
        return PipelineGraph(self.nodes, self.edges, f"BB{entry_block}", stores, self.prog, self.sched)

    def node(self, nid: str) -> Node:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise KeyError(nid)


def lower_program(prog: IrProgram, sched: ProgramSchedule, fifo: FifoConfig | None = None) -> PipelineGraph:
    """Lower every function of a scheduled program into one connected graph."""
    return _Lowerer(prog, sched, fifo or FifoConfig()).run()
