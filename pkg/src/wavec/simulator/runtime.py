"""Runtime objects behind graph nodes: threads, FIFOs and flow-control ports.

A *port* is anything a pipeline can pull a thread from: ``peek(c)`` returns
the item that could be taken in cycle ``c`` (or None) and ``pop(c)`` takes it.
Items pushed into a FIFO in cycle ``c`` become visible in cycle ``c + 1``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass
class Thread:
    id: int
    fn: str
    locals: dict = field(default_factory=dict)
    call_site: int | None = None  # call site that created the thread (None for the host)
    parent: int | None = None
    group: int | None = None
    index: int | None = None
    loop_seq: dict = field(default_factory=dict)  # loop id -> sequence number in an ordered loop
    vals: dict = field(default_factory=dict)  # op results in the current block
    new_locals: dict = field(default_factory=dict)  # write_local results applied when leaving the block
    writes: list = field(default_factory=list)
    pending_reads: list = field(default_factory=list)  # (event, predicate op id) awaiting the predicate value
    ret: object = None


@dataclass
class Token:
    """Non-thread payload: a batched-call group or a return value."""

    kind: str  # group | return | done
    thread: int  # parent (groups, completions) or returning child
    parent: int | None = None
    value: object = None
    count: int = 0
    args: list = field(default_factory=list)
    call_site: int | None = None


class Fifo:
    def __init__(self, sim, nid: str, capacity: int, role: str):
        self.sim = sim
        self.id = nid
        self.capacity = capacity
        self.role = role
        self.q: deque = deque()

    def __len__(self) -> int:
        return len(self.q)

    def can_push(self, n: int = 1) -> bool:
        return len(self.q) + n <= self.capacity

    def push(self, c: int, item) -> None:
        assert self.can_push(), self.id
        self.q.append((c, item))
        self.sim.event(c, _tid(item), "fifo-enqueue", var=self.id)

    def peek(self, c: int):
        if self.q and self.q[0][0] < c:
            return self.q[0][1]
        return None

    def pop(self, c: int):
        ts, item = self.q.popleft()
        assert ts < c
        self.sim.event(c, _tid(item), "fifo-dequeue", var=self.id)
        return item

    def items(self):
        return [x for _, x in self.q]


def _tid(item) -> int:
    return item.id if isinstance(item, Thread) else item.thread


class PriorityMerge:
    """Fixed-priority selection over several ports (first ready input wins)."""

    def __init__(self, inputs: list):
        self.inputs = inputs
        self._sel = None

    def peek(self, c: int):
        for p in self.inputs:
            x = p.peek(c)
            if x is not None:
                self._sel = p
                return x
        self._sel = None
        return None

    def pop(self, c: int):
        if self.peek(c) is None:
            raise RuntimeError("pop from empty merge")
        return self._sel.pop(c)


class LoopArbiter(PriorityMerge):
    """Loopback FIFO first, then the entry FIFO."""

    def __init__(self, nid: str, back: Fifo, entry: Fifo, admission: int):
        super().__init__([back, entry])
        self.id = nid
        self.admission = admission
        self.inside = 0  # threads admitted into the loop body and not yet exited


class ReorderBuffer:
    """Loop exit. Ordered loops release in sequence-number order, unordered ones in arrival order."""

    def __init__(self, sim, nid: str, loop: int, ordered: bool, capacity: int):
        self.sim = sim
        self.id = nid
        self.loop = loop
        self.ordered = ordered
        self.capacity = capacity
        self.next_seq = 0  # next sequence number handed out at loop entry
        self.release = 0  # next sequence number allowed to leave
        self.held: dict[int, tuple[int, Thread]] = {}
        self.q: deque = deque()

    def outstanding(self) -> int:
        return self.next_seq - self.release if self.ordered else len(self.q)

    def can_assign(self) -> bool:
        return not self.ordered or self.outstanding() < self.capacity

    def assign(self, t: Thread) -> None:
        if self.ordered:
            t.loop_seq[self.loop] = self.next_seq
            self.next_seq += 1

    def can_push(self) -> bool:
        return self.ordered or len(self.q) < self.capacity

    def push(self, c: int, t: Thread) -> None:
        if self.ordered:
            self.held[t.loop_seq[self.loop]] = (c, t)
        else:
            self.q.append((c, t))
        self.sim.event(c, t.id, "fifo-enqueue", var=self.id)

    def peek(self, c: int):
        if self.ordered:
            x = self.held.get(self.release)
            return x[1] if x is not None and x[0] < c else None
        return self.q[0][1] if self.q and self.q[0][0] < c else None

    def pop(self, c: int):
        if self.ordered:
            _, t = self.held.pop(self.release)
            self.release += 1
            t.loop_seq.pop(self.loop, None)
        else:
            _, t = self.q.popleft()
        self.sim.event(c, t.id, "fifo-dequeue", var=self.id)
        self.sim.event(c, t.id, "loop-exit", site=self.loop, var="ordered" if self.ordered else "unordered")
        return t


class Join:
    """Pairs the head of a call-site context FIFO with the matching return."""

    def __init__(self, nid: str, ctx: Fifo, ret: Fifo, dest: str | None):
        self.id = nid
        self.ctx = ctx
        self.ret = ret
        self.dest = dest

    def _match(self, c: int):
        head = self.ctx.peek(c)
        if head is None:
            return None, None
        for pos, (ts, tok) in enumerate(self.ret.q):
            if ts < c and tok.parent == head.id:
                return head, pos
        return None, None

    def peek(self, c: int):
        return self._match(c)[0]

    def pop(self, c: int):
        head, pos = self._match(c)
        t = self.ctx.pop(c)
        _, tok = self.ret.q[pos]
        del self.ret.q[pos]
        self.ret.sim.event(c, tok.thread, "fifo-dequeue", var=self.ret.id)
        if self.dest is not None:
            t.locals[self.dest] = tok.value
        return t


class RateLimiter:
    def __init__(self, nid: str, port, ii: int):
        self.id = nid
        self.port = port
        self.ii = ii
        self.last: int | None = None

    def peek(self, c: int):
        if self.last is not None and c - self.last < self.ii:
            return None
        return self.port.peek(c)

    def pop(self, c: int):
        self.last = c
        return self.port.pop(c)


class HostPort:
    def __init__(self, t: Thread):
        self.t = t

    def peek(self, c: int):
        return self.t

    def pop(self, c: int):
        t, self.t = self.t, None
        return t


class Collect:
    """Counts child returns per thread group and releases completed groups in order."""

    def __init__(self, sim, nid: str, ret: Fifo, mode: str):
        self.sim = sim
        self.id = nid
        self.ret = ret
        self.mode = mode
        self.groups: deque = deque()
        self.by_id: dict[int, dict] = {}

    def register(self, gid: int, parent: int, count: int) -> dict:
        g = {"gid": gid, "parent": parent, "count": count, "issued": 0, "done": 0, "all_issued": False,
             "flag": True}
        if self.mode == "batched_call" and count <= 0:
            g["all_issued"] = True
        self.groups.append(g)
        self.by_id[gid] = g
        return g

    def child_return(self, gid: int, value) -> None:
        g = self.by_id[gid]
        g["done"] += 1
        if self.mode == "pipelined_do" and not bool(value):
            g["flag"] = False
            g["all_issued"] = True

    def step(self, c: int) -> bool:
        moved = False
        while self.groups:
            g = self.groups[0]
            if not (g["all_issued"] and g["done"] == g["issued"]) or not self.ret.can_push():
                break
            self.groups.popleft()
            del self.by_id[g["gid"]]
            self.ret.push(c, Token("done", g["parent"], parent=g["parent"]))
            moved = True
        return moved


class Dispatch:
    """Expands a group token into child threads, at most one per cycle."""

    def __init__(self, sim, nid: str, grp: Fifo, collect: Collect, callee, mode: str, index_bits: int,
                 call_site: int):
        self.sim = sim
        self.id = nid
        self.grp = grp
        self.collect = collect
        self.callee = callee
        self.mode = mode
        self.index_bits = index_bits
        self.call_site = call_site
        self.active: dict | None = None
        self.token: Token | None = None
        self.next_gid = 0

    def _activate(self, c: int) -> None:
        while self.active is None:
            tok = self.grp.peek(c)
            if tok is None:
                return
            self.grp.pop(c)
            count = tok.count if self.mode == "batched_call" else 0
            g = self.collect.register(self.next_gid, tok.thread, count)
            self.next_gid += 1
            self.sim.progress = True
            if not g["all_issued"]:
                self.active, self.token = g, tok

    def peek(self, c: int):
        if self.sim.stalls.stalled(c, self.id, None):
            self.sim.injected = True
            return None
        self._activate(c)
        g = self.active
        if g is None:
            return None
        if g["all_issued"]:  # a pipelined_do group whose flag was cleared
            self.active = None
            return self.peek(c)
        return self.token

    def pop(self, c: int):
        g, tok = self.active, self.token
        idx = g["issued"] % (1 << self.index_bits)
        params = self.callee.params
        locals_ = {params[0][0]: idx}
        for (name, _), v in zip(params[1:], tok.args):
            locals_[name] = v
        t = self.sim.new_thread(c, self.callee.name, locals_, self.call_site, tok.thread)
        t.group, t.index = g["gid"], idx
        g["issued"] += 1
        if self.mode == "batched_call" and g["issued"] >= g["count"]:
            g["all_issued"] = True
            self.active = None
        return t
