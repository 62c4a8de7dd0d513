"""Bounded enumeration of the final states of all valid executions.

The abstract machine interleaves threads one shared event at a time. A step
is enabled only if it respects:

* per-thread program order (each thread is a sequential generator);
* per-site thread order: among sibling threads of one call, the k-th visit
  of a site by thread t waits until every older, still running sibling has
  made k+1 visits (a disabled branch still counts as a visit);
* region occupancy, with region entry and wait_for evaluation ordered like
  sites;
* wait_for conditions.

Thread state is replayed from the responses it has received, so a search
state is fully described by the shared store plus each thread's response
history. Reachable final-state sets are memoized per search state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BoundsExceeded
from ..frontend.elaborated import ElaboratedProgram
from .serial import ThreadExec, apply_write, init_store


@dataclass(frozen=True)
class Bounds:
    max_threads: int = 4
    max_cycles: int = 64

    def __post_init__(self):
        if not (1 <= self.max_threads <= 4 and 1 <= self.max_cycles <= 64):
            raise ValueError("enumeration bounds are limited to 4 threads and 64 steps")


@dataclass
class _Thread:
    fn: str
    args: tuple
    group: int | None  # spawn group; siblings share it
    rank: int  # position within the group
    parent: int | None
    history: tuple = ()
    done: bool = False
    ret: object = None
    waiting: int = 0  # children still running (batched) for a blocked parent


def freeze(v):
    if isinstance(v, (list, tuple)):
        return tuple(freeze(x) for x in v)
    if isinstance(v, dict):
        return tuple(sorted((k, freeze(x)) for k, x in v.items()))
    if isinstance(v, np.floating):
        return ("f", float(v))
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def state_key(store: dict, vars: list[str] | None = None) -> tuple:
    """Hashable form of a final shared state, optionally restricted to ``vars``."""
    names = sorted(store) if vars is None else sorted(vars)
    return tuple((n, freeze(store[n])) for n in names)


class _Search:
    def __init__(self, prog: ElaboratedProgram, inputs: dict, bounds: Bounds, vars):
        self.prog = prog
        self.ex = ThreadExec(prog)
        self.bounds = bounds
        self.vars = vars
        self.store0 = init_store(prog, inputs)
        self.memo: dict = {}

    # a thread's pending request is recomputed by replaying its history
    def pending(self, t: _Thread):
        g = self.ex.run_function(t.fn, list(t.args))
        try:
            req = next(g)
            for resp in t.history:
                req = g.send(resp)
        except StopIteration as stop:
            return None, stop.value
        return req, None

    def run(self) -> set:
        root = _Thread(self.prog.entry, (), None, 0, None)
        return self.explore((root,), self.store0, {}, {}, 0)

    def explore(self, threads: tuple, store: dict, visits: dict, inside: dict, depth: int) -> set:
        key = (tuple((t.fn, freeze(t.args), t.group, t.rank, freeze(t.history), t.done) for t in threads),
               state_key(store), tuple(sorted(visits.items(), key=repr)), tuple(sorted(inside.items())))
        if key in self.memo:
            return self.memo[key]
        if all(t.done for t in threads):
            res = {state_key(store, self.vars)}
            self.memo[key] = res
            return res
        if depth > self.bounds.max_cycles:
            raise BoundsExceeded(f"execution longer than {self.bounds.max_cycles} steps")
        res: set = set()
        for i, t in enumerate(threads):
            if t.done or t.waiting:
                continue
            req, ret = self.pending(t)
            if req is None:
                res |= self.finish(threads, i, ret, store, visits, inside, depth)
                continue
            nxt = self.step(threads, i, req, store, visits, inside)
            if nxt is not None:
                res |= self.explore(*nxt, depth + 1)
        self.memo[key] = res
        return res

    # ---- ordering helpers ----

    def blocked(self, threads, i: int, sites, visits) -> bool:
        t = threads[i]
        if t.group is None:
            return False
        for j, u in enumerate(threads):
            if u.group != t.group or u.rank >= t.rank or u.done:
                continue
            for s in sites:
                if visits.get((j, s), 0) <= visits.get((i, s), 0):
                    return True
        return False

    @staticmethod
    def bump(visits: dict, i: int, sites) -> dict:
        v = dict(visits)
        for s in sites:
            v[(i, s)] = v.get((i, s), 0) + 1
        return v

    @staticmethod
    def replace(threads, i, **kw) -> tuple:
        t = threads[i]
        new = _Thread(**{**t.__dict__, **kw})
        return threads[:i] + (new,) + threads[i + 1:]

    # ---- one step of thread i ----

    def step(self, threads, i, req, store, visits, inside):
        t = threads[i]
        kind = req[0]
        if kind == "read":
            _, var, idx, site = req
            if self.blocked(threads, i, [site], visits):
                return None
            val = store[var] if idx is None else store[var][idx]
            return (self.replace(threads, i, history=t.history + (val,)), store, self.bump(visits, i, [site]),
                    inside)
        if kind == "write":
            _, var, idx, val, site = req
            if self.blocked(threads, i, [site], visits):
                return None
            st = {k: (list(v) if isinstance(v, list) else v) for k, v in store.items()}
            apply_write(st, var, idx, val)
            return self.replace(threads, i, history=t.history + (None,)), st, self.bump(visits, i, [site]), inside
        if kind == "pass":
            sites = req[1]
            if self.blocked(threads, i, sites, visits):
                return None
            return self.replace(threads, i, history=t.history + (None,)), store, self.bump(visits, i, sites), inside
        if kind == "region":
            _, rid, n, edge = req
            ins = dict(inside)
            if edge == "enter":
                s = ("region", rid)
                if ins.get(rid, 0) >= n or self.blocked(threads, i, [s], visits):
                    return None
                ins[rid] = ins.get(rid, 0) + 1
                visits = self.bump(visits, i, [s])
            else:
                ins[rid] -= 1
            return self.replace(threads, i, history=t.history + (None,)), store, visits, ins
        if kind == "wait":
            s = ("wait", req[1])
            if self.blocked(threads, i, [s], visits):
                return None
            ok, writes, env = req[2](store)
            if not ok:
                return None
            st = {k: (list(v) if isinstance(v, list) else v) for k, v in store.items()}
            for w in writes:
                apply_write(st, *w)
            return self.replace(threads, i, history=t.history + (env,)), st, self.bump(visits, i, [s]), inside
        if kind == "batched":
            _, fn, count, args = req
            if count == 0:
                return self.replace(threads, i, history=t.history + (None,)), store, visits, inside
            live = sum(1 for u in threads if not u.done)
            if live + count > self.bounds.max_threads:
                raise BoundsExceeded(f"{live + count} threads exceed the bound of {self.bounds.max_threads}")
            gid = len(threads)  # unique: thread slots are never reused
            kids = tuple(_Thread(fn, (k, *args), gid, k, i) for k in range(count))
            return self.replace(threads, i, waiting=count) + kids, store, visits, inside
        if kind == "pdo":
            raise BoundsExceeded("pipelined_do issues an unbounded number of speculative threads")
        raise ValueError(kind)

    def finish(self, threads, i, ret, store, visits, inside, depth) -> set:
        t = threads[i]
        threads = self.replace(threads, i, done=True, ret=ret)
        if t.parent is not None:
            p = threads[t.parent]
            left = p.waiting - 1
            hist = p.history + ((None,) if left == 0 else ())
            threads = self.replace(threads, t.parent, waiting=left, history=hist)
        return self.explore(threads, store, visits, inside, depth)


def enumerate_executions(prog: ElaboratedProgram, inputs: dict | None = None, bounds: Bounds | dict | None = None,
                         vars: list[str] | None = None) -> set:
    """Set of final shared states (see ``state_key``) over all valid executions."""
    if isinstance(bounds, dict):
        bounds = Bounds(**bounds)
    bounds = bounds or Bounds()
    if bounds.max_threads > 4 or bounds.max_cycles > 64:
        raise BoundsExceeded("enumeration is limited to 4 threads and 64 steps")
    return _Search(prog, inputs or {}, bounds, vars).run()
