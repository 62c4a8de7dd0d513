"""Shared test utilities."""

from __future__ import annotations

import math

import numpy as np

from wavec import corpus
from wavec.frontend.elaborated import EBin, ELocal, SLet, SSet, SWrite, walk_stmts
from wavec.frontend.types import f32_bits


def ulp_distance(a, b) -> int:
    """Distance in units of last place between two float32 values."""
    def key(x):
        bits = f32_bits(x)
        return bits if bits < 0x80000000 else 0x80000000 - bits
    return abs(key(np.float32(a)) - key(np.float32(b)))


def ceil_log2(n: int) -> int:
    return 0 if n <= 1 else math.ceil(math.log2(n))


def reduce_program(n: int) -> str:
    return corpus.read_file("map_reduce") + f"""
uint32[{n}] data;
uint32 result;
void main() {{ result = reduce([](uint32 a, uint32 b) {{ return a + b; }}, data); }}
"""


def adds_and_depth(prog) -> tuple[int, int]:
    """Number of '+' applications and the longest chain of them feeding ``result``."""
    f = prog.function(prog.entry)
    depth: dict[str, int] = {}
    adds = 0

    def d(e) -> int:
        nonlocal adds
        if isinstance(e, EBin):
            a, b = d(e.lhs), d(e.rhs)
            if e.op == "+":
                adds += 1
                return 1 + max(a, b)
            return max(a, b)
        if isinstance(e, ELocal):
            return depth.get(e.name, 0)
        return 0

    out = 0
    for s in walk_stmts(f.body):
        if isinstance(s, SLet):
            depth[s.name] = d(s.init)
        elif isinstance(s, SSet):
            depth[s.name] = d(s.value)
        elif isinstance(s, SWrite) and s.var == "result":
            out = d(s.value)
    return adds, out


def replay(trace, init: dict) -> dict:
    """Final shared state of a hand trace, checking every read against start-of-cycle values."""
    store = dict(init)
    pending, cur = [], 0
    for e in sorted(trace.accesses(), key=lambda e: e.c):
        if e.c != cur:
            store.update(pending)
            pending, cur = [], e.c
        if e.k == "shared-read":
            assert store[e.var] == e.val, e
        else:
            pending.append((e.var, e.val))
    store.update(pending)
    return store
