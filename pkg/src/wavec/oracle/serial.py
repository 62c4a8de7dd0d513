"""Reference interpreter over the elaborated program.

A thread is a generator that yields one request per shared-memory event and
receives the response. Drivers decide when requests are granted: the
serialized driver grants everything immediately and runs each child thread
to completion before its successor starts.

Requests:
    ("read", var, idx, site)            -> value
    ("write", var, idx, value, site)    -> None
    ("pass", sites)                     -> None   disabled branch, sites keep their slot
    ("region", key, n, "enter"|"exit")  -> None
    ("wait", key, try_fn)               -> new locals (try_fn(store) -> (ok, writes, locals))
    ("batched", fn, count, args)        -> None   once all children are done
    ("pdo", fn, args)                   -> None
"""

from __future__ import annotations

from ..errors import SimError
from ..frontend.elaborated import (
    EBin, ECast, EConst, EExpr, ELocal, ElaboratedProgram, ERead, ESelect, EUn, SAsync, SBatched, SCall, SIf, SLet,
    SLoop, SPipelinedDo, SRegion, SReturn, SSet, SStmt, SWait, SWrite, walk_expr, walk_stmts, stmt_exprs,
)
from ..frontend.types import ArrayT, coerce
from ..semantics import cast_value, eval_binop, eval_unop


class OracleError(SimError):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def init_store(prog: ElaboratedProgram, inputs: dict | None = None) -> dict:
    inputs = inputs or {}
    store = {}
    for v in prog.shared:
        val = inputs.get(v.name, v.init)
        if isinstance(v.type, ArrayT):
            vals = list(val) if isinstance(val, (list, tuple)) else [val] * v.type.length
            if len(vals) != v.type.length:
                raise ValueError(f"input '{v.name}' has {len(vals)} elements, expected {v.type.length}")
            store[v.name] = [coerce(x, v.type.elem) for x in vals]
        else:
            store[v.name] = coerce(val, v.type)
    return store


def _sites(stmts: list[SStmt]) -> list[int]:
    out = []
    for s in walk_stmts(stmts):
        if isinstance(s, SWrite):
            out.append(s.site)
        for e in stmt_exprs(s):
            out += [x.site for x in walk_expr(e) if isinstance(x, ERead)]
    return sorted(set(out))


class ThreadExec:
    """Statement interpreter for one thread of one function."""

    def __init__(self, prog: ElaboratedProgram):
        self.prog = prog
        self.lengths = {v.name: v.length for v in prog.shared}
        self.types = {v.name: v.elem_type for v in prog.shared}

    def run_function(self, name: str, args: list):
        f = self.prog.function(name)
        env = {p: coerce(a, t) for (p, t), a in zip(f.params, args)}
        types = {p: t for p, t in f.params}
        try:
            yield from self.block(f.body, env, types)
        except _Return as r:
            return r.value
        return None

    # ---- expressions: reads are the only effect, so evaluation yields ----

    def expr(self, e: EExpr, env: dict):
        if isinstance(e, EConst):
            return e.value
        if isinstance(e, ELocal):
            return env[e.name]
        if isinstance(e, ERead):
            idx = None
            if e.index is not None:
                idx = int((yield from self.expr(e.index, env))) % self.lengths[e.var]
            return (yield ("read", e.var, idx, e.site))
        if isinstance(e, EBin):
            a = yield from self.expr(e.lhs, env)
            b = yield from self.expr(e.rhs, env)
            return eval_binop(e.op, a, b, e.type, e.lhs.type)
        if isinstance(e, EUn):
            return eval_unop(e.op, (yield from self.expr(e.operand, env)), e.type)
        if isinstance(e, ESelect):
            # both arms are evaluated, as in hardware
            c = yield from self.expr(e.cond, env)
            a = yield from self.expr(e.then, env)
            b = yield from self.expr(e.other, env)
            return a if c else b
        if isinstance(e, ECast):
            return cast_value((yield from self.expr(e.operand, env)), e.type)
        raise TypeError(e)

    # ---- statements ----

    def block(self, stmts: list[SStmt], env: dict, types: dict):
        for s in stmts:
            yield from self.stmt(s, env, types)

    def stmt(self, s: SStmt, env: dict, types: dict):
        if isinstance(s, SLet):
            types[s.name] = s.type
            env[s.name] = coerce((yield from self.expr(s.init, env)), s.type)
        elif isinstance(s, SSet):
            env[s.name] = coerce((yield from self.expr(s.value, env)), types[s.name])
        elif isinstance(s, SWrite):
            idx = None
            if s.index is not None:
                idx = int((yield from self.expr(s.index, env))) % self.lengths[s.var]
            val = coerce((yield from self.expr(s.value, env)), self.types[s.var])
            yield ("write", s.var, idx, val, s.site)
        elif isinstance(s, SIf):
            c = yield from self.expr(s.cond, env)
            taken, skipped = (s.then, s.other) if c else (s.other, s.then)
            sites = _sites(skipped)
            if sites:
                yield ("pass", sites)
            yield from self.block(taken, env, types)
        elif isinstance(s, SLoop):
            if s.pre_cond is not None and not (yield from self.expr(s.pre_cond, env)):
                return
            while True:
                yield from self.block(s.body, env, types)
                if not (yield from self.expr(s.cond, env)):
                    break
        elif isinstance(s, SRegion):
            yield ("region", id(s), s.n, "enter")
            yield from self.block(s.body, env, types)
            yield ("region", id(s), s.n, "exit")
        elif isinstance(s, SWait):
            new_env = yield ("wait", id(s), lambda store, env=env, types=types: self.try_wait(s, env, types, store))
            env.clear()
            env.update(new_env)
        elif isinstance(s, SBatched):
            count = yield from self.expr(s.count, env)
            args = []
            for a in s.args:
                args.append((yield from self.expr(a, env)))
            yield ("batched", s.fn, int(count), args)
        elif isinstance(s, SPipelinedDo):
            args = []
            for a in s.args:
                args.append((yield from self.expr(a, env)))
            yield ("pdo", s.fn, args)
        elif isinstance(s, (SCall, SAsync)):
            args = []
            for a in s.args:
                args.append((yield from self.expr(a, env)))
            r = yield from self.run_function(s.fn, args)
            if isinstance(s, SCall) and s.dest is not None:
                env[s.dest] = coerce(r, types[s.dest]) if s.dest in types else r
        elif isinstance(s, SReturn):
            raise _Return(None if s.value is None else (yield from self.expr(s.value, env)))
        else:
            raise TypeError(s)

    def try_wait(self, s: SWait, env: dict, types: dict, store: dict):
        """Evaluate a wait body and condition against ``store`` without side effects."""
        env2, types2 = dict(env), dict(types)
        writes = []
        g = self._wait_gen(s, env2, types2)
        req = next(g)
        try:
            while True:
                if req[0] == "read":
                    _, var, idx, _site = req
                    staged = [w for w in writes if w[0] == var and w[1] == idx]
                    val = staged[-1][2] if staged else (store[var] if idx is None else store[var][idx])
                    req = g.send(val)
                elif req[0] == "write":
                    writes.append((req[1], req[2], req[3]))
                    req = g.send(None)
                elif req[0] == "pass":
                    req = g.send(None)
                else:
                    raise OracleError(f"{req[0]} inside wait_for is not supported")
        except StopIteration as stop:
            ok = bool(stop.value)
        return ok, writes, env2

    def _wait_gen(self, s: SWait, env: dict, types: dict):
        yield from self.block(s.body, env, types)
        return (yield from self.expr(s.cond, env))


def apply_write(store: dict, var: str, idx, val) -> None:
    if idx is None:
        store[var] = val
    else:
        store[var][idx] = val


def interpret_serialized(prog: ElaboratedProgram, inputs: dict | None = None, max_steps: int = 10_000_000) -> dict:
    """Canonical execution: every thread runs to completion before its successor starts."""
    store = init_store(prog, inputs)
    ex = ThreadExec(prog)
    steps = [0]

    def drive(gen):
        try:
            req = next(gen)
            while True:
                steps[0] += 1
                if steps[0] > max_steps:
                    raise OracleError("serialized interpretation exceeded its step budget")
                kind = req[0]
                if kind == "read":
                    _, var, idx, _ = req
                    resp = store[var] if idx is None else store[var][idx]
                elif kind == "write":
                    apply_write(store, req[1], req[2], req[3])
                    resp = None
                elif kind == "wait":
                    ok, writes, env = req[2](store)
                    if not ok:
                        raise OracleError("wait_for condition is false in the serialized execution")
                    for w in writes:
                        apply_write(store, *w)
                    resp = env
                elif kind == "batched":
                    _, fn, count, args = req
                    for i in range(count):
                        drive(ex.run_function(fn, [i, *args]))
                    resp = None
                elif kind == "pdo":
                    _, fn, args = req
                    i = 0
                    while drive(ex.run_function(fn, [i, *args])):
                        i += 1
                    resp = None
                else:
                    resp = None
                req = gen.send(resp)
        except StopIteration as stop:
            return stop.value

    drive(ex.run_function(prog.entry, []))
    return store
