"""Plain sequential reading of a source module, straight from the syntax tree.

This interpreter shares nothing with elaboration: templates, lambdas and
static control are handled dynamically. Parallel constructs take their
C-style meaning: ``pipelined_for`` is a counted loop, ``pipelined_do`` a loop
that runs until the body returns false, ``atomic`` and scheduled blocks are
plain blocks, and ``wait_for`` must already hold when reached.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..frontend import ast
from ..frontend.parser import parse
from ..frontend.types import Float32T, SemType, coerce, f32_bits, scalar_type_named, zero_value
from .serial import OracleError

DYN = None  # type known only at run time


@dataclass
class ArrayD:
    elem: object
    length: int


@dataclass
class StructD:
    name: str
    fields: list  # (name, descriptor)


@dataclass
class Closure:
    params: list[ast.Param]
    body: ast.Block
    scope: "Scope"
    node: object  # FnDecl or Lambda, identifies static locals
    template: list = field(default_factory=list)
    ret: object = None


class Scope:
    def __init__(self, parent: "Scope | None" = None):
        self.parent = parent
        self.vals: dict = {}
        self.types: dict = {}  # variable name -> descriptor
        self.tnames: dict = {}  # type name -> descriptor

    def find(self, name: str) -> "Scope | None":
        s = self
        while s is not None:
            if name in s.vals:
                return s
            s = s.parent
        return None

    def find_type(self, name: str):
        s = self
        while s is not None:
            if name in s.tnames:
                return True, s.tnames[name]
            s = s.parent
        return False, None


class _Ret(Exception):
    def __init__(self, value):
        self.value = value


def _zero(d):
    if isinstance(d, ArrayD):
        return [_zero(d.elem) for _ in range(d.length)]
    if isinstance(d, StructD):
        return {n: _zero(t) for n, t in d.fields}
    if isinstance(d, SemType):
        return zero_value(d)
    return 0


def _conv(v, d):
    if d is DYN:
        return copy.deepcopy(v) if isinstance(v, (list, dict)) else v
    if isinstance(d, ArrayD):
        vals = list(v) if isinstance(v, (list, tuple)) else []
        vals += [_zero(d.elem)] * (d.length - len(vals))
        return [_conv(x, d.elem) for x in vals[:d.length]]
    if isinstance(d, StructD):
        src = v if isinstance(v, dict) else dict(zip([n for n, _ in d.fields], v or []))
        return {n: _conv(src[n], t) if n in src else _zero(t) for n, t in d.fields}
    if isinstance(d, SemType):
        if isinstance(v, (np.floating, float)) and not isinstance(d, Float32T):
            return coerce(int(float(v)), d)  # float to int truncates
        return coerce(v, d)
    return v


def _is_float(v) -> bool:
    return isinstance(v, (np.floating, float))


def _c_div(a: int, b: int) -> int:
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _binop(op: str, a, b):
    if op in ("==", "!="):
        r = a == b
        return r if op == "==" else not r
    if op in ("<", ">", "<=", ">="):
        return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]
    if _is_float(a) or _is_float(b):
        x, y = np.float32(a), np.float32(b)
        with np.errstate(all="ignore"):
            if op == "+":
                return np.float32(x + y)
            if op == "-":
                return np.float32(x - y)
            if op == "*":
                return np.float32(x * y)
            if op == "/":
                return np.float32(x / y) if y != 0 else np.float32(0.0)
        raise OracleError(f"operator {op} on float32")
    if isinstance(a, bool) and isinstance(b, bool) and op in ("&", "|", "^"):
        return {"&": a and b, "|": a or b, "^": a != b}[op]
    a, b = int(a), int(b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _c_div(a, b)
    if op == "%":
        return a - b * _c_div(a, b) if b else 0
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    if op == "^":
        return a ^ b
    if op == "<<":
        return a << b if 0 <= b < 128 else 0
    if op == ">>":
        return a >> b if b >= 0 else 0
    raise OracleError(f"unknown operator {op}")


class SourceInterpreter:
    def __init__(self, module: ast.Module, consts: dict, inputs: dict):
        self.g = Scope()
        self.statics: dict = {}
        self.shared: list[str] = []
        for k, v in consts.items():
            self.g.vals[k] = int(v)
        self.fns: list[ast.FnDecl] = []
        for d in module.decls:
            if isinstance(d, ast.FnDecl):
                self.g.vals[d.name] = Closure(d.params, d.body, self.g, d, d.template, d.ret)
                self.fns.append(d)
            elif isinstance(d, ast.VarDecl):
                dt = self.desc(d.type, self.g)
                if d.is_const:
                    self.g.vals[d.name] = _conv(self.ev(d.init, self.g), dt)
                    continue
                if d.name in inputs:
                    val = inputs[d.name]
                    if isinstance(dt, ArrayD) and not isinstance(val, (list, tuple)):
                        val = [val] * dt.length
                    if isinstance(dt, ArrayD) and len(val) != dt.length:
                        raise ValueError(f"input '{d.name}' has {len(val)} elements, expected {dt.length}")
                    v = _conv(list(val) if isinstance(val, tuple) else val, dt)
                else:
                    v = _zero(dt) if d.init is None else _conv(self.ev(d.init, self.g), dt)
                self.g.vals[d.name] = v
                self.g.types[d.name] = dt
                self.shared.append(d.name)
            else:
                self.stmt(d, self.g, None)

    # ---- types ----

    def desc(self, t: ast.TypeExpr | None, sc: Scope):
        if t is None:
            return DYN
        if isinstance(t, ast.NamedType):
            if t.name == "auto":
                return DYN
            found, d = sc.find_type(t.name)
            if found:
                return d
            s = scalar_type_named(t.name)
            if s is None:
                raise OracleError(f"unknown type {t.name}")
            return s
        if isinstance(t, ast.ArrayTypeExpr):
            return ArrayD(self.desc(t.elem, sc), int(self.ev(t.length, sc)))
        return DYN  # function types and decltype carry no run-time conversion

    # ---- calls ----

    def call(self, f, args: list, type_args: list | None = None, sc: Scope | None = None):
        if not isinstance(f, Closure):
            raise OracleError(f"call of a non-function value {f!r}")
        fs = Scope(f.scope)
        for i, tp in enumerate(f.template):
            if tp.kind == "typename":
                fs.tnames[tp.name] = self.desc(type_args[i], sc) if type_args and i < len(type_args) else DYN
        unbound = {tp.name for tp in f.template if tp.kind == "auto"}
        for p, a in zip(f.params, args):
            # deduce ``auto N`` from ``T[N]`` parameters
            if isinstance(p.type, ast.ArrayTypeExpr) and isinstance(p.type.length, ast.Var) \
                    and p.type.length.name in unbound and isinstance(a, list):
                fs.vals[p.type.length.name] = len(a)
                unbound.discard(p.type.length.name)
        for p, a in zip(f.params, args):
            d = self.desc(p.type, fs)
            fs.vals[p.name] = _conv(a, d)
            fs.types[p.name] = d
        try:
            self.block(f.body.stmts, fs, f.node)
        except _Ret as r:
            return _conv(r.value, self.desc(f.ret, fs)) if f.ret is not None and r.value is not None else r.value
        return None

    def builtin(self, name: str, e: ast.Call, sc: Scope, fn_node):
        if name == "eq":
            a, b = (self.ev(x, sc) for x in e.args)
            if _is_float(a) or _is_float(b):
                return f32_bits(a) == f32_bits(b)
            return a == b
        if name == "pipelined_for":
            n = int(self.ev(e.args[0], sc))
            f = self.ev(e.args[1], sc)
            extra = [self.ev(x, sc) for x in e.args[2:]]
            for i in range(n):
                self.call(f, [i, *extra])
            return None
        if name == "pipelined_do":
            f = self.ev(e.args[0], sc)
            extra = [self.ev(x, sc) for x in e.args[1:]]
            i = 0
            while self.call(f, [i, *extra]):
                i += 1
            return None
        raise OracleError(f"unknown builtin {name}")

    # ---- expressions ----

    def ev(self, e: ast.Expr, sc: Scope, fn_node=None):
        if isinstance(e, ast.Literal):
            if e.kind == "float":
                return np.float32(e.value)
            return bool(e.value) if e.kind == "bool" else int(e.value)
        if isinstance(e, ast.Var):
            s = sc.find(e.name)
            if s is None:
                raise OracleError(f"unknown name {e.name}")
            return s.vals[e.name]
        if isinstance(e, ast.Index):
            base = self.ev(e.base, sc, fn_node)
            i = int(self.ev(e.index, sc, fn_node))
            if not len(base):
                return self.lvalue(e, sc)[0][0]
            return base[i % len(base)]
        if isinstance(e, ast.Field):
            return self.ev(e.base, sc, fn_node)[e.name]
        if isinstance(e, ast.BinOp):
            if e.op == "&&":
                return bool(self.ev(e.lhs, sc, fn_node)) and bool(self.ev(e.rhs, sc, fn_node))
            if e.op == "||":
                return bool(self.ev(e.lhs, sc, fn_node)) or bool(self.ev(e.rhs, sc, fn_node))
            return _binop(e.op, self.ev(e.lhs, sc, fn_node), self.ev(e.rhs, sc, fn_node))
        if isinstance(e, ast.UnOp):
            v = self.ev(e.operand, sc, fn_node)
            if e.op == "!":
                return not bool(v)
            if e.op == "-":
                return np.float32(-v) if _is_float(v) else -int(v)
            return (not v) if isinstance(v, bool) else ~int(v)
        if isinstance(e, ast.Ternary):
            return self.ev(e.then if self.ev(e.cond, sc, fn_node) else e.other, sc, fn_node)
        if isinstance(e, ast.Call):
            if isinstance(e.callee, ast.Var):
                name = e.callee.name
                if sc.find(name) is None:
                    t = scalar_type_named(name)
                    if t is not None:
                        return _conv(self.ev(e.args[0], sc, fn_node), t)
                    return self.builtin(name, e, sc, fn_node)
            f = self.ev(e.callee, sc, fn_node)
            return self.call(f, [self.ev(a, sc, fn_node) for a in e.args], e.type_args, sc)
        if isinstance(e, ast.Lambda):
            ls = Scope(self.g)
            for c in e.captures:
                s = sc.find(c)
                if s is None:
                    raise OracleError(f"unknown capture {c}")
                ls.vals[c] = s.vals[c]
            # type names visible where the lambda is written stay visible inside it
            s = sc
            while s is not None and s is not self.g:
                for k, v in s.tnames.items():
                    ls.tnames.setdefault(k, v)
                s = s.parent
            return Closure(e.params, e.body, ls, e, [], e.ret)
        if isinstance(e, ast.InitList):
            vals = [self.ev(x, sc, fn_node) for x in e.items]
            return dict(zip(e.names, vals)) if e.names else vals
        raise OracleError(f"unsupported expression {type(e).__name__}")

    # ---- statements ----

    def lvalue(self, e: ast.Expr, sc: Scope):
        """(container, key, descriptor) of an assignable location."""
        if isinstance(e, ast.Var):
            s = sc.find(e.name)
            if s is None:
                raise OracleError(f"unknown name {e.name}")
            return s.vals, e.name, s.types.get(e.name, DYN)
        if isinstance(e, ast.Index):
            cont, key, d = self.lvalue(e.base, sc)
            arr = cont[key]
            elem = d.elem if isinstance(d, ArrayD) else DYN
            if not len(arr):
                # zero-length array: a scratch cell holding the zero value absorbs the access
                return [_zero(elem)], 0, elem
            return arr, int(self.ev(e.index, sc)) % len(arr), elem
        if isinstance(e, ast.Field):
            cont, key, d = self.lvalue(e.base, sc)
            fd = dict(d.fields).get(e.name, DYN) if isinstance(d, StructD) else DYN
            return cont[key], e.name, fd
        raise OracleError("expression is not assignable")

    def block(self, stmts: list, sc: Scope, fn_node) -> None:
        for s in stmts:
            self.stmt(s, sc, fn_node)

    def stmt(self, s: ast.Stmt, sc: Scope, fn_node) -> None:
        if isinstance(s, ast.Block):
            self.block(s.stmts, Scope(sc), fn_node)
        elif isinstance(s, ast.VarDecl):
            d = self.desc(s.type, sc)
            if s.is_static:
                key = (id(fn_node), s.name)
                if key not in self.statics:
                    holder = Scope()
                    holder.vals[s.name] = _zero(d) if s.init is None else _conv(self.ev(s.init, sc), d)
                    holder.types[s.name] = d
                    self.statics[key] = holder
                holder = self.statics[key]
                # alias the persistent cell into this scope
                sc.vals[s.name] = holder.vals[s.name]
                sc.types[s.name] = d
                sc.vals.setdefault("__statics__", {})[s.name] = holder
                return
            sc.vals[s.name] = _zero(d) if s.init is None else _conv(self.ev(s.init, sc), d)
            sc.types[s.name] = d
        elif isinstance(s, ast.Assign):
            cont, key, d = self.lvalue(s.target, sc)
            v = self.ev(s.value, sc)
            if s.op != "=":
                v = _binop(s.op, cont[key], v)
            cont[key] = _conv(v, d)
            self._sync_static(s.target, sc)
        elif isinstance(s, (ast.If, ast.StaticIf)):
            if self.ev(s.cond, sc):
                self.stmt(s.then, sc, fn_node)
            elif s.other is not None:
                self.stmt(s.other, sc, fn_node)
        elif isinstance(s, (ast.For, ast.StaticFor)):
            for i in range(int(self.ev(s.count, sc))):
                body = Scope(sc)
                body.vals[s.var] = i
                self.block(s.body.stmts, body, fn_node)
        elif isinstance(s, ast.DoWhile):
            if s.pre is not None and not self.ev(s.pre, sc):
                return
            while True:
                self.stmt(s.body, sc, fn_node)
                if not self.ev(s.cond, sc):
                    break
        elif isinstance(s, ast.While):
            while self.ev(s.cond, sc):
                self.stmt(s.body, sc, fn_node)
        elif isinstance(s, ast.ExprStmt):
            self.ev(s.expr, sc)
        elif isinstance(s, ast.WaitFor):
            ws = Scope(sc)
            if s.body is not None:
                self.block(s.body.stmts, ws, fn_node)
            if not self.ev(s.cond, ws):
                raise OracleError("wait_for condition is false in the sequential reading")
        elif isinstance(s, ast.Atomic):
            self.stmt(s.body, sc, fn_node)
        elif isinstance(s, ast.Return):
            raise _Ret(None if s.value is None else self.ev(s.value, sc))
        elif isinstance(s, ast.Using):
            sc.tnames[s.name] = self.desc(s.type, sc)
        elif isinstance(s, ast.FnDecl):
            sc.vals[s.name] = Closure(s.params, s.body, sc, s, s.template, s.ret)
        elif isinstance(s, ast.StructDecl):
            sc.tnames[s.name] = StructD(s.name, [(p.name, self.desc(p.type, sc)) for p in s.fields])
        else:
            raise OracleError(f"unsupported statement {type(s).__name__}")

    def _sync_static(self, target: ast.Expr, sc: Scope) -> None:
        """Scalar statics are copied into scopes; write assignments back to their cell."""
        while not isinstance(target, ast.Var):
            target = target.base
        s = sc.find(target.name)
        holders = s.vals.get("__statics__", {}) if s is not None else {}
        if target.name in holders:
            holders[target.name].vals[target.name] = s.vals[target.name]

    def run(self, entry: str | None = None) -> dict:
        if entry is None:
            cands = [f for f in self.fns if not f.params and not f.template and not f.has_attr("inline")]
            if not cands:
                raise OracleError("no entry function")
            entry = cands[-1].name
        self.call(self.g.vals[entry], [])
        return {n: self.g.vals[n] for n in self.shared}


def interpret_sequential_source(source: str | ast.Module, consts: dict | None = None, inputs: dict | None = None,
                                entry: str | None = None) -> dict:
    module = parse(source) if isinstance(source, str) else source
    return SourceInterpreter(module, consts or {}, inputs or {}).run(entry)
