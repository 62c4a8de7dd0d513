"""Elaboration: a partial evaluator from the surface AST to ``ElaboratedProgram``.

Compile-time constructs (static for/if, templates, constant bindings,
first-class functions, lambdas and inline functions) are evaluated away.
Types are checked as each construct is instantiated, which is the only
point where generic code has concrete types.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

from ..errors import ElabError, SharedCaptureError, TypeCheckError
from . import ast
from .elaborated import (
    EConst, EExpr, ELocal, ERead, ElaboratedProgram, EFunction, SAsync, SBatched, SCall, SIf, SiteInfo, SLet,
    SLoop, SPipelinedDo, SRegion, SReturn, SSet, SStmt, SWait, SWrite, SharedVar, walk_expr,
)
from .lexer import NOWHERE, Span
from .parser import parse
from .typerules import (
    assignable, const_int_type, convert, make_binop, make_select, make_unop, require_bool,
)
from .types import (
    BOOL, CONST_INT, FLOAT32, UINT32, VOID, ArrayT, BoolT, ConstIntT, ConstValue, Float32T, FnT, IntT, SemType,
    TupleT, VoidT, coerce, scalar_type_named, zero_value,
)

MAX_DEPTH = 64
BUILTINS = {"pipelined_for", "pipelined_do", "eq"}


# ---- bindings ---------------------------------------------------------------


@dataclass
class BConst:
    value: EConst
    mutable: bool = False  # a parameter bound to a constant argument


@dataclass
class BLocal:
    name: str
    type: SemType
    alias: bool = False  # shares storage with a caller local; copied on first write


@dataclass
class BAgg:
    type: SemType
    items: list


@dataclass
class BShared:
    var: SharedVar


@dataclass
class BFn:
    decl: object  # ast.FnDecl | ast.Lambda
    env: "Env"
    name: str


@dataclass
class BType:
    type: SemType


@dataclass
class Agg:
    """Aggregate value: scalarized array or struct."""

    type: SemType
    items: list


class Env:
    def __init__(self, parent: "Env | None" = None, barrier: bool = False):
        self.parent = parent
        self.vars: dict[str, object] = {}
        self.barrier = barrier  # thread-locals of outer scopes are invisible past this env

    def bind(self, name: str, b) -> None:
        self.vars[name] = b

    def lookup(self, name: str, span: Span):
        env, crossed = self, False
        while env is not None:
            if name in env.vars:
                b = env.vars[name]
                if crossed and isinstance(b, (BLocal, BAgg)):
                    raise TypeCheckError(span, f"thread-local '{name}' is not visible here; capture it explicitly")
                return b
            crossed = crossed or env.barrier
            env = env.parent
        return None

    def rebind(self, name: str, b) -> None:
        env = self
        while env is not None:
            if name in env.vars:
                env.vars[name] = b
                return
            env = env.parent
        raise KeyError(name)


@dataclass
class FnCtx:
    name: str
    names: set = field(default_factory=set)
    lambdas: int = 0

    def fresh(self, base: str) -> str:
        base = base or "t"
        if base not in self.names:
            self.names.add(base)
            return base
        k = 1
        while f"{base}_{k}" in self.names:
            k += 1
        self.names.add(f"{base}_{k}")
        return f"{base}_{k}"


@dataclass
class InlineFrame:
    ret: SemType | None  # None = infer
    value: object = None
    returned: bool = False


@dataclass
class TypedModule:
    """Result of name resolution and type checking."""

    module: ast.Module
    consts: dict
    symbols: dict  # source name -> (kind, SemType); kind is shared | local | const
    expr_types: dict  # id(ast expr) -> SemType
    program: ElaboratedProgram | None = None


def _impure(v) -> bool:
    if isinstance(v, Agg):
        return any(_impure(x) for x in v.items)
    if isinstance(v, EExpr):
        return any(isinstance(x, ERead) for x in walk_expr(v))
    return False


def _type_of(v) -> SemType:
    if isinstance(v, (EExpr, Agg)):
        return v.type
    if isinstance(v, BFn):
        return FnT((), None)
    raise TypeError(v)


class Elaborator:
    def __init__(self, module: ast.Module, consts: dict, ram_threshold: int = 4):
        self.module = module
        self.ram_threshold = ram_threshold
        self.root = Env()
        for k, v in consts.items():
            cv = v if isinstance(v, ConstValue) else ConstValue(v)
            t = cv.type
            self.root.bind(k, BConst(EConst(t, coerce(cv.value, t) if not isinstance(t, ConstIntT) else int(cv.value))))
        self.shared: list[SharedVar] = []
        self.sites: list[SiteInfo] = []
        self.functions: list[EFunction] = []
        self.fn_cache: dict[int, str] = {}
        self.next_site = 0
        self.next_call_site = 0
        self.out: list[SStmt] = []
        self.ctx: FnCtx | None = None
        self.frames: list[InlineFrame] = []
        self.dyn_depth = 0  # nesting of dynamic if/loop/region inside the current function or inline body
        self.depth = 0
        self.dry_level = 0
        self.in_wait = False
        self.symbols: dict = {}
        self.expr_types: dict = {}

    # ---- bookkeeping
    @contextlib.contextmanager
    def sink(self, stmts: list):
        saved = self.out
        self.out = stmts
        try:
            yield stmts
        finally:
            self.out = saved

    @contextlib.contextmanager
    def dry(self):
        """Evaluate for types only; all side effects on the program are discarded."""
        saved = (self.next_site, len(self.shared), len(self.sites), self.next_call_site, dict(self.fn_cache),
                 len(self.functions), set(self.ctx.names) if self.ctx else None,
                 self.ctx.lambdas if self.ctx else 0, self.dyn_depth)
        self.dry_level += 1
        try:
            with self.sink([]):
                yield
        finally:
            self.dry_level -= 1
            (self.next_site, ns, nsi, self.next_call_site, self.fn_cache, nf, names, lam, self.dyn_depth) = saved
            del self.shared[ns:]
            del self.sites[nsi:]
            del self.functions[nf:]
            if self.ctx is not None:
                self.ctx.names = names
                self.ctx.lambdas = lam

    def emit(self, s: SStmt) -> None:
        self.out.append(s)

    def new_site(self, var: str, kind: str, span: Span) -> int:
        s = self.next_site
        self.next_site += 1
        self.sites.append(SiteInfo(s, var, kind, self.ctx.name if self.ctx else "", span))
        return s

    def new_call_site(self) -> int:
        c = self.next_call_site
        self.next_call_site += 1
        return c

    def note_type(self, node, t: SemType) -> None:
        if not self.dry_level:
            self.expr_types[id(node)] = t

    def note_symbol(self, name: str, kind: str, t: SemType) -> None:
        if not self.dry_level:
            self.symbols[name] = (kind, t)

    def shared_name(self, base: str) -> str:
        taken = {v.name for v in self.shared}
        if base not in taken:
            return base
        k = 1
        while f"{base}_{k}" in taken:
            k += 1
        return f"{base}_{k}"

    def make_shared(self, name: str, t: SemType, init, span: Span) -> SharedVar:
        if isinstance(t, TupleT) or (isinstance(t, ArrayT) and not _scalar(t.elem)):
            raise ElabError(span, f"shared variable '{name}' must be a scalar or an array of scalars")
        storage = "ram" if isinstance(t, ArrayT) and t.length >= self.ram_threshold else "scalar"
        v = SharedVar(self.shared_name(name), t, init, storage)
        self.shared.append(v)
        self.note_symbol(name, "shared", t)
        return v

    def temp(self, v: EExpr, base: str = "t") -> ELocal:
        if isinstance(v.type, ConstIntT):
            v = convert(v, const_int_type(v.value), NOWHERE)
        name = self.ctx.fresh(base)
        self.emit(SLet(name, v.type, v))
        return ELocal(v.type, name)

    def materialize(self, v, base: str = "t"):
        """Pin a value to locals so that later statements cannot change it."""
        if isinstance(v, Agg):
            return Agg(v.type, [self.materialize(x, base) for x in v.items])
        if isinstance(v, (EConst, ELocal)) or isinstance(v, BFn):
            return v
        return self.temp(v, base)

    # ---- types
    def resolve_type(self, te: ast.TypeExpr | None, env: Env) -> SemType | None:
        if te is None:
            return None
        if isinstance(te, ast.NamedType):
            if te.name == "auto":
                return None
            b = env.lookup(te.name, te.span)
            if isinstance(b, BType):
                return b.type
            st = scalar_type_named(te.name)
            if st is not None:
                return st
            raise ElabError(te.span, f"unknown type '{te.name}'")
        if isinstance(te, ast.ArrayTypeExpr):
            elem = self.resolve_type(te.elem, env)
            if elem is None:
                raise ElabError(te.span, "array element type cannot be auto")
            n = self.const_int(te.length, env, "array length")
            if n <= 0:
                raise ElabError(te.span, f"array length must be positive, got {n}")
            return ArrayT(elem, n)
        if isinstance(te, ast.FnTypeExpr):
            ps = tuple(self.resolve_type(p, env) for p in te.params)
            return FnT(ps, self.resolve_type(te.ret, env))
        if isinstance(te, ast.DecltypeExpr):
            with self.dry():
                v = self.ev(te.expr, env)
            return _type_of(v)
        raise ElabError(te.span, f"unsupported type expression {type(te).__name__}")

    def const_int(self, e: ast.Expr, env: Env, what: str) -> int:
        v = self.ev(e, env)
        if not isinstance(v, EConst) or not isinstance(v.type, (IntT, ConstIntT)):
            raise ElabError(e.span, f"{what} must be a compile-time integer constant")
        return int(v.value)

    # ---- values
    def coerce_value(self, v, t: SemType, span: Span):
        if isinstance(v, BFn):
            raise TypeCheckError(span, "a function cannot be stored in a variable of non-function type")
        if isinstance(t, (ArrayT, TupleT)):
            if not isinstance(v, Agg) or not assignable(v.type, t):
                raise TypeCheckError(span, f"cannot assign {_type_of(v)} to {t}")
            elems = [t.elem] * t.length if isinstance(t, ArrayT) else list(t.elems)
            return Agg(t, [self.coerce_value(x, et, span) for x, et in zip(v.items, elems)])
        if isinstance(v, Agg):
            raise TypeCheckError(span, f"cannot assign {v.type} to {t}")
        return convert(v, t, span)

    def zero(self, t: SemType):
        if isinstance(t, ArrayT):
            return Agg(t, [self.zero(t.elem) for _ in range(t.length)])
        if isinstance(t, TupleT):
            return Agg(t, [self.zero(e) for e in t.elems])
        return EConst(t, zero_value(t))

    def init_list(self, il: ast.InitList, t: SemType, env: Env):
        if isinstance(t, ArrayT):
            if il.names:
                raise TypeCheckError(il.span, "designated initializers require a struct type")
            vals = self.ev_seq(il.items, env)
            if len(vals) > t.length:
                raise TypeCheckError(il.span, f"too many initializers for {t}")
            items = [self.init_item(v, t.elem, il.span, env) for v in vals]
            items += [self.zero(t.elem) for _ in range(t.length - len(items))]
            return Agg(t, items)
        if isinstance(t, TupleT):
            if il.names:
                vals = self.ev_seq(il.items, env)
                by_name = dict(zip(il.names, vals))
                unknown = set(by_name) - set(t.names)
                if unknown:
                    raise TypeCheckError(il.span, f"no field {sorted(unknown)[0]} in {t}")
                items = [self.init_item(by_name[n], et, il.span, env) if n in by_name else self.zero(et)
                         for n, et in zip(t.names, t.elems)]
            else:
                vals = self.ev_seq(il.items, env)
                items = [self.init_item(v, et, il.span, env) for v, et in zip(vals, t.elems)]
                items += [self.zero(et) for et in t.elems[len(items):]]
            return Agg(t, items)
        if not il.items:
            return self.zero(t)
        if len(il.items) == 1 and not il.names:
            return self.coerce_value(self.ev(il.items[0], env), t, il.span)
        raise TypeCheckError(il.span, f"initializer list does not match {t}")

    def init_item(self, v, t, span, env):
        return self.coerce_value(v, t, span)

    def ev_init(self, e: ast.Expr, t: SemType, env: Env):
        if isinstance(e, ast.InitList):
            return self.init_list(e, t, env)
        return self.coerce_value(self.ev(e, env), t, e.span)

    def binding_value(self, b, name: str, span: Span):
        if isinstance(b, BConst):
            return b.value
        if isinstance(b, BLocal):
            return ELocal(b.type, b.name)
        if isinstance(b, BAgg):
            return Agg(b.type, [self.binding_value(x, name, span) for x in b.items])
        if isinstance(b, BShared):
            v = b.var
            if isinstance(v.type, ArrayT):
                items = []
                for k in range(v.type.length):
                    items.append(ERead(v.type.elem, v.name, EConst(UINT32, k), self.new_site(v.name, "read", span)))
                return Agg(v.type, items)
            return ERead(v.type, v.name, None, self.new_site(v.name, "read", span))
        if isinstance(b, BFn):
            return b
        if isinstance(b, BType):
            raise TypeCheckError(span, f"type '{name}' used as a value")
        raise ElabError(span, f"cannot use '{name}' as a value")

    def bind_local(self, env: Env, name: str, t: SemType, init, span: Span):
        """Declare thread-local ``name`` of type ``t`` initialized from value ``init``."""
        if isinstance(t, (ArrayT, TupleT)):
            b = self._agg_locals(name, t, init)
        else:
            lname = self.ctx.fresh(name)
            self.emit(SLet(lname, t, init))
            b = BLocal(lname, t)
        env.bind(name, b)
        self.note_symbol(name, "local", t)
        return b

    def _agg_locals(self, base: str, t: SemType, init: Agg):
        if isinstance(t, ArrayT):
            keys = [str(k) for k in range(t.length)]
            elems = [t.elem] * t.length
        else:
            keys = list(t.names) if t.names else [str(k) for k in range(len(t.elems))]
            elems = list(t.elems)
        items = []
        for key, et, iv in zip(keys, elems, init.items):
            if isinstance(et, (ArrayT, TupleT)):
                items.append(self._agg_locals(f"{base}_{key}", et, iv))
            else:
                lname = self.ctx.fresh(f"{base}_{key}")
                self.emit(SLet(lname, et, iv))
                items.append(BLocal(lname, et))
        return BAgg(t, items)

    def bind_param(self, env: Env, name: str, t: SemType | None, v, span: Span):
        """Bind an inline-call parameter by value without copying unless needed."""
        if isinstance(v, BFn):
            env.bind(name, v)
            return
        if t is not None:
            v = self.coerce_value(v, t, span)
        env.bind(name, self._param_binding(v, name))

    def _param_binding(self, v, name: str):
        if isinstance(v, Agg):
            return BAgg(v.type, [self._param_binding(x, name) for x in v.items])
        if isinstance(v, EConst):
            if isinstance(v.type, ConstIntT):
                return BConst(v, mutable=True)
            return BConst(v, mutable=True)
        if isinstance(v, ELocal):
            return BLocal(v.name, v.type, alias=True)
        t = self.temp(v, name)
        return BLocal(t.name, t.type)

    # ---- expression sequencing
    def ev_seq(self, nodes: list, env: Env) -> list:
        """Evaluate left to right; earlier impure values are pinned if a later
        operand emits statements (so they observe state at their own position)."""
        vals, marks = [], []
        for n in nodes:
            start = len(self.out)
            v = self.ev(n, env)
            if len(self.out) > start:
                shift = 0
                for k in range(len(vals)):
                    marks[k] += shift
                    if _impure(vals[k]):
                        vals[k], added = self._pin_at(vals[k], marks[k])
                        shift += added
            vals.append(v)
            marks.append(len(self.out))
        return vals

    def _pin_at(self, v, pos: int):
        tmp: list[SStmt] = []
        with self.sink(tmp):
            pinned = self.materialize(v)
        self.out[pos:pos] = tmp
        return pinned, len(tmp)

    # ---- expressions
    def ev(self, e: ast.Expr, env: Env):
        v = self._ev(e, env)
        if isinstance(v, (EExpr, Agg)):
            self.note_type(e, v.type)
        return v

    def _ev(self, e: ast.Expr, env: Env):
        if isinstance(e, ast.Literal):
            if e.kind == "int":
                return EConst(CONST_INT, int(e.value))
            if e.kind == "float":
                return EConst(FLOAT32, coerce(e.value, FLOAT32))
            return EConst(BOOL, bool(e.value))
        if isinstance(e, ast.Var):
            b = env.lookup(e.name, e.span)
            if b is None:
                raise ElabError(e.span, f"unbound name '{e.name}'")
            return self.binding_value(b, e.name, e.span)
        if isinstance(e, ast.Index):
            return self.ev_index(e, env)
        if isinstance(e, ast.Field):
            base = self.ev(e.base, env)
            if not isinstance(base, Agg) or not isinstance(base.type, TupleT):
                raise TypeCheckError(e.span, f"field access .{e.name} on non-struct value")
            try:
                return base.items[base.type.field_index(e.name)]
            except ValueError:
                raise TypeCheckError(e.span, f"no field '{e.name}' in {base.type}") from None
        if isinstance(e, ast.BinOp):
            if e.op in ("&&", "||"):
                lhs = self.ev(e.lhs, env)
                mark = len(self.out)
                rhs = self.ev(e.rhs, env)
                if len(self.out) > mark:
                    raise ElabError(e.span, f"operand of {e.op} may not contain side effects")
            else:
                lhs, rhs = self.ev_seq([e.lhs, e.rhs], env)
            return make_binop(e.op, self.scalar(lhs, e.span), self.scalar(rhs, e.span), e.span)
        if isinstance(e, ast.UnOp):
            return make_unop(e.op, self.scalar(self.ev(e.operand, env), e.span), e.span)
        if isinstance(e, ast.Ternary):
            c = self.ev(e.cond, env)
            mark = len(self.out)
            a, b = self.ev_seq([e.then, e.other], env)
            if len(self.out) > mark:
                raise ElabError(e.span, "branches of ?: may not contain side effects")
            return self.select(self.scalar(c, e.span), a, b, e.span)
        if isinstance(e, ast.Call):
            return self.ev_call(e, env)
        if isinstance(e, ast.Lambda):
            return self.make_lambda(e, env)
        if isinstance(e, ast.InitList):
            if not e.items:
                raise TypeCheckError(e.span, "initializer list needs a declared type")
            vals = self.ev_seq(e.items, env)
            ts = tuple(_type_of(v) for v in vals)
            if all(t == ts[0] for t in ts) and not e.names:
                return Agg(ArrayT(ts[0], len(ts)), vals)
            return Agg(TupleT(ts, tuple(e.names)), vals)
        raise ElabError(e.span, f"unsupported expression {type(e).__name__}")

    def scalar(self, v, span: Span) -> EExpr:
        if not isinstance(v, EExpr):
            raise TypeCheckError(span, f"expected a scalar value, got {_type_of(v)}")
        return v

    def select(self, c: EExpr, a, b, span: Span):
        if isinstance(a, Agg) or isinstance(b, Agg):
            if not (isinstance(a, Agg) and isinstance(b, Agg) and a.type == b.type):
                raise TypeCheckError(span, "?: branches must have the same aggregate type")
            return Agg(a.type, [self.select(c, x, y, span) for x, y in zip(a.items, b.items)])
        return make_select(c, self.scalar(a, span), self.scalar(b, span), span)

    def ev_index(self, e: ast.Index, env: Env):
        if isinstance(e.base, ast.Var):
            b = env.lookup(e.base.name, e.base.span)
            if isinstance(b, BShared):
                v = b.var
                if not isinstance(v.type, ArrayT):
                    raise TypeCheckError(e.span, f"shared variable '{v.name}' is not an array")
                idx = self.index_expr(self.ev(e.index, env), v.type, e.span)
                return ERead(v.type.elem, v.name, idx, self.new_site(v.name, "read", e.span))
        base = self.ev(e.base, env)
        idx = self.scalar(self.ev(e.index, env), e.index.span)
        if not isinstance(base, Agg) or not isinstance(base.type, ArrayT):
            raise TypeCheckError(e.span, "indexing a non-array value")
        return self.agg_element(base, idx, e.span)

    def index_expr(self, idx, t: ArrayT, span: Span) -> EExpr:
        idx = self.scalar(idx, span)
        if not isinstance(idx.type, (IntT, ConstIntT)):
            raise TypeCheckError(span, f"array index must be an integer, got {idx.type}")
        if isinstance(idx, EConst):
            if not 0 <= int(idx.value) < t.length:
                raise ElabError(span, f"constant index {idx.value} out of range for {t}")
            return EConst(UINT32, int(idx.value))
        return idx

    def agg_element(self, base: Agg, idx: EExpr, span: Span):
        if not isinstance(idx.type, (IntT, ConstIntT)):
            raise TypeCheckError(span, f"array index must be an integer, got {idx.type}")
        if isinstance(idx, EConst):
            k = int(idx.value)
            if not 0 <= k < len(base.items):
                raise ElabError(span, f"constant index {k} out of range for {base.type}")
            return base.items[k]
        # dynamic index into a thread-local array: a multiplexer
        idx = self.materialize(idx, "idx")
        out = base.items[-1]
        for k in range(len(base.items) - 2, -1, -1):
            c = make_binop("==", idx, EConst(CONST_INT, k), span)
            out = self.select(c, base.items[k], out, span)
        return out

    def make_lambda(self, lam: ast.Lambda, env: Env) -> BFn:
        lenv = Env(env, barrier=True)
        for name in lam.captures:
            b = env.lookup(name, lam.span)
            if b is None:
                raise ElabError(lam.span, f"captured name '{name}' is unbound")
            if isinstance(b, BShared):
                raise SharedCaptureError(lam.span, f"shared variable '{name}' cannot be captured; it is accessible directly")
            if isinstance(b, (BLocal, BAgg)):
                b = self._param_binding(self.materialize(self.binding_value(b, name, lam.span), name), name)
                if isinstance(b, BLocal):
                    b = BLocal(b.name, b.type, alias=True)
            lenv.bind(name, b)
        self.ctx.lambdas += 1
        return BFn(lam, lenv, f"{self.ctx.name}_lambda{self.ctx.lambdas - 1}")

    # ---- calls
    def ev_call(self, e: ast.Call, env: Env):
        callee = e.callee
        if isinstance(callee, ast.Var):
            name = callee.name
            b = env.lookup(name, callee.span)
            if b is None and name in BUILTINS:
                return self.builtin(name, e, env)
            if isinstance(b, BType) or (b is None and scalar_type_named(name) is not None):
                t = b.type if isinstance(b, BType) else scalar_type_named(name)
                if len(e.args) != 1:
                    raise TypeCheckError(e.span, f"cast to {t} takes one argument")
                v = self.scalar(self.ev(e.args[0], env), e.span)
                return convert(v, t, e.span, explicit=True)
        fn = self.ev(callee, env)
        if not isinstance(fn, BFn):
            raise TypeCheckError(e.span, "called value is not a function")
        return self.call(fn, e.args, env, e.span, e.type_args)

    def call(self, fn: BFn, arg_nodes: list, env: Env, span: Span, type_args=()):
        decl = fn.decl
        if isinstance(decl, ast.Lambda) or decl.has_attr("inline") or decl.template:
            args = self.ev_seq(arg_nodes, env)
            return self.inline_call(fn, args, span, [self.resolve_type(t, env) for t in type_args])
        args = self.ev_seq(arg_nodes, env)
        if decl.has_attr("batched"):
            if not args:
                raise TypeCheckError(span, "batched call needs a thread count")
            return self.batched_call(fn, args[0], args[1:], span)
        fname, ef = self.instantiate(fn, "async" if decl.has_attr("async") else "normal")
        params = ef.params
        if len(args) != len(params):
            raise TypeCheckError(span, f"{fname} expects {len(params)} arguments, got {len(args)}")
        cargs = [self.materialize(convert(self.scalar(a, span), t, span)) for a, (_, t) in zip(args, params)]
        cs = self.new_call_site()
        if decl.has_attr("async"):
            self.emit(SAsync(fname, cargs, cs))
            return EConst(VOID, None)
        if isinstance(ef.ret, VoidT):
            self.emit(SCall(fname, cargs, None, cs))
            return EConst(VOID, None)
        dest = self.ctx.fresh(f"{fname}_ret")
        self.emit(SCall(fname, cargs, dest, cs))
        return ELocal(ef.ret, dest)

    def builtin(self, name: str, e: ast.Call, env: Env):
        if name == "eq":
            if len(e.args) != 2:
                raise TypeCheckError(e.span, "eq takes two arguments")
            a, b = self.ev_seq(e.args, env)
            return make_binop("eqbits", self.scalar(a, e.span), self.scalar(b, e.span), e.span)
        if name == "pipelined_for":
            if len(e.args) < 2:
                raise TypeCheckError(e.span, "pipelined_for(count, fn, args...)")
            vals = self.ev_seq([e.args[0], *e.args[2:]], env)
            fn = self.ev(e.args[1], env)
            if not isinstance(fn, BFn):
                raise TypeCheckError(e.span, "pipelined_for needs a function argument")
            return self.batched_call(fn, vals[0], vals[1:], e.span)
        if name == "pipelined_do":
            if not e.args:
                raise TypeCheckError(e.span, "pipelined_do takes a function argument")
            fn = self.ev(e.args[0], env)
            more = self.ev_seq(e.args[1:], env)
            if not isinstance(fn, BFn):
                raise TypeCheckError(e.span, "pipelined_do needs a function argument")
            idx_t = self.resolve_type(e.type_args[0], env) if e.type_args else UINT32
            fname, ef, extra = self.batched_instance(fn, idx_t, e.span)
            if not isinstance(ef.ret, BoolT):
                raise TypeCheckError(e.span, "pipelined_do body must return bool")
            user = ef.params[1:len(ef.params) - len(extra)]
            if len(more) != len(user):
                raise TypeCheckError(e.span, f"{fname} expects {len(user)} extra arguments, got {len(more)}")
            cargs = [self.materialize(convert(self.scalar(a, e.span), t, e.span)) for a, (_, t) in zip(more, user)]
            self.emit(SPipelinedDo(fname, cargs + extra, self.new_call_site()))
            return EConst(VOID, None)
        raise ElabError(e.span, f"unknown builtin {name}")

    def batched_call(self, fn: BFn, count, args: list, span: Span):
        count = self.scalar(count, span)
        if not isinstance(count.type, (IntT, ConstIntT)):
            raise TypeCheckError(span, f"thread count must be an integer, got {count.type}")
        if isinstance(count, EConst) and isinstance(count.type, ConstIntT):
            count = EConst(UINT32, int(count.value))
        fname, ef, extra = self.batched_instance(fn, None, span)
        user = ef.params[1:len(ef.params) - len(extra)]
        if len(args) != len(user):
            raise TypeCheckError(span, f"{fname} expects {len(user)} arguments after the count, got {len(args)}")
        cargs = [self.materialize(convert(self.scalar(a, span), t, span)) for a, (_, t) in zip(args, user)]
        self.emit(SBatched(fname, self.materialize(count, "count"), cargs + extra, self.new_call_site()))
        return EConst(VOID, None)

    # ---- inline expansion
    def deduce(self, decl, fn: BFn, args: list, span: Span, type_args: list) -> Env:
        cenv = Env(fn.env, barrier=True)
        if isinstance(decl, ast.FnDecl):
            tparams = decl.template
            for tp, ta in zip(tparams, type_args):
                cenv.bind(tp.name, BType(ta))
            pending = {tp.name: tp.kind for tp in tparams if tp.name not in cenv.vars}
        else:
            pending = {}
        if len(args) != len(decl.params):
            raise TypeCheckError(span, f"expected {len(decl.params)} arguments, got {len(args)}")
        # plain parameters first, function-typed ones once their inputs are known
        order = [k for k, p in enumerate(decl.params) if not isinstance(p.type, ast.FnTypeExpr)]
        order += [k for k, p in enumerate(decl.params) if isinstance(p.type, ast.FnTypeExpr)]
        for k in order:
            self.unify(decl.params[k].type, args[k], cenv, pending, span)
        if pending:
            raise TypeCheckError(span, f"cannot deduce template parameter(s) {', '.join(sorted(pending))}")
        return cenv

    def unify(self, te, v, env: Env, pending: dict, span: Span) -> None:
        if isinstance(te, ast.NamedType):
            if te.name in pending:
                t = _type_of(v)
                if isinstance(t, ConstIntT):
                    t = const_int_type(v.value)
                if isinstance(v, BFn):
                    raise TypeCheckError(span, f"cannot bind function to type parameter {te.name}")
                env.bind(te.name, BType(t))
                del pending[te.name]
            return
        if isinstance(te, ast.ArrayTypeExpr):
            t = _type_of(v)
            if not isinstance(t, ArrayT):
                return
            if isinstance(te.length, ast.Var) and te.length.name in pending:
                env.bind(te.length.name, BConst(EConst(CONST_INT, t.length)))
                del pending[te.length.name]
            elem = v.items[0] if isinstance(v, Agg) and v.items else EConst(t.elem, zero_value(t.elem))
            self.unify(te.elem, elem, env, pending, span)
            return
        if isinstance(te, ast.FnTypeExpr):
            if not isinstance(v, BFn):
                raise TypeCheckError(span, "expected a function argument")
            fdecl = v.decl
            if len(fdecl.params) != len(te.params):
                raise TypeCheckError(span, f"function argument takes {len(fdecl.params)} parameters, expected {len(te.params)}")
            ptypes = []
            for pte, fp in zip(te.params, fdecl.params):
                declared = self.resolve_type(fp.type, v.env if isinstance(fdecl, ast.Lambda) else v.env)
                if declared is not None and isinstance(pte, ast.NamedType) and pte.name in pending:
                    env.bind(pte.name, BType(declared))
                    del pending[pte.name]
                pt = self.resolve_type(pte, env)
                if declared is not None and pt is not None and declared != pt:
                    raise TypeCheckError(span, f"function parameter type {declared} does not match {pt}")
                ptypes.append(pt if pt is not None else declared)
            if any(p is None for p in ptypes):
                raise TypeCheckError(span, "cannot infer function parameter types")
            rt = self.infer_return(v, ptypes, span)
            if isinstance(te.ret, ast.NamedType) and te.ret.name in pending:
                env.bind(te.ret.name, BType(rt))
                del pending[te.ret.name]
            else:
                want = self.resolve_type(te.ret, env)
                if want is not None and want != rt and not assignable(rt, want):
                    raise TypeCheckError(span, f"function returns {rt}, expected {want}")

    def infer_return(self, fn: BFn, ptypes: list, span: Span) -> SemType:
        with self.dry():
            dummies = [self.zero(t) if not isinstance(t, FnT) else None for t in ptypes]
            dummies = [self.materialize_dummy(d, t) for d, t in zip(dummies, ptypes)]
            v = self.inline_call(fn, dummies, span, [])
        return _type_of(v) if not (isinstance(v, EConst) and isinstance(v.type, VoidT)) else VOID

    def materialize_dummy(self, v, t):
        # dummy arguments must not fold as constants, or types could depend on values
        if isinstance(v, Agg):
            return Agg(v.type, [self.materialize_dummy(x, None) for x in v.items])
        return self.temp(v, "arg")

    def inline_call(self, fn: BFn, args: list, span: Span, type_args: list):
        decl = fn.decl
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.depth = 0
            raise ElabError(span, f"compile-time recursion deeper than {MAX_DEPTH}")
        try:
            cenv = self.deduce(decl, fn, args, span, type_args)
            for p, a in zip(decl.params, args):
                self.bind_param(cenv, p.name, self.resolve_type(p.type, cenv) if not isinstance(p.type, ast.FnTypeExpr) else None, a, p.span)
            ret_t = self.resolve_type(decl.ret, cenv) if decl.ret is not None else None
            frame = InlineFrame(ret_t)
            self.frames.append(frame)
            saved_depth = self.dyn_depth
            self.dyn_depth = 0
            try:
                self.block(decl.body.stmts, Env(cenv))
            finally:
                self.frames.pop()
                self.dyn_depth = saved_depth
            if not frame.returned:
                if ret_t is not None and not isinstance(ret_t, VoidT):
                    raise ElabError(decl.body.span, "inline function ends without returning a value")
                return EConst(VOID, None)
            return frame.value
        finally:
            self.depth -= 1

    # ---- function instances
    def instantiate(self, fn: BFn, kind: str) -> tuple[str, EFunction]:
        decl = fn.decl
        key = id(decl)
        if key in self.fn_cache:
            name = self.fn_cache[key]
            return name, self._find(name)
        name = decl.name
        env = Env(fn.env, barrier=True)
        params = []
        ctx = FnCtx(name)
        ef = EFunction(name, params, VOID, [], kind, self.thread_rate(decl, fn.env))
        self.fn_cache[key] = name
        self.functions.append(ef)
        with self.function_scope(ctx, ef.body):
            for p in decl.params:
                t = self.resolve_type(p.type, env)
                if t is None or not _scalar(t):
                    raise ElabError(p.span, f"parameter '{p.name}' of {name} must have a scalar type")
                pname = ctx.fresh(p.name)
                params.append((pname, t))
                env.bind(p.name, BLocal(pname, t))
                self.note_symbol(p.name, "local", t)
            ret_t = self.resolve_type(decl.ret, env)
            ef.ret = self.function_body(decl.body, env, ret_t, ef)
        return name, ef

    def batched_instance(self, fn: BFn, idx_t: SemType | None, span: Span):
        """Elaborate ``fn`` as a batched function; returns (name, fn, extra capture args)."""
        decl = fn.decl
        if isinstance(decl, ast.FnDecl):
            if decl.has_attr("inline") or decl.template:
                raise ElabError(span, f"{decl.name} cannot be a batched function body")
            if id(decl) in self.fn_cache:
                name = self.fn_cache[id(decl)]
                return name, self._find(name), []
            name, ef = self.instantiate(fn, "batched")
            ef.kind = "batched"
            self._check_index(ef, span)
            return name, ef, []
        # lambda: captured thread-locals become trailing parameters
        name = fn.name
        taken = {f.name for f in self.functions}
        while name in taken:
            name += "_"
        ctx = FnCtx(name)
        ef = EFunction(name, [], VOID, [], "batched")
        self.functions.append(ef)
        env = Env(Env(fn.env.parent, barrier=True), barrier=True)
        extra_vals = []
        extra_params = []
        with self.function_scope(ctx, ef.body):
            for cname, b in fn.env.vars.items():
                if isinstance(b, (BLocal, BAgg)):
                    flat = _flatten_binding(b)
                    newb, ps = self._param_from_capture(cname, b, ctx)
                    env.bind(cname, newb)
                    extra_params += ps
                    extra_vals += [ELocal(x.type, x.name) for x in flat]
                else:
                    env.bind(cname, b)
            for k, p in enumerate(decl.params):
                t = self.resolve_type(p.type, env)
                if k == 0 and idx_t is not None and t is not None and not isinstance(t, IntT):
                    raise TypeCheckError(p.span, "batched index parameter must be an integer")
                if t is None:
                    t = idx_t or UINT32
                if not _scalar(t):
                    raise ElabError(p.span, f"parameter '{p.name}' of a batched function must be a scalar")
                pname = ctx.fresh(p.name)
                ef.params.append((pname, t))
                env.bind(p.name, BLocal(pname, t))
                self.note_symbol(p.name, "local", t)
            ef.params += extra_params
            ret_t = self.resolve_type(decl.ret, env) if decl.ret is not None else None
            ef.ret = self.function_body(decl.body, env, ret_t, ef)
        self._check_index(ef, span)
        return name, ef, extra_vals

    def _param_from_capture(self, cname, b, ctx):
        if isinstance(b, BLocal):
            pname = ctx.fresh(cname)
            return BLocal(pname, b.type), [(pname, b.type)]
        items, ps = [], []
        for k, x in enumerate(b.items):
            nb, p = self._param_from_capture(f"{cname}_{k}", x, ctx)
            items.append(nb)
            ps += p
        return BAgg(b.type, items), ps

    def _check_index(self, ef: EFunction, span: Span) -> None:
        if not ef.params or not isinstance(ef.params[0][1], IntT):
            raise TypeCheckError(span, f"batched function {ef.name} needs an integer index as first parameter")

    def thread_rate(self, decl, env) -> int | None:
        for a in decl.attrs:
            if a.name == "thread_rate":
                if a.arg is None:
                    raise ElabError(a.span, "thread_rate needs an argument")
                n = self.const_int(a.arg, env, "thread_rate")
                if n < 1:
                    raise ElabError(a.span, "thread_rate must be at least 1")
                return n
        return None

    def _find(self, name: str) -> EFunction:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    @contextlib.contextmanager
    def function_scope(self, ctx: FnCtx, body: list):
        saved = (self.ctx, self.frames, self.dyn_depth, self.in_wait, self.depth)
        self.ctx, self.frames, self.dyn_depth, self.in_wait, self.depth = ctx, [], 0, False, 0
        try:
            with self.sink(body):
                yield
        finally:
            self.ctx, self.frames, self.dyn_depth, self.in_wait, self.depth = saved

    def function_body(self, body: ast.Block, env: Env, ret_t: SemType | None, ef: EFunction) -> SemType:
        frame = InlineFrame(ret_t)
        self.frames.append(frame)
        try:
            self.block(body.stmts, Env(env))
        finally:
            self.frames.pop()
        if not frame.returned:
            if ret_t is not None and not isinstance(ret_t, VoidT):
                raise ElabError(body.span, f"{ef.name} ends without returning a value")
            self.emit(SReturn(None))
            return VOID
        v = frame.value
        if isinstance(v, Agg):
            raise ElabError(body.span, f"{ef.name}: non-inline functions must return scalars")
        if isinstance(v, EConst) and isinstance(v.type, VoidT):
            self.emit(SReturn(None))
            return VOID
        if isinstance(v.type, ConstIntT):
            v = convert(v, const_int_type(v.value), body.span)
        self.emit(SReturn(v))
        return v.type

    # ---- statements
    def block(self, stmts: list, env: Env) -> None:
        for s in stmts:
            if self.frames and self.frames[-1].returned:
                raise ElabError(s.span, "statement after return")
            self.stmt(s, env)

    def stmt(self, s: ast.Stmt, env: Env) -> None:
        for a in getattr(s, "attrs", []):
            self.check_attr(a, s)
        if isinstance(s, ast.VarDecl):
            self.var_decl(s, env)
        elif isinstance(s, ast.Assign):
            self.assign(s, env)
        elif isinstance(s, ast.ExprStmt):
            self.ev(s.expr, env)
        elif isinstance(s, ast.Block):
            sched = [a for a in s.attrs if a.name == "schedule"]
            if sched:
                n = self.const_int(sched[0].arg, env, "schedule") if sched[0].arg is not None else None
                if n is None or n < 1:
                    raise ElabError(s.span, "schedule(N) needs N >= 1")
                self.region(s.stmts, n, False, env)
            else:
                self.block(s.stmts, Env(env))
        elif isinstance(s, ast.Atomic):
            self.region(s.body.stmts, 1, True, env)
        elif isinstance(s, ast.If):
            c = require_bool(self.scalar(self.ev(s.cond, env), s.span), s.span)
            then, other = [], []
            self.dyn_depth += 1
            try:
                with self.sink(then):
                    self.block(s.then.stmts, Env(env))
                if s.other is not None:
                    with self.sink(other):
                        self.block(s.other.stmts, Env(env))
            finally:
                self.dyn_depth -= 1
            self.emit(SIf(c, then, other))
        elif isinstance(s, ast.StaticIf):
            c = self.ev(s.cond, env)
            if not isinstance(c, EConst) or not isinstance(c.type, BoolT):
                raise ElabError(s.span, "static if condition must be a compile-time bool")
            chosen = s.then if c.value else s.other
            if chosen is not None:
                self.block(chosen.stmts, Env(env))
        elif isinstance(s, ast.StaticFor):
            n = self.const_int(s.count, env, "static for bound")
            for k in range(n):
                benv = Env(env)
                benv.bind(s.var, BConst(EConst(CONST_INT, k)))
                self.block(s.body.stmts, benv)
        elif isinstance(s, ast.For):
            self.for_loop(s, env)
        elif isinstance(s, (ast.DoWhile, ast.While)):
            self.while_loop(s, env)
        elif isinstance(s, ast.WaitFor):
            self.wait_for(s, env)
        elif isinstance(s, ast.Return):
            self.ret(s, env)
        elif isinstance(s, ast.Using):
            t = self.resolve_type(s.type, env)
            env.bind(s.name, BType(t))
        elif isinstance(s, ast.StructDecl):
            fts = []
            for f in s.fields:
                ft = self.resolve_type(f.type, env)
                if ft is None:
                    raise ElabError(f.span, "struct fields need explicit types")
                fts.append(ft)
            env.bind(s.name, BType(TupleT(tuple(fts), tuple(f.name for f in s.fields), s.name)))
        elif isinstance(s, ast.FnDecl):
            for a in s.attrs:
                self.check_attr(a, s)
            env.bind(s.name, BFn(s, env, s.name))
        else:
            raise ElabError(s.span, f"unsupported statement {type(s).__name__}")

    def check_attr(self, a: ast.Attr, owner) -> None:
        allowed = {
            "thread_rate": (ast.FnDecl,),
            "inline": (ast.FnDecl,), "async": (ast.FnDecl,), "batched": (ast.FnDecl,),
            "unordered": (ast.For, ast.DoWhile, ast.While),
            "schedule": (ast.Block,),
        }
        if a.name not in allowed:
            raise ElabError(a.span, f"unknown attribute '{a.name}'")
        if not isinstance(owner, allowed[a.name]):
            raise ElabError(a.span, f"attribute '{a.name}' is not allowed on {type(owner).__name__}")

    def var_decl(self, s: ast.VarDecl, env: Env) -> None:
        t = self.resolve_type(s.type, env)
        if s.is_static:
            if t is None:
                raise ElabError(s.span, "static locals need an explicit type")
            init = self.static_init(s, t, env)
            env.bind(s.name, BShared(self.make_shared(s.name, t, init, s.span)))
            return
        if s.init is None:
            if t is None:
                raise TypeCheckError(s.span, f"'{s.name}' needs a type or an initializer")
            self.bind_local(env, s.name, t, self.zero(t) if isinstance(t, (ArrayT, TupleT)) else self.zero(t), s.span)
            return
        if t is None:
            v = self.ev(s.init, env)
            if isinstance(v, BFn):
                env.bind(s.name, v)
                return
            if s.is_const and isinstance(v, EConst):
                env.bind(s.name, BConst(v))
                self.note_symbol(s.name, "const", v.type)
                return
            t = _type_of(v)
            if isinstance(t, ConstIntT):
                raise TypeCheckError(s.span, f"type of '{s.name}' is ambiguous; declare an explicit integer type")
            if isinstance(t, VoidT):
                raise TypeCheckError(s.span, f"'{s.name}' initialized from a void expression")
        else:
            v = self.ev_init(s.init, t, env)
            if (isinstance(v, ELocal) and v.type == t and self.out and isinstance(self.out[-1], SCall)
                    and self.out[-1].dest == v.name):
                # the call already declared its destination local; adopt it
                env.bind(s.name, BLocal(v.name, t))
                self.note_symbol(s.name, "local", t)
                return
            if s.is_const and isinstance(v, EConst):
                env.bind(s.name, BConst(v))
                self.note_symbol(s.name, "const", t)
                return
        self.bind_local(env, s.name, t, v, s.span)

    def static_init(self, s: ast.VarDecl, t: SemType, env: Env):
        if s.init is None:
            return zero_value(t)
        v = self.ev_init(s.init, t, env)
        return _const_host(v, s.span)

    def global_decl(self, s: ast.VarDecl, env: Env) -> None:
        t = self.resolve_type(s.type, env)
        if s.is_const:
            v = self.ev(s.init, env) if t is None else self.ev_init(s.init, t, env)
            if not isinstance(v, EConst):
                raise ElabError(s.span, f"module-level const '{s.name}' must be a compile-time constant")
            env.bind(s.name, BConst(v))
            return
        if t is None:
            raise ElabError(s.span, f"shared variable '{s.name}' needs an explicit type")
        init = zero_value(t) if s.init is None else _const_host(self.ev_init(s.init, t, env), s.span)
        env.bind(s.name, BShared(self.make_shared(s.name, t, init, s.span)))

    def region(self, stmts: list, n: int, atomic: bool, env: Env) -> None:
        body: list[SStmt] = []
        self.dyn_depth += 1
        try:
            with self.sink(body):
                self.block(stmts, Env(env))
        finally:
            self.dyn_depth -= 1
        self.emit(SRegion(n, body, atomic))

    def for_loop(self, s: ast.For, env: Env) -> None:
        count = self.scalar(self.ev(s.count, env), s.span)
        if not isinstance(count.type, (IntT, ConstIntT)):
            raise TypeCheckError(s.span, f"loop bound must be an integer, got {count.type}")
        if isinstance(count.type, ConstIntT):
            count = EConst(const_int_type(count.value), int(count.value))
        count = self.materialize(count, "bound")
        self.check_loop_context(s.span)
        ivar = self.ctx.fresh(s.var)
        self.emit(SLet(ivar, count.type, EConst(count.type, 0)))
        iv = ELocal(count.type, ivar)
        pre = make_binop("<", EConst(CONST_INT, 0), count, s.span)
        body: list[SStmt] = []
        benv = Env(env)
        benv.bind(s.var, BLocal(ivar, count.type))
        self.note_symbol(s.var, "local", count.type)
        self.dyn_depth += 1
        try:
            with self.sink(body):
                self.block(s.body.stmts, benv)
                nxt = make_binop("+", iv, EConst(CONST_INT, 1), s.span)
                self.emit(SSet(ivar, nxt))
        finally:
            self.dyn_depth -= 1
        cond = make_binop("<", iv, count, s.span)
        ordered = not any(a.name == "unordered" for a in s.attrs)
        self.emit_loop(pre, body, cond, ordered)

    def while_loop(self, s, env: Env) -> None:
        self.check_loop_context(s.span)
        pre = None
        if isinstance(s, ast.While):
            pre = require_bool(self.scalar(self.ev(s.cond, env), s.span), s.span)
        elif s.pre is not None:
            pre = require_bool(self.scalar(self.ev(s.pre, env), s.span), s.span)
        body: list[SStmt] = []
        self.dyn_depth += 1
        try:
            with self.sink(body):
                benv = Env(env)
                self.block(s.body.stmts, benv)
                cond = require_bool(self.scalar(self.ev(s.cond, env), s.span), s.span)
        finally:
            self.dyn_depth -= 1
        ordered = not any(a.name == "unordered" for a in s.attrs)
        self.emit_loop(pre, body, cond, ordered)

    def emit_loop(self, pre, body, cond, ordered) -> None:
        if isinstance(pre, EConst):
            if not pre.value:
                return
            pre = None
        self.emit(SLoop(pre, body, cond, ordered))

    def check_loop_context(self, span: Span) -> None:
        if self.in_wait:
            raise ElabError(span, "loops are not allowed inside a wait_for condition")

    def wait_for(self, s: ast.WaitFor, env: Env) -> None:
        if self.in_wait:
            raise ElabError(s.span, "nested wait_for")
        body: list[SStmt] = []
        self.in_wait = True
        try:
            with self.sink(body):
                wenv = Env(env)
                if s.body is not None:
                    self.block(s.body.stmts, wenv)
                c = require_bool(self.scalar(self.ev(s.cond, wenv), s.span), s.span, "wait_for condition")
        finally:
            self.in_wait = False
        self.emit(SWait(body, c))

    def ret(self, s: ast.Return, env: Env) -> None:
        frame = self.frames[-1] if self.frames else None
        if frame is None:
            raise ElabError(s.span, "return outside a function")
        if self.dyn_depth:
            raise ElabError(s.span, "return inside a conditional, loop or region is not supported")
        v = EConst(VOID, None) if s.value is None else self.ev(s.value, env)
        if frame.ret is not None and not isinstance(frame.ret, VoidT):
            v = self.coerce_value(v, frame.ret, s.span)
        elif frame.ret is not None and s.value is not None:
            raise TypeCheckError(s.span, "void function returns a value")
        if isinstance(v, BFn):
            frame.value = v
        else:
            frame.value = self.materialize(v, "ret") if _impure(v) else v
        frame.returned = True

    # ---- assignment
    def assign(self, s: ast.Assign, env: Env) -> None:
        tgt = s.target
        # shared targets
        if isinstance(tgt, ast.Var):
            b = env.lookup(tgt.name, tgt.span)
            if isinstance(b, BShared):
                return self.shared_assign(b.var, None, s, env)
        if isinstance(tgt, ast.Index) and isinstance(tgt.base, ast.Var):
            b = env.lookup(tgt.base.name, tgt.base.span)
            if isinstance(b, BShared):
                return self.shared_assign(b.var, tgt.index, s, env)
        # thread-local targets
        cur = self.ev(tgt, env) if s.op != "=" else None
        if s.op == "=":
            rhs = self.ev(s.value, env)
        else:
            rhs = self.ev(s.value, env)
            rhs = make_binop(s.op, self.scalar(cur, s.span), self.scalar(rhs, s.span), s.span)
        self.store_local(tgt, rhs, env, s.span)

    def shared_assign(self, var: SharedVar, index_node, s: ast.Assign, env: Env) -> None:
        idx = None
        if index_node is not None:
            if not isinstance(var.type, ArrayT):
                raise TypeCheckError(s.span, f"shared variable '{var.name}' is not an array")
            idx = self.index_expr(self.ev(index_node, env), var.type, s.span)
        elif isinstance(var.type, ArrayT):
            raise TypeCheckError(s.span, f"whole-array assignment to shared '{var.name}' is not supported")
        et = var.elem_type
        if s.op != "=":
            mark = len(self.out)
            cur = ERead(et, var.name, idx, self.new_site(var.name, "read", s.span))
            rhs = self.ev(s.value, env)
            if len(self.out) > mark:
                cur, _ = self._pin_at(cur, mark)
            if idx is not None and _impure(idx) and len(self.out) > mark:
                raise ElabError(s.span, "index of a compound assignment may not depend on a call")
            val = make_binop(s.op, cur, self.scalar(rhs, s.span), s.span)
        else:
            mark = len(self.out)
            val = self.ev(s.value, env)
            if idx is not None and len(self.out) > mark and _impure(idx):
                idx, _ = self._pin_at(idx, mark)
        val = convert(self.scalar(val, s.span), et, s.span)
        self.emit(SWrite(var.name, idx, val, self.new_site(var.name, "write", s.span)))

    def store_local(self, tgt: ast.Expr, v, env: Env, span: Span) -> None:
        if isinstance(tgt, ast.Var):
            b = env.lookup(tgt.name, tgt.span)
            if b is None:
                raise ElabError(span, f"unbound name '{tgt.name}'")
            nb = self.store_binding(b, v, tgt.name, span)
            if nb is not b:
                env.rebind(tgt.name, nb)
            return
        # element of a local aggregate: build the path down to the leaf binding
        path = []
        node = tgt
        while isinstance(node, (ast.Index, ast.Field)):
            path.append(node)
            node = node.base
        if not isinstance(node, ast.Var):
            raise TypeCheckError(span, "invalid assignment target")
        root = env.lookup(node.name, node.span)
        if not isinstance(root, BAgg):
            raise TypeCheckError(span, f"'{node.name}' is not a local array or struct")
        self._store_path(root, list(reversed(path)), v, env, span)

    def _store_path(self, agg: BAgg, path: list, v, env: Env, span: Span) -> None:
        step, rest = path[0], path[1:]
        if isinstance(step, ast.Field):
            if not isinstance(agg.type, TupleT):
                raise TypeCheckError(span, "field access on a non-struct")
            try:
                k = agg.type.field_index(step.name)
            except ValueError:
                raise TypeCheckError(span, f"no field '{step.name}' in {agg.type}") from None
            targets = [(k, None)]
        else:
            if not isinstance(agg.type, ArrayT):
                raise TypeCheckError(span, "indexing a non-array")
            idx = self.scalar(self.ev(step.index, env), span)
            if isinstance(idx, EConst):
                k = int(idx.value)
                if not 0 <= k < agg.type.length:
                    raise ElabError(span, f"constant index {k} out of range for {agg.type}")
                targets = [(k, None)]
            else:
                idx = self.materialize(idx, "idx")
                targets = [(k, make_binop("==", idx, EConst(CONST_INT, k), span)) for k in range(agg.type.length)]
        for k, guard in targets:
            item = agg.items[k]
            if rest:
                if not isinstance(item, BAgg):
                    raise TypeCheckError(span, "too many subscripts")
                if guard is not None:
                    raise ElabError(span, "nested dynamic subscripts in assignment are not supported")
                self._store_path(item, rest, v, env, span)
                continue
            val = v
            if guard is not None:
                cur = self.binding_value(item, "", span)
                val = self.select(guard, self.coerce_value(v, _binding_type(item), span), cur, span)
            agg.items[k] = self.store_binding(item, val, "", span)

    def store_binding(self, b, v, name: str, span: Span):
        """Write value ``v`` into binding ``b``; returns the (possibly new) binding."""
        if isinstance(b, BLocal):
            val = self.coerce_value(v, b.type, span)
            if b.alias:
                nb = BLocal(self.ctx.fresh(b.name), b.type)
                self.emit(SLet(nb.name, b.type, val))
                return nb
            self.emit(SSet(b.name, val))
            return b
        if isinstance(b, BConst):
            if not b.mutable:
                raise TypeCheckError(span, f"cannot assign to constant '{name}'")
            t = b.value.type
            if isinstance(t, ConstIntT):
                t = const_int_type(b.value.value)
            val = self.coerce_value(v, t, span)
            nb = BLocal(self.ctx.fresh(name), t)
            self.emit(SLet(nb.name, t, val))
            return nb
        if isinstance(b, BAgg):
            val = self.coerce_value(v, b.type, span)
            b.items = [self.store_binding(x, y, name, span) for x, y in zip(b.items, val.items)]
            return b
        if isinstance(b, BFn):
            raise TypeCheckError(span, f"cannot assign to function '{name}'")
        raise TypeCheckError(span, f"cannot assign to '{name}'")

    # ---- module
    def run(self, entry: str | None = None) -> ElaboratedProgram:
        env = self.root
        fns: list[ast.FnDecl] = []
        for d in self.module.decls:
            if isinstance(d, ast.VarDecl):
                self.global_decl(d, env)
            elif isinstance(d, ast.FnDecl):
                for a in d.attrs:
                    self.check_attr(a, d)
                env.bind(d.name, BFn(d, env, d.name))
                fns.append(d)
            elif isinstance(d, (ast.Using, ast.StructDecl)):
                self.stmt(d, env)
            else:
                raise ElabError(d.span, f"{type(d).__name__} is not allowed at module level")
        if entry is None:
            cands = [f for f in fns if not f.params and not f.template and not f.has_attr("inline")]
            if not cands:
                raise ElabError(self.module.span, "no entry function (a non-inline function without parameters)")
            entry_decl = cands[-1]
        else:
            matches = [f for f in fns if f.name == entry]
            if not matches:
                raise ElabError(self.module.span, f"entry function '{entry}' not found")
            entry_decl = matches[0]
            if entry_decl.params:
                raise ElabError(entry_decl.span, "entry function must not take parameters")
        name, _ = self.instantiate(BFn(entry_decl, env, entry_decl.name), "normal")
        return ElaboratedProgram(self.shared, self.functions, name, self.sites)


def _scalar(t: SemType) -> bool:
    return isinstance(t, (BoolT, IntT, Float32T))


def _binding_type(b) -> SemType:
    if isinstance(b, (BLocal, BAgg)):
        return b.type
    if isinstance(b, BConst):
        return b.value.type
    raise TypeError(b)


def _flatten_binding(b) -> list:
    if isinstance(b, BLocal):
        return [b]
    out = []
    for x in b.items:
        out += _flatten_binding(x)
    return out


def _const_host(v, span: Span):
    if isinstance(v, Agg):
        return tuple(_const_host(x, span) for x in v.items)
    if isinstance(v, EConst):
        return v.value
    raise ElabError(span, "initializer of shared state must be a compile-time constant")


def _as_module(src) -> ast.Module:
    if isinstance(src, ast.Module):
        return src
    if isinstance(src, TypedModule):
        return src.module
    return parse(src)


def resolve_and_typecheck(module, consts: dict | None = None, entry: str | None = None,
                          ram_threshold: int = 4) -> TypedModule:
    """Resolve names, classify variables as shared or thread-local and check types.

    Generic code is checked at instantiation, so this runs the elaborator and
    keeps the per-expression types and symbol table it records."""
    module = _as_module(module)
    el = Elaborator(module, consts or {}, ram_threshold)
    prog = el.run(entry)
    return TypedModule(module, dict(consts or {}), el.symbols, el.expr_types, prog)


def elaborate(typed, consts: dict | None = None, entry: str | None = None, ram_threshold: int = 4) -> ElaboratedProgram:
    """Elaborate source text, an AST or a ``TypedModule`` under ``consts``."""
    if isinstance(typed, TypedModule) and consts is None and typed.program is not None:
        return typed.program
    module = _as_module(typed)
    if consts is None and isinstance(typed, TypedModule):
        consts = typed.consts
    return Elaborator(module, consts or {}, ram_threshold).run(entry)
