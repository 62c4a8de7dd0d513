"""Monomorphic program produced by elaboration.

All compile-time control is gone: no static-for, static-if, lambdas or
generic functions remain. Local aggregates are scalarized, every shared
access carries a unique static site id, and every call names a concrete
function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import NOWHERE, Span
from .types import SemType, type_to_json, value_to_json


@dataclass
class SharedVar:
    name: str
    type: SemType
    init: object  # canonical host value (scalar or tuple)
    storage: str = "scalar"  # scalar | ram

    @property
    def elem_type(self) -> SemType:
        return getattr(self.type, "elem", self.type)

    @property
    def length(self) -> int | None:
        return getattr(self.type, "length", None)


@dataclass(frozen=True)
class SiteInfo:
    site: int
    var: str
    kind: str  # read | write
    function: str
    span: Span = NOWHERE


# ---- expressions -------------------------------------------------------------


@dataclass
class EExpr:
    type: SemType


@dataclass
class EConst(EExpr):
    value: object


@dataclass
class ELocal(EExpr):
    name: str


@dataclass
class ERead(EExpr):
    var: str
    index: EExpr | None
    site: int


@dataclass
class EBin(EExpr):
    op: str  # C operators plus "eqbits" for bitwise equality
    lhs: EExpr
    rhs: EExpr


@dataclass
class EUn(EExpr):
    op: str
    operand: EExpr


@dataclass
class ESelect(EExpr):
    cond: EExpr
    then: EExpr
    other: EExpr


@dataclass
class ECast(EExpr):
    operand: EExpr


# ---- statements ---------------------------------------------------------------


@dataclass
class SStmt:
    pass


@dataclass
class SLet(SStmt):
    name: str
    type: SemType
    init: EExpr


@dataclass
class SSet(SStmt):
    name: str
    value: EExpr


@dataclass
class SWrite(SStmt):
    var: str
    index: EExpr | None
    value: EExpr
    site: int


@dataclass
class SIf(SStmt):
    cond: EExpr
    then: list[SStmt]
    other: list[SStmt] = field(default_factory=list)


@dataclass
class SLoop(SStmt):
    """Sequential loop. ``pre_cond`` (if any) is tested before the first
    iteration; ``cond`` is tested after each iteration."""

    pre_cond: EExpr | None
    body: list[SStmt]
    cond: EExpr
    ordered: bool = True


@dataclass
class SRegion(SStmt):
    n: int
    body: list[SStmt]
    atomic: bool = False


@dataclass
class SWait(SStmt):
    """``wait_for``: ``body`` then ``cond`` are evaluated atomically for the
    head thread; side effects of ``body`` only take effect when ``cond`` holds."""

    body: list[SStmt]
    cond: EExpr


@dataclass
class SBatched(SStmt):
    fn: str
    count: EExpr
    args: list[EExpr]
    call_site: int


@dataclass
class SPipelinedDo(SStmt):
    fn: str
    args: list[EExpr]
    call_site: int


@dataclass
class SCall(SStmt):
    fn: str
    args: list[EExpr]
    dest: str | None
    call_site: int


@dataclass
class SAsync(SStmt):
    fn: str
    args: list[EExpr]
    call_site: int


@dataclass
class SReturn(SStmt):
    value: EExpr | None = None


@dataclass
class EFunction:
    name: str
    params: list[tuple[str, SemType]]
    ret: SemType
    body: list[SStmt]
    kind: str = "normal"  # normal | batched | async
    thread_rate: int | None = None


@dataclass
class ElaboratedProgram:
    shared: list[SharedVar]
    functions: list[EFunction]
    entry: str
    sites: list[SiteInfo] = field(default_factory=list)

    def function(self, name: str) -> EFunction:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def shared_var(self, name: str) -> SharedVar:
        for v in self.shared:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "entry": self.entry,
            "shared": [
                {"name": v.name, "type": type_to_json(v.type), "storage": v.storage, "init": value_to_json(v.init)}
                for v in self.shared
            ],
            "functions": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "thread_rate": f.thread_rate,
                    "params": [[n, type_to_json(t)] for n, t in f.params],
                    "ret": type_to_json(f.ret),
                    "body": [stmt_to_json(s) for s in f.body],
                }
                for f in self.functions
            ],
            "sites": [{"site": s.site, "var": s.var, "kind": s.kind, "function": s.function} for s in self.sites],
        }


def expr_to_json(e: EExpr):
    t = str(e.type)
    if isinstance(e, EConst):
        return {"const": value_to_json(e.value), "type": t}
    if isinstance(e, ELocal):
        return {"local": e.name, "type": t}
    if isinstance(e, ERead):
        return {"read": e.var, "site": e.site, "index": None if e.index is None else expr_to_json(e.index), "type": t}
    if isinstance(e, EBin):
        return {"op": e.op, "args": [expr_to_json(e.lhs), expr_to_json(e.rhs)], "type": t}
    if isinstance(e, EUn):
        return {"op": e.op, "args": [expr_to_json(e.operand)], "type": t}
    if isinstance(e, ESelect):
        return {"op": "?:", "args": [expr_to_json(e.cond), expr_to_json(e.then), expr_to_json(e.other)], "type": t}
    if isinstance(e, ECast):
        return {"cast": t, "args": [expr_to_json(e.operand)]}
    raise TypeError(e)


def stmt_to_json(s: SStmt):
    j = lambda x: None if x is None else expr_to_json(x)  # noqa: E731
    body = lambda ss: [stmt_to_json(x) for x in ss]  # noqa: E731
    if isinstance(s, SLet):
        return {"let": s.name, "type": str(s.type), "init": j(s.init)}
    if isinstance(s, SSet):
        return {"set": s.name, "value": j(s.value)}
    if isinstance(s, SWrite):
        return {"write": s.var, "site": s.site, "index": j(s.index), "value": j(s.value)}
    if isinstance(s, SIf):
        return {"if": j(s.cond), "then": body(s.then), "else": body(s.other)}
    if isinstance(s, SLoop):
        return {"loop": j(s.cond), "pre": j(s.pre_cond), "ordered": s.ordered, "body": body(s.body)}
    if isinstance(s, SRegion):
        return {"region": s.n, "atomic": s.atomic, "body": body(s.body)}
    if isinstance(s, SWait):
        return {"wait_for": j(s.cond), "body": body(s.body)}
    if isinstance(s, SBatched):
        return {"batched": s.fn, "count": j(s.count), "args": [j(a) for a in s.args], "call_site": s.call_site}
    if isinstance(s, SPipelinedDo):
        return {"pipelined_do": s.fn, "args": [j(a) for a in s.args], "call_site": s.call_site}
    if isinstance(s, SCall):
        return {"call": s.fn, "args": [j(a) for a in s.args], "dest": s.dest, "call_site": s.call_site}
    if isinstance(s, SAsync):
        return {"async": s.fn, "args": [j(a) for a in s.args], "call_site": s.call_site}
    if isinstance(s, SReturn):
        return {"return": j(s.value)}
    raise TypeError(s)


def walk_stmts(stmts: list[SStmt]):
    """Pre-order traversal over nested statement lists."""
    for s in stmts:
        yield s
        if isinstance(s, SIf):
            yield from walk_stmts(s.then)
            yield from walk_stmts(s.other)
        elif isinstance(s, (SLoop, SRegion, SWait)):
            yield from walk_stmts(s.body)


def walk_expr(e: EExpr):
    yield e
    if isinstance(e, ERead) and e.index is not None:
        yield from walk_expr(e.index)
    elif isinstance(e, EBin):
        yield from walk_expr(e.lhs)
        yield from walk_expr(e.rhs)
    elif isinstance(e, EUn):
        yield from walk_expr(e.operand)
    elif isinstance(e, ESelect):
        yield from walk_expr(e.cond)
        yield from walk_expr(e.then)
        yield from walk_expr(e.other)
    elif isinstance(e, ECast):
        yield from walk_expr(e.operand)


def stmt_exprs(s: SStmt) -> list[EExpr]:
    """Expressions directly owned by a statement (not nested statement bodies)."""
    if isinstance(s, (SLet,)):
        return [s.init]
    if isinstance(s, SSet):
        return [s.value]
    if isinstance(s, SWrite):
        return ([s.index] if s.index is not None else []) + [s.value]
    if isinstance(s, SIf):
        return [s.cond]
    if isinstance(s, SLoop):
        return ([s.pre_cond] if s.pre_cond is not None else []) + [s.cond]
    if isinstance(s, SWait):
        return [s.cond]
    if isinstance(s, SBatched):
        return [s.count, *s.args]
    if isinstance(s, (SPipelinedDo, SCall, SAsync)):
        return list(s.args)
    if isinstance(s, SReturn):
        return [s.value] if s.value is not None else []
    return []
