"""Surface syntax tree produced by the parser.

Every node carries a ``span``. Types appearing in source are kept as
``TypeExpr`` nodes until elaboration resolves them to ``SemType``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import NOWHERE, Span


@dataclass
class Attr:
    name: str  # schedule | thread_rate | unordered | inline | async | batched
    arg: "Expr | None" = None
    span: Span = NOWHERE


@dataclass
class Node:
    span: Span = field(default=NOWHERE, kw_only=True)


# ---- type expressions -------------------------------------------------------


@dataclass
class TypeExpr(Node):
    pass


@dataclass
class NamedType(TypeExpr):
    name: str  # scalar name, template param, alias, struct, or "auto"


@dataclass
class ArrayTypeExpr(TypeExpr):
    elem: TypeExpr
    length: "Expr"


@dataclass
class FnTypeExpr(TypeExpr):
    params: list[TypeExpr]
    ret: TypeExpr


@dataclass
class DecltypeExpr(TypeExpr):
    expr: "Expr"


# ---- expressions -------------------------------------------------------------


@dataclass
class Expr(Node):
    pass


@dataclass
class Literal(Expr):
    value: object  # int | float | bool
    kind: str  # int | float | bool


@dataclass
class Var(Expr):
    name: str


@dataclass
class Index(Expr):
    base: Expr
    index: Expr


@dataclass
class Field(Expr):
    base: Expr
    name: str


@dataclass
class BinOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass
class UnOp(Expr):
    op: str  # - ! ~
    operand: Expr


@dataclass
class Ternary(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass
class Call(Expr):
    callee: Expr
    args: list[Expr]
    type_args: list[TypeExpr] = field(default_factory=list)


@dataclass
class Param(Node):
    type: TypeExpr
    name: str


@dataclass
class Lambda(Expr):
    captures: list[str]
    params: list[Param]
    body: "Block"
    ret: TypeExpr | None = None


@dataclass
class InitList(Expr):
    """``{}``, ``{a, b}`` or ``{.f = a, ...}``; ``names`` empty for positional lists."""

    items: list[Expr]
    names: list[str] = field(default_factory=list)


# ---- statements ---------------------------------------------------------------


@dataclass
class Stmt(Node):
    pass


@dataclass
class Block(Stmt):
    stmts: list[Stmt]
    attrs: list[Attr] = field(default_factory=list)


@dataclass
class VarDecl(Stmt):
    type: TypeExpr
    name: str
    init: Expr | None = None
    is_static: bool = False
    is_const: bool = False


@dataclass
class Assign(Stmt):
    target: Expr
    op: str  # "=" or compound operator such as "+"
    value: Expr


@dataclass
class If(Stmt):
    cond: Expr
    then: Block
    other: Block | None = None


@dataclass
class StaticIf(Stmt):
    cond: Expr
    then: Block
    other: Block | None = None


@dataclass
class For(Stmt):
    """Range loop ``for (const auto v : count)``; the variable runs 0..count-1."""

    var: str
    count: Expr
    body: Block
    attrs: list[Attr] = field(default_factory=list)


@dataclass
class StaticFor(Stmt):
    var: str
    count: Expr
    body: Block


@dataclass
class DoWhile(Stmt):
    """``do {} while (c);`` or the guarded form ``while (pre) do {} while (c);``."""

    body: Block
    cond: Expr
    attrs: list[Attr] = field(default_factory=list)
    pre: Expr | None = None


@dataclass
class While(Stmt):
    cond: Expr
    body: Block
    attrs: list[Attr] = field(default_factory=list)


@dataclass
class ExprStmt(Stmt):
    expr: Expr


@dataclass
class WaitFor(Stmt):
    """``wait_for(c);`` or ``wait_for { prelude } (c);`` where the prelude is
    evaluated together with the condition."""

    cond: Expr
    body: Block | None = None


@dataclass
class Atomic(Stmt):
    body: Block


@dataclass
class Return(Stmt):
    value: Expr | None = None


@dataclass
class Using(Stmt):
    name: str
    type: TypeExpr


@dataclass
class StructDecl(Stmt):
    name: str
    fields: list[Param]


@dataclass
class TemplateParam(Node):
    kind: str  # typename | auto
    name: str


@dataclass
class FnDecl(Stmt):
    name: str
    params: list[Param]
    ret: TypeExpr
    body: Block
    attrs: list[Attr] = field(default_factory=list)
    template: list[TemplateParam] = field(default_factory=list)

    def has_attr(self, name: str) -> bool:
        return any(a.name == name for a in self.attrs)


@dataclass
class Module(Node):
    decls: list[Stmt]
