"""Recursive-descent parser producing ``ast.Module``."""

from __future__ import annotations

from . import ast
from .lexer import Span, Token, tokenize
from .types import scalar_type_named
from ..errors import ParseError

ASSIGN_OPS = {
    "eq": "=", "plus_eq": "+", "minus_eq": "-", "star_eq": "*", "slash_eq": "/",
    "percent_eq": "%", "amp_eq": "&", "pipe_eq": "|", "caret_eq": "^",
    "shl_eq": "<<", "shr_eq": ">>",
}

# (token kinds, operator spelling) from loosest to tightest binding
BINARY_LEVELS = [
    {"or_or": "||"},
    {"and_and": "&&"},
    {"pipe": "|"},
    {"caret": "^"},
    {"amp": "&"},
    {"eq_eq": "==", "ne": "!="},
    {"lt": "<", "gt": ">", "le": "<=", "ge": ">="},
    {"shl": "<<", "shr": ">>"},
    {"plus": "+", "minus": "-"},
    {"star": "*", "slash": "/", "percent": "%"},
]

FN_QUALIFIERS = {"kw_inline": "inline", "kw_async": "async", "kw_batched": "batched"}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        self.type_names: set[str] = {"auto"}

    # ---- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, *kinds: str) -> bool:
        return self.tok.kind in kinds

    def eat(self, kind: str) -> Token | None:
        if self.tok.kind == kind:
            t = self.tok
            self.pos += 1
            return t
        return None

    def expect(self, *kinds: str) -> Token:
        if self.tok.kind in kinds:
            t = self.tok
            self.pos += 1
            return t
        raise ParseError(self.tok.span, set(kinds), self.tok.text or self.tok.kind)

    def is_type_name(self, tok: Token) -> bool:
        if tok.kind == "kw_auto" or tok.kind == "kw_void":
            return True
        return tok.kind == "ident" and (tok.text in self.type_names or scalar_type_named(tok.text) is not None)

    # ---- module
    def parse_module(self) -> ast.Module:
        start = self.tok.span
        decls = []
        while not self.at("eof"):
            decls.append(self.statement(top_level=True))
        return ast.Module(decls, span=start)

    # ---- types
    def starts_type(self) -> bool:
        t = self.tok
        if t.kind == "kw_decltype" or t.kind == "lparen":
            return t.kind == "kw_decltype" or self._looks_like_fn_type()
        return self.is_type_name(t)

    def _looks_like_fn_type(self) -> bool:
        # "(" types ")" "->"
        depth, k = 0, 0
        while True:
            t = self.peek(k)
            if t.kind == "eof":
                return False
            if t.kind == "lparen":
                depth += 1
            elif t.kind == "rparen":
                depth -= 1
                if depth == 0:
                    return self.peek(k + 1).kind == "arrow"
            k += 1

    def type_expr(self) -> ast.TypeExpr:
        span = self.tok.span
        if self.eat("kw_decltype"):
            self.expect("lparen")
            e = self.expr()
            self.expect("rparen")
            base: ast.TypeExpr = ast.DecltypeExpr(e, span=span)
        elif self.at("lparen"):
            self.expect("lparen")
            params = []
            if not self.at("rparen"):
                params.append(self.type_expr())
                while self.eat("comma"):
                    params.append(self.type_expr())
            self.expect("rparen")
            self.expect("arrow")
            base = ast.FnTypeExpr(params, self.type_expr(), span=span)
        else:
            t = self.expect("ident", "kw_auto", "kw_void")
            base = ast.NamedType(t.text, span=span)
        while self.at("lbracket"):
            self.expect("lbracket")
            length = self.expr()
            self.expect("rbracket")
            base = ast.ArrayTypeExpr(base, length, span=span)
        return base

    # ---- attributes
    def attrs(self) -> list[ast.Attr]:
        out = []
        while self.at("attr_open"):
            self.expect("attr_open")
            while True:
                t = self.expect("ident")
                arg = None
                if self.eat("lparen"):
                    arg = self.expr()
                    self.expect("rparen")
                out.append(ast.Attr(t.text, arg, span=t.span))
                if not self.eat("comma"):
                    break
            self.expect("attr_close")
        return out

    # ---- statements
    def block(self) -> ast.Block:
        span = self.expect("lbrace").span
        stmts = []
        while not self.at("rbrace"):
            stmts.append(self.statement())
        self.expect("rbrace")
        return ast.Block(stmts, span=span)

    def body_stmt(self) -> ast.Block:
        if self.at("lbrace"):
            return self.block()
        s = self.statement()
        return ast.Block([s], span=s.span)

    def statement(self, top_level: bool = False) -> ast.Stmt:
        span = self.tok.span
        attrs = self.attrs()
        template: list[ast.TemplateParam] = []
        if self.at("kw_template"):
            template = self.template_header()
        quals = []
        while self.tok.kind in FN_QUALIFIERS:
            quals.append(ast.Attr(FN_QUALIFIERS[self.tok.kind], span=self.tok.span))
            self.pos += 1
        if template or quals:
            fn = self.fn_decl(attrs + quals, template, span)
            return fn

        k = self.tok.kind
        if k == "lbrace":
            b = self.block()
            b.attrs = attrs
            return b
        if k == "kw_atomic":
            self.pos += 1
            return ast.Atomic(self.block(), span=span)
        if k == "kw_if":
            return self.if_stmt(span)
        if k == "kw_for":
            return self.for_stmt(span, attrs)
        if k == "kw_do":
            self.pos += 1
            body = self.block()
            self.expect("kw_while")
            self.expect("lparen")
            cond = self.expr()
            self.expect("rparen")
            self.expect("semi")
            return ast.DoWhile(body, cond, attrs, span=span)
        if k == "kw_while":
            self.pos += 1
            self.expect("lparen")
            cond = self.expr()
            self.expect("rparen")
            if self.eat("kw_do"):
                body = self.block()
                self.expect("kw_while")
                self.expect("lparen")
                post = self.expr()
                self.expect("rparen")
                self.expect("semi")
                return ast.DoWhile(body, post, attrs, cond, span=span)
            return ast.While(cond, self.body_stmt(), attrs, span=span)
        if k == "kw_return":
            self.pos += 1
            value = None if self.at("semi") else self.expr()
            self.expect("semi")
            return ast.Return(value, span=span)
        if k == "kw_wait_for":
            self.pos += 1
            if self.at("lbrace"):
                pre = self.block()
                self.expect("lparen")
                cond = self.expr()
                self.expect("rparen")
                self.expect("semi")
                return ast.WaitFor(cond, pre, span=span)
            self.expect("lparen")
            cond = self.expr()
            self.expect("rparen")
            self.expect("semi")
            return ast.WaitFor(cond, span=span)
        if k == "kw_static":
            nk = self.peek().kind
            if nk == "kw_for":
                self.pos += 1
                return self.for_stmt(span, attrs, static=True)
            if nk == "kw_if":
                self.pos += 1
                return self.if_stmt(span, static=True)
            self.pos += 1
            d = self.var_decl(span)
            d.is_static = True
            return d
        if k == "kw_using":
            self.pos += 1
            name = self.expect("ident").text
            self.expect("eq")
            t = self.type_expr()
            self.expect("semi")
            self.type_names.add(name)
            return ast.Using(name, t, span=span)
        if k == "kw_struct":
            self.pos += 1
            name = self.expect("ident").text
            self.type_names.add(name)
            self.expect("lbrace")
            fields = []
            while not self.at("rbrace"):
                ft = self.type_expr()
                fname = self.expect("ident").text
                self.expect("semi")
                fields.append(ast.Param(ft, fname, span=ft.span))
            self.expect("rbrace")
            self.expect("semi")
            return ast.StructDecl(name, fields, span=span)
        if k == "kw_const":
            self.pos += 1
            d = self.var_decl(span)
            d.is_const = True
            return d
        if self.starts_type() and self._is_declaration():
            if self._is_fn_decl():
                return self.fn_decl(attrs, template, span)
            return self.var_decl(span)
        if attrs:
            raise ParseError(span, {"lbrace", "kw_for", "kw_do", "kw_while", "fn-decl"}, self.tok.text)
        return self.simple_stmt(span)

    def _is_declaration(self) -> bool:
        # type followed by identifier (possibly after array suffixes)
        save = self.pos
        try:
            self.type_expr()
            return self.at("ident")
        except ParseError:
            return False
        finally:
            self.pos = save

    def _is_fn_decl(self) -> bool:
        save = self.pos
        try:
            self.type_expr()
            self.expect("ident")
            return self.at("lparen")
        finally:
            self.pos = save

    def template_header(self) -> list[ast.TemplateParam]:
        self.expect("kw_template")
        self.expect("lt")
        out = []
        while True:
            t = self.expect("kw_typename", "kw_auto")
            name = self.expect("ident")
            kind = "typename" if t.kind == "kw_typename" else "auto"
            if kind == "typename":
                self.type_names.add(name.text)
            out.append(ast.TemplateParam(kind, name.text, span=t.span))
            if not self.eat("comma"):
                break
        self.expect("gt")
        return out

    def fn_decl(self, attrs, template, span) -> ast.FnDecl:
        ret = self.type_expr()
        name = self.expect("ident").text
        params = self.param_list()
        body = self.block()
        return ast.FnDecl(name, params, ret, body, attrs, template, span=span)

    def param_list(self) -> list[ast.Param]:
        self.expect("lparen")
        params = []
        if not self.at("rparen"):
            while True:
                self.eat("kw_const")
                t = self.type_expr()
                n = self.expect("ident")
                params.append(ast.Param(t, n.text, span=n.span))
                if not self.eat("comma"):
                    break
        self.expect("rparen")
        return params

    def var_decl(self, span) -> ast.VarDecl:
        t = self.type_expr()
        name = self.expect("ident").text
        init = None
        if self.eat("eq"):
            init = self.expr()
        self.expect("semi")
        return ast.VarDecl(t, name, init, span=span)

    def if_stmt(self, span, static: bool = False) -> ast.Stmt:
        self.expect("kw_if")
        self.expect("lparen")
        cond = self.expr()
        self.expect("rparen")
        then = self.body_stmt()
        other = None
        if self.eat("kw_else"):
            if self.at("kw_if"):
                inner = self.if_stmt(self.tok.span, static=False)
                other = ast.Block([inner], span=inner.span)
            elif self.at("kw_static") and self.peek().kind == "kw_if":
                sp = self.tok.span
                self.pos += 1
                inner = self.if_stmt(sp, static=True)
                other = ast.Block([inner], span=inner.span)
            else:
                other = self.body_stmt()
        cls = ast.StaticIf if static else ast.If
        return cls(cond, then, other, span=span)

    def for_stmt(self, span, attrs, static: bool = False) -> ast.Stmt:
        self.expect("kw_for")
        self.expect("lparen")
        self.eat("kw_const")
        if not self.eat("kw_auto"):
            self.type_expr()
        var = self.expect("ident").text
        self.expect("colon")
        count = self.expr()
        self.expect("rparen")
        body = self.body_stmt()
        if static:
            return ast.StaticFor(var, count, body, span=span)
        return ast.For(var, count, body, attrs, span=span)

    def simple_stmt(self, span) -> ast.Stmt:
        e = self.expr()
        if self.tok.kind in ASSIGN_OPS:
            op = ASSIGN_OPS[self.tok.kind]
            self.pos += 1
            value = self.expr()
            self.expect("semi")
            return ast.Assign(e, op, value, span=span)
        if self.at("incr", "decr"):
            op = "+" if self.tok.kind == "incr" else "-"
            self.pos += 1
            self.expect("semi")
            return ast.Assign(e, op, ast.Literal(1, "int", span=span), span=span)
        self.expect("semi")
        return ast.ExprStmt(e, span=span)

    # ---- expressions
    def expr(self) -> ast.Expr:
        cond = self.binary(0)
        if self.at("question"):
            span = self.tok.span
            self.pos += 1
            a = self.expr()
            self.expect("colon")
            b = self.expr()
            return ast.Ternary(cond, a, b, span=span)
        return cond

    def binary(self, level: int) -> ast.Expr:
        if level == len(BINARY_LEVELS):
            return self.unary()
        lhs = self.binary(level + 1)
        ops = BINARY_LEVELS[level]
        while self.tok.kind in ops:
            t = self.tok
            self.pos += 1
            rhs = self.binary(level + 1)
            lhs = ast.BinOp(ops[t.kind], lhs, rhs, span=t.span)
        return lhs

    def unary(self) -> ast.Expr:
        t = self.tok
        if t.kind in ("minus", "bang", "tilde"):
            self.pos += 1
            return ast.UnOp(t.text, self.unary(), span=t.span)
        if t.kind == "plus":
            self.pos += 1
            return self.unary()
        return self.postfix()

    def _template_args_ahead(self) -> bool:
        # name "<" type ("," type)* ">" "("
        if not self.at("lt"):
            return False
        save = self.pos
        try:
            self.pos += 1
            if not self.starts_type():
                return False
            self.type_expr()
            while self.eat("comma"):
                self.type_expr()
            return self.eat("gt") is not None and self.at("lparen")
        except ParseError:
            return False
        finally:
            self.pos = save

    def postfix(self) -> ast.Expr:
        e = self.primary()
        while True:
            t = self.tok
            if t.kind == "lparen" or (isinstance(e, ast.Var) and self._template_args_ahead()):
                type_args = []
                if self.eat("lt"):
                    type_args.append(self.type_expr())
                    while self.eat("comma"):
                        type_args.append(self.type_expr())
                    self.expect("gt")
                self.expect("lparen")
                args = []
                if not self.at("rparen"):
                    args.append(self.expr())
                    while self.eat("comma"):
                        args.append(self.expr())
                self.expect("rparen")
                e = ast.Call(e, args, type_args, span=t.span)
            elif t.kind == "lbracket":
                self.pos += 1
                idx = self.expr()
                self.expect("rbracket")
                e = ast.Index(e, idx, span=t.span)
            elif t.kind == "dot":
                self.pos += 1
                e = ast.Field(e, self.expect("ident").text, span=t.span)
            else:
                return e

    def primary(self) -> ast.Expr:
        t = self.tok
        k = t.kind
        if k == "int":
            self.pos += 1
            return ast.Literal(t.value, "int", span=t.span)
        if k == "float":
            self.pos += 1
            return ast.Literal(t.value, "float", span=t.span)
        if k in ("kw_true", "kw_false"):
            self.pos += 1
            return ast.Literal(k == "kw_true", "bool", span=t.span)
        if k == "ident":
            self.pos += 1
            return ast.Var(t.text, span=t.span)
        if k == "lparen":
            self.pos += 1
            e = self.expr()
            self.expect("rparen")
            return e
        if k == "lbracket":
            return self.lambda_expr()
        if k == "lbrace":
            return self.init_list()
        raise ParseError(t.span, {"int", "float", "ident", "lparen", "lbracket", "lbrace"}, t.text or k)

    def lambda_expr(self) -> ast.Lambda:
        span = self.expect("lbracket").span
        caps = []
        if not self.at("rbracket"):
            caps.append(self.expect("ident").text)
            while self.eat("comma"):
                caps.append(self.expect("ident").text)
        self.expect("rbracket")
        params = self.param_list()
        ret = None
        if self.eat("arrow"):
            ret = self.type_expr()
        body = self.block()
        return ast.Lambda(caps, params, body, ret, span=span)

    def init_list(self) -> ast.InitList:
        span = self.expect("lbrace").span
        items, names = [], []
        while not self.at("rbrace"):
            if self.at("dot"):
                self.pos += 1
                names.append(self.expect("ident").text)
                self.expect("eq")
            items.append(self.expr())
            if not self.eat("comma"):
                break
        self.expect("rbrace")
        if names and len(names) != len(items):
            raise ParseError(span, {"designator"}, "mixed initializer")
        return ast.InitList(items, names, span=span)


def parse(tokens: list[Token] | str) -> ast.Module:
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    return Parser(tokens).parse_module()
