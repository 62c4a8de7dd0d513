"""Render an ``ElaboratedProgram`` back to source text.

The output is itself a valid program; elaborating it again (with the same
entry) reproduces the input program, which is how idempotence is tested.
"""

from __future__ import annotations

import numpy as np

from .elaborated import (
    EBin, ECast, EConst, EExpr, ELocal, ERead, ElaboratedProgram, ESelect, EUn, SAsync, SBatched, SCall, SIf,
    SLet, SLoop, SPipelinedDo, SRegion, SReturn, SSet, SStmt, SWait, SWrite,
)
from .types import BoolT, Float32T, VoidT


def _const(e: EConst) -> str:
    if isinstance(e.type, BoolT):
        return "true" if e.value else "false"
    if isinstance(e.type, Float32T):
        f = float(np.float32(e.value))
        text = repr(f)
        if "e" not in text and "." not in text:
            text += ".0"
        return text if f >= 0 else f"-{text[1:]}"
    return f"{e.type}({int(e.value)})"


def expr(e: EExpr) -> str:
    if isinstance(e, EConst):
        return _const(e)
    if isinstance(e, ELocal):
        return e.name
    if isinstance(e, ERead):
        return e.var if e.index is None else f"{e.var}[{expr(e.index)}]"
    if isinstance(e, EBin):
        if e.op == "eqbits":
            return f"eq({expr(e.lhs)}, {expr(e.rhs)})"
        return f"({expr(e.lhs)} {e.op} {expr(e.rhs)})"
    if isinstance(e, EUn):
        return f"({e.op}{expr(e.operand)})"
    if isinstance(e, ESelect):
        return f"({expr(e.cond)} ? {expr(e.then)} : {expr(e.other)})"
    if isinstance(e, ECast):
        return f"{e.type}({expr(e.operand)})"
    raise TypeError(e)


def _init_text(v) -> str:
    if isinstance(v, tuple):
        return "{" + ", ".join(_init_text(x) for x in v) + "}"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _const(EConst(Float32T(), v))
    return str(int(v))


def stmts(ss: list[SStmt], ind: int, types: dict) -> list[str]:
    pad = "  " * ind
    out = []
    for s in ss:
        if isinstance(s, SLet):
            out.append(f"{pad}{s.type} {s.name} = {expr(s.init)};")
        elif isinstance(s, SSet):
            out.append(f"{pad}{s.name} = {expr(s.value)};")
        elif isinstance(s, SWrite):
            tgt = s.var if s.index is None else f"{s.var}[{expr(s.index)}]"
            out.append(f"{pad}{tgt} = {expr(s.value)};")
        elif isinstance(s, SIf):
            out.append(f"{pad}if ({expr(s.cond)}) {{")
            out += stmts(s.then, ind + 1, types)
            if s.other:
                out.append(f"{pad}}} else {{")
                out += stmts(s.other, ind + 1, types)
            out.append(f"{pad}}}")
        elif isinstance(s, SLoop):
            attr = "" if s.ordered else "[[unordered]] "
            head = "do {" if s.pre_cond is None else f"while ({expr(s.pre_cond)}) do {{"
            out.append(f"{pad}{attr}{head}")
            out += stmts(s.body, ind + 1, types)
            out.append(f"{pad}}} while ({expr(s.cond)});")
        elif isinstance(s, SRegion):
            out.append(f"{pad}{'atomic' if s.atomic else f'[[schedule({s.n})]]'} {{")
            out += stmts(s.body, ind + 1, types)
            out.append(f"{pad}}}")
        elif isinstance(s, SWait):
            if s.body:
                out.append(f"{pad}wait_for {{")
                out += stmts(s.body, ind + 1, types)
                out.append(f"{pad}}} ({expr(s.cond)});")
            else:
                out.append(f"{pad}wait_for({expr(s.cond)});")
        elif isinstance(s, SBatched):
            args = ", ".join([expr(s.count), s.fn] + [expr(a) for a in s.args])
            out.append(f"{pad}pipelined_for({args});")
        elif isinstance(s, SPipelinedDo):
            args = ", ".join([s.fn] + [expr(a) for a in s.args])
            out.append(f"{pad}pipelined_do<{types[s.fn]}>({args});")
        elif isinstance(s, SCall):
            call = f"{s.fn}({', '.join(expr(a) for a in s.args)})"
            out.append(f"{pad}{call};" if s.dest is None else f"{pad}{types[('ret', s.fn)]} {s.dest} = {call};")
        elif isinstance(s, SAsync):
            out.append(f"{pad}{s.fn}({', '.join(expr(a) for a in s.args)});")
        elif isinstance(s, SReturn):
            out.append(f"{pad}return;" if s.value is None else f"{pad}return {expr(s.value)};")
        else:
            raise TypeError(s)
    return out


def pretty(prog: ElaboratedProgram) -> str:
    types: dict = {}
    for f in prog.functions:
        types[f.name] = f.params[0][1] if f.params else None
        types[("ret", f.name)] = f.ret
    lines = []
    for v in prog.shared:
        init = v.init
        text = _init_text(init)
        lines.append(f"{v.type} {v.name} = {text};")
    for f in prog.functions:
        quals = []
        if f.thread_rate is not None:
            quals.append(f"[[thread_rate({f.thread_rate})]]")
        if f.kind == "async":
            quals.append("async")
        params = ", ".join(f"{t} {n}" for n, t in f.params)
        ret = "void" if isinstance(f.ret, VoidT) else str(f.ret)
        lines.append("")
        lines.append(" ".join(quals + [f"{ret} {f.name}({params}) {{"]))
        body = f.body
        lines += stmts(body, 1, types)
        lines.append("}")
    return "\n".join(lines) + "\n"
