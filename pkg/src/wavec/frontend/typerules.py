"""Typing rules: promotion, implicit conversion and constant folding helpers."""

from __future__ import annotations

from ..errors import TypeCheckError
from ..semantics import cast_value, eval_binop, eval_unop
from .elaborated import EBin, ECast, EConst, EExpr, ESelect, EUn
from .lexer import Span
from .types import (
    BOOL, CONST_INT, FLOAT32, INT32, UINT32, ArrayT, BoolT, ConstIntT, Float32T, IntT, SemType, TupleT, wrap_int,
)

ARITH = {"+", "-", "*", "/", "%"}
BITWISE = {"&", "|", "^"}
SHIFTS = {"<<", ">>"}
COMPARE = {"<", ">", "<=", ">=", "==", "!="}
LOGIC = {"&&", "||"}


def const_int_type(v: int) -> IntT:
    """Type chosen when an untyped integer constant must become concrete."""
    return UINT32 if v >= 0 else INT32


def promote(lt: SemType, rt: SemType, op: str, span: Span) -> SemType:
    """Common operand type of a binary arithmetic/comparison operator."""
    if isinstance(lt, ConstIntT) and isinstance(rt, ConstIntT):
        return CONST_INT
    if isinstance(lt, Float32T) or isinstance(rt, Float32T):
        other = rt if isinstance(lt, Float32T) else lt
        if isinstance(other, (Float32T, ConstIntT)):
            return FLOAT32
        raise TypeCheckError(span, f"operator {op} mixes float32 and {other}; an explicit cast is required")
    if isinstance(lt, BoolT) and isinstance(rt, BoolT):
        return BOOL
    if isinstance(lt, BoolT) or isinstance(rt, BoolT):
        raise TypeCheckError(span, f"operator {op} mixes bool and {rt if isinstance(lt, BoolT) else lt}")
    if isinstance(lt, ConstIntT):
        return rt
    if isinstance(rt, ConstIntT):
        return lt
    if isinstance(lt, IntT) and isinstance(rt, IntT):
        if lt.width != rt.width:
            return lt if lt.width > rt.width else rt
        return lt if lt.signed == rt.signed else IntT(lt.width, False)
    raise TypeCheckError(span, f"operator {op} is not defined on {lt} and {rt}")


def convert(e: EExpr, t: SemType, span: Span, explicit: bool = False) -> EExpr:
    """Implicit (or explicit, for casts) scalar conversion of ``e`` to ``t``."""
    src = e.type
    if src == t:
        return e
    if isinstance(src, ConstIntT) and isinstance(e, EConst):
        if isinstance(t, IntT):
            return EConst(t, wrap_int(e.value, t))
        if isinstance(t, Float32T):
            return EConst(t, cast_value(e.value, FLOAT32))
        if isinstance(t, BoolT) and explicit:
            return EConst(t, bool(e.value))
        raise TypeCheckError(span, f"cannot use integer constant as {t}")
    ok = False
    if isinstance(src, IntT) and isinstance(t, IntT):
        ok = True
    elif explicit and isinstance(src, (IntT, Float32T, BoolT, ConstIntT)) and isinstance(t, (IntT, Float32T, BoolT)):
        ok = True
    if not ok:
        raise TypeCheckError(span, f"cannot convert {src} to {t} without a cast")
    if isinstance(e, EConst):
        return EConst(t, cast_value(e.value, t))
    return ECast(t, e)


def make_binop(op: str, lhs: EExpr, rhs: EExpr, span: Span) -> EExpr:
    """Type-check and (when both sides are constant) fold a binary operation."""
    if op in LOGIC:
        if not (isinstance(lhs.type, BoolT) and isinstance(rhs.type, BoolT)):
            raise TypeCheckError(span, f"operator {op} requires bool operands, got {lhs.type} and {rhs.type}")
        res_t, opnd_t = BOOL, BOOL
    elif op == "eqbits":
        if lhs.type != rhs.type and not (isinstance(lhs.type, ConstIntT) or isinstance(rhs.type, ConstIntT)):
            raise TypeCheckError(span, f"eq() requires operands of one type, got {lhs.type} and {rhs.type}")
        opnd_t = promote(lhs.type, rhs.type, op, span)
        res_t = BOOL
    elif op in SHIFTS:
        if not all(isinstance(x.type, (IntT, ConstIntT)) for x in (lhs, rhs)):
            raise TypeCheckError(span, f"operator {op} requires integer operands")
        if isinstance(lhs.type, ConstIntT) and not isinstance(rhs.type, ConstIntT):
            lhs = convert(lhs, const_int_type(lhs.value), span)
        res_t = lhs.type
        if isinstance(rhs.type, ConstIntT):
            rhs = EConst(UINT32 if not isinstance(res_t, ConstIntT) else CONST_INT, rhs.value)
        opnd_t = None
    else:
        opnd_t = promote(lhs.type, rhs.type, op, span)
        if op in COMPARE:
            res_t = BOOL
        elif op in BITWISE:
            if isinstance(opnd_t, Float32T):
                raise TypeCheckError(span, f"operator {op} is not defined on float32")
            res_t = opnd_t
        elif op in ARITH:
            if isinstance(opnd_t, BoolT):
                raise TypeCheckError(span, f"operator {op} is not defined on bool")
            if op == "%" and isinstance(opnd_t, Float32T):
                raise TypeCheckError(span, "operator % is not defined on float32")
            res_t = opnd_t
        else:
            raise TypeCheckError(span, f"unknown operator {op}")
    if opnd_t is not None and not isinstance(opnd_t, ConstIntT):
        lhs = convert(lhs, opnd_t, span)
        rhs = convert(rhs, opnd_t, span)
    if isinstance(lhs, EConst) and isinstance(rhs, EConst):
        return EConst(res_t, eval_binop(op, lhs.value, rhs.value, res_t))
    return EBin(res_t, op, lhs, rhs)


def make_unop(op: str, e: EExpr, span: Span) -> EExpr:
    t = e.type
    if op == "!":
        if not isinstance(t, BoolT):
            raise TypeCheckError(span, f"operator ! requires bool, got {t}")
    elif op == "-":
        if not isinstance(t, (IntT, ConstIntT, Float32T)):
            raise TypeCheckError(span, f"unary - is not defined on {t}")
    elif op == "~":
        if not isinstance(t, (IntT, ConstIntT, BoolT)):
            raise TypeCheckError(span, f"operator ~ is not defined on {t}")
    if isinstance(e, EConst):
        return EConst(t, eval_unop(op, e.value, t))
    return EUn(t, op, e)


def make_select(c: EExpr, a: EExpr, b: EExpr, span: Span) -> EExpr:
    if not isinstance(c.type, BoolT):
        raise TypeCheckError(span, f"condition must be bool, got {c.type}")
    t = promote(a.type, b.type, "?:", span)
    if isinstance(t, ConstIntT):
        if isinstance(c, EConst):
            return a if c.value else b
        t = const_int_type(min(a.value, b.value))
    a, b = convert(a, t, span), convert(b, t, span)
    if isinstance(c, EConst):
        return a if c.value else b
    return ESelect(t, c, a, b)


def require_bool(e: EExpr, span: Span, what: str = "condition") -> EExpr:
    if not isinstance(e.type, BoolT):
        raise TypeCheckError(span, f"{what} must be bool, got {e.type}")
    return e


def assignable(src: SemType, dst: SemType) -> bool:
    if src == dst:
        return True
    if isinstance(dst, ArrayT) and isinstance(src, ArrayT):
        return src.length == dst.length and assignable(src.elem, dst.elem)
    if isinstance(dst, TupleT) and isinstance(src, TupleT):
        return len(src.elems) == len(dst.elems) and all(assignable(a, b) for a, b in zip(src.elems, dst.elems))
    if isinstance(dst, IntT):
        return isinstance(src, (IntT, ConstIntT))
    if isinstance(dst, Float32T):
        return isinstance(src, ConstIntT)
    return False
