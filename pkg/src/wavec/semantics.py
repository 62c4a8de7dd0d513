"""Operator semantics shared by constant folding, interpreters and the simulator.

Operands are assumed to already be canonical values of the operand type:
ints wrapped to their width, floats as ``np.float32``, bools as ``bool``.
"""

from __future__ import annotations

import numpy as np

from .frontend.types import BoolT, ConstIntT, Float32T, IntT, SemType, f32_bits, wrap_int

COMPARISONS = {"<", ">", "<=", ">=", "==", "!=", "eqbits"}
LOGICAL = {"&&", "||"}


def _int_div(a: int, b: int) -> int:
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _int_mod(a: int, b: int) -> int:
    if b == 0:
        return 0
    return a - b * _int_div(a, b)


def _finish(value, t: SemType):
    if isinstance(t, IntT):
        return wrap_int(value, t)
    if isinstance(t, Float32T):
        return np.float32(value)
    if isinstance(t, BoolT):
        return bool(value)
    return value


def eval_binop(op: str, a, b, result_type: SemType, operand_type: SemType | None = None):
    if op == "eqbits":
        if isinstance(a, (np.floating, float)) or isinstance(b, (np.floating, float)):
            return f32_bits(a) == f32_bits(b)
        return a == b
    if op in COMPARISONS:
        return bool({
            "<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b, "==": a == b, "!=": a != b,
        }[op])
    if op == "&&":
        return bool(a) and bool(b)
    if op == "||":
        return bool(a) or bool(b)
    if isinstance(result_type, Float32T):
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
        raise ValueError(f"operator {op} undefined on float32")
    if isinstance(result_type, BoolT):
        if op == "&":
            return bool(a) and bool(b)
        if op == "|":
            return bool(a) or bool(b)
        if op == "^":
            return bool(a) != bool(b)
        raise ValueError(f"operator {op} undefined on bool")
    a, b = int(a), int(b)
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        r = _int_div(a, b)
    elif op == "%":
        r = _int_mod(a, b)
    elif op == "&":
        r = a & b
    elif op == "|":
        r = a | b
    elif op == "^":
        r = a ^ b
    elif op == "<<":
        r = a << b if 0 <= b < 128 else 0
    elif op == ">>":
        if b < 0:
            r = 0
        else:
            # arithmetic for signed operands, logical otherwise (values are canonical)
            r = a >> min(b, 127)
    else:
        raise ValueError(f"unknown operator {op}")
    if isinstance(result_type, ConstIntT):
        return r
    return _finish(r, result_type)


def eval_unop(op: str, a, result_type: SemType):
    if op == "!":
        return not bool(a)
    if op == "-":
        if isinstance(result_type, Float32T):
            return np.float32(-np.float32(a))
        return _finish(-int(a), result_type) if not isinstance(result_type, ConstIntT) else -int(a)
    if op == "~":
        if isinstance(result_type, BoolT):
            return not bool(a)
        return _finish(~int(a), result_type) if not isinstance(result_type, ConstIntT) else ~int(a)
    raise ValueError(f"unknown unary operator {op}")


def cast_value(v, to: SemType):
    """Explicit conversion between scalar types."""
    if isinstance(to, Float32T):
        return np.float32(v)
    if isinstance(to, BoolT):
        return bool(v)
    if isinstance(to, IntT):
        if isinstance(v, (np.floating, float)):
            f = float(v)
            if f != f or f in (float("inf"), float("-inf")):
                return 0
            return wrap_int(int(f), to)
        return wrap_int(int(v), to)
    if isinstance(to, ConstIntT):
        return int(v)
    raise ValueError(f"cannot cast to {to}")
