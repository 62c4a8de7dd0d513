"""Semantic types and compile-time values."""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np


class SemType:
    """Base class; concrete types are frozen dataclasses so they hash and compare by value."""

    def bits(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class BoolT(SemType):
    def bits(self) -> int:
        return 1

    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class IntT(SemType):
    width: int
    signed: bool

    def __post_init__(self):
        if not 1 <= self.width <= 64:
            raise ValueError(f"integer width {self.width} outside 1..64")

    def bits(self) -> int:
        return self.width

    def __str__(self) -> str:
        return f"{'int' if self.signed else 'uint'}{self.width}"

    @property
    def lo(self) -> int:
        return -(1 << (self.width - 1)) if self.signed else 0

    @property
    def hi(self) -> int:
        return (1 << (self.width - 1)) - 1 if self.signed else (1 << self.width) - 1


@dataclass(frozen=True)
class Float32T(SemType):
    def bits(self) -> int:
        return 32

    def __str__(self) -> str:
        return "float32"


@dataclass(frozen=True)
class ArrayT(SemType):
    elem: SemType
    length: int

    def bits(self) -> int:
        return self.elem.bits() * self.length

    def __str__(self) -> str:
        return f"{self.elem}[{self.length}]"


@dataclass(frozen=True)
class TupleT(SemType):
    """Struct-like aggregate; ``names`` may be empty for positional tuples."""

    elems: tuple[SemType, ...]
    names: tuple[str, ...] = ()
    tag: str = ""

    def bits(self) -> int:
        return sum(e.bits() for e in self.elems)

    def field_index(self, name: str) -> int:
        return self.names.index(name)

    def __str__(self) -> str:
        if self.tag:
            return self.tag
        return "(" + ", ".join(str(e) for e in self.elems) + ")"


@dataclass(frozen=True)
class FnT(SemType):
    params: tuple[SemType, ...]
    ret: SemType | None

    def bits(self) -> int:
        return 0


@dataclass(frozen=True)
class VoidT(SemType):
    def bits(self) -> int:
        return 0

    def __str__(self) -> str:
        return "void"


@dataclass(frozen=True)
class ConstIntT(SemType):
    """Type of an untyped integer constant; adopts the width of its context."""

    def bits(self) -> int:
        return 64

    def __str__(self) -> str:
        return "const-int"


BOOL = BoolT()
FLOAT32 = Float32T()
VOID = VoidT()
CONST_INT = ConstIntT()
UINT32 = IntT(32, False)
INT32 = IntT(32, True)

_INT_RE = re.compile(r"^(u?)int(\d+)$")


def scalar_type_named(name: str) -> SemType | None:
    if name == "bool":
        return BOOL
    if name == "float32":
        return FLOAT32
    if name == "void":
        return VOID
    m = _INT_RE.match(name)
    if m and 1 <= int(m.group(2)) <= 64:
        return IntT(int(m.group(2)), m.group(1) == "")
    return None


def is_int(t: SemType) -> bool:
    return isinstance(t, (IntT, ConstIntT))


def wrap_int(value: int, t: IntT) -> int:
    """Two's-complement wrap of ``value`` into ``t``."""
    mask = (1 << t.width) - 1
    v = int(value) & mask
    if t.signed and v >> (t.width - 1):
        v -= 1 << t.width
    return v


def to_f32(x) -> np.float32:
    return np.float32(x)


def f32_bits(x) -> int:
    return struct.unpack("<I", struct.pack("<f", float(np.float32(x))))[0]


def zero_value(t: SemType):
    """Default (zero) initializer of a type, as a plain Python value."""
    if isinstance(t, BoolT):
        return False
    if isinstance(t, (IntT, ConstIntT)):
        return 0
    if isinstance(t, Float32T):
        return np.float32(0.0)
    if isinstance(t, ArrayT):
        return tuple(zero_value(t.elem) for _ in range(t.length))
    if isinstance(t, TupleT):
        return tuple(zero_value(e) for e in t.elems)
    raise ValueError(f"no zero value for {t}")


def coerce(value, t: SemType):
    """Convert a host value to the canonical representation of ``t``."""
    if isinstance(t, BoolT):
        return bool(value)
    if isinstance(t, IntT):
        return wrap_int(int(value), t)
    if isinstance(t, ConstIntT):
        return int(value)
    if isinstance(t, Float32T):
        return np.float32(value)
    if isinstance(t, ArrayT):
        vals = list(value)
        if len(vals) != t.length:
            raise ValueError(f"expected {t.length} elements for {t}, got {len(vals)}")
        return tuple(coerce(v, t.elem) for v in vals)
    if isinstance(t, TupleT):
        return tuple(coerce(v, e) for v, e in zip(value, t.elems))
    raise ValueError(f"cannot coerce to {t}")


def type_to_json(t: SemType):
    if isinstance(t, ArrayT):
        return {"array": type_to_json(t.elem), "length": t.length}
    if isinstance(t, TupleT):
        return {"tuple": [type_to_json(e) for e in t.elems], "names": list(t.names), "tag": t.tag}
    return str(t)


def value_to_json(v):
    if isinstance(v, tuple):
        return [value_to_json(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    return int(v)


@dataclass(frozen=True)
class ConstValue:
    """Tagged compile-time value."""

    value: object
    type: SemType = field(default=CONST_INT)
