"""Exception hierarchy shared by all compiler phases."""

from __future__ import annotations


class WavecError(Exception):
    """Base class for every diagnostic raised by the toolchain."""


class LexError(WavecError):
    def __init__(self, position: tuple[int, int], character: str):
        self.position = position
        self.character = character
        super().__init__(f"{position[0]}:{position[1]}: unexpected character {character!r}")


class ParseError(WavecError):
    def __init__(self, span, expected: set[str] | list[str], found: str = ""):
        self.span = span
        self.expected = sorted(set(expected))
        self.found = found
        super().__init__(f"{span}: expected one of {self.expected}, found {found!r}")


class TypeCheckError(WavecError):
    """Semantic type error; named to avoid shadowing the builtin TypeError."""

    def __init__(self, span, msg: str):
        self.span = span
        super().__init__(f"{span}: {msg}")


class SharedCaptureError(TypeCheckError):
    pass


class ElabError(WavecError):
    def __init__(self, span, msg: str):
        self.span = span
        super().__init__(f"{span}: {msg}")


class IfConvertError(WavecError):
    pass


class ScheduleInfeasible(WavecError):
    def __init__(self, block: str, first: str, second: str):
        self.block = block
        self.pair = (first, second)
        super().__init__(f"{block}: conflicting constraints {first} / {second}")


class SimError(WavecError):
    exit_code = 1


class SimDeadlock(SimError):
    exit_code = 2

    def __init__(self, cycle: int, blocked: list[str]):
        self.cycle = cycle
        self.blocked = blocked
        super().__init__(f"deadlock at cycle {cycle}: blocked nodes {blocked}")


class SimWriteConflict(SimError):
    exit_code = 3

    def __init__(self, cycle: int, var: str, index=None):
        self.cycle = cycle
        self.var = var
        self.index = index
        where = var if index is None else f"{var}[{index}]"
        super().__init__(f"write conflict on {where} at cycle {cycle}")


class MaxCyclesExceeded(SimError):
    exit_code = 4

    def __init__(self, cycles: int):
        self.cycles = cycles
        super().__init__(f"simulation did not quiesce within {cycles} cycles")


class BoundsExceeded(WavecError):
    pass
