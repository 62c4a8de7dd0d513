"""Build and run configuration. Precedence: command line > config file > defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .lowering import FifoConfig
from .scheduler import LatencyTable
from .simulator import NoStall, RandomStall, ScriptedStall, StallPolicy

STALL_KINDS = ("none", "random", "scripted")


@dataclass
class BuildConfig:
    logic_depth: int = 6
    latency: dict = field(default_factory=dict)  # op class -> cycles
    fifo_capacity: int = 2
    consts: dict = field(default_factory=dict)
    seed: int = 0
    stall: str = "none"
    stall_p: float = 0.1
    stall_script: list = field(default_factory=list)  # [cycle, node] or [cycle, node, stage]
    max_cycles: int = 200_000

    def __post_init__(self):
        if self.stall not in STALL_KINDS:
            raise ValueError(f"stall policy must be one of {STALL_KINDS}, got '{self.stall}'")
        if self.logic_depth < 1:
            raise ValueError("logic depth must be positive")
        if self.fifo_capacity < 1:
            raise ValueError("fifo capacity must be positive")
        self.latency_table()  # validates op names

    def latency_table(self) -> LatencyTable:
        lt = LatencyTable()
        for k, v in self.latency.items():
            lt.override(k, v)
        return lt

    def fifo_config(self) -> FifoConfig:
        return FifoConfig(self.fifo_capacity)

    def stall_policy(self) -> StallPolicy:
        if self.stall == "random":
            return RandomStall(self.seed, self.stall_p)
        if self.stall == "scripted":
            return ScriptedStall(self.stall_script)
        return NoStall()

    def to_json(self) -> dict:
        return {"schema": 1, **asdict(self)}

    @staticmethod
    def from_json(d: dict) -> "BuildConfig":
        known = {f.name for f in fields(BuildConfig)}
        unknown = set(d) - known - {"schema"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return BuildConfig(**{k: v for k, v in d.items() if k in known})


def merge_config(file_values: dict | None, overrides: dict | None) -> BuildConfig:
    """Defaults, then file values, then explicit overrides (``None`` means "not given").

    Dict-valued entries merge key by key so ``--const L=4`` keeps the file's other constants.
    """
    base = BuildConfig().to_json()
    del base["schema"]
    for layer in (file_values or {}, overrides or {}):
        for k, v in layer.items():
            if k == "schema" or v is None:
                continue
            if k not in base:
                raise ValueError(f"unknown config key '{k}'")
            if isinstance(base[k], dict) and isinstance(v, dict):
                base[k] = {**base[k], **v}
            else:
                base[k] = v
    return BuildConfig.from_json(base)


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
