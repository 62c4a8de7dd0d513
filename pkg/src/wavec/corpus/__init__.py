"""Programs pinned in the repository, addressable by variant name."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

DEFAULT_CONSTS = {"N": 512, "SIZE": 32, "THRESHOLD": 8, "L": 8, "T": 3, "K": 16}


@dataclass(frozen=True)
class Variant:
    name: str
    files: tuple[str, ...]
    consts: tuple[str, ...]  # constants the program refers to
    inputs: tuple[str, ...] = ()  # shared variables fed by datasets
    outputs: tuple[str, ...] = field(default=())


VARIANTS = {
    "static": Variant("static", ("static_hist",), ("N", "SIZE", "THRESHOLD", "L"), ("feature", "weight"), ("hist",)),
    "dynamic": Variant("dynamic", ("dynamic_hist",), ("N", "SIZE", "THRESHOLD"), ("feature", "weight"), ("hist",)),
    "replicated": Variant("replicated", ("replicated_hist",), ("N", "SIZE", "THRESHOLD", "L"), ("feature", "weight"),
                          ("hist",)),
    "speculative": Variant("speculative", ("spec_loop", "spec_hist"), ("N", "SIZE", "THRESHOLD"),
                           ("feature", "weight"), ("hist",)),
    "ordering": Variant("ordering", ("ordering",), ("T",), ("x", "y"), ("x", "y")),
    "map_reduce": Variant("map_reduce", ("map_reduce", "map_reduce_main"), ("K",), ("data",), ("result",)),
    "cond_order": Variant("cond_order", ("cond_order",), ("T",), ("cflag",), ("seen", "shared_var")),
    "mutex": Variant("mutex", ("mutex",), ("T",), (), ("counter",)),
}

HISTOGRAMS = ("static", "dynamic", "replicated", "speculative")


def source(name: str) -> str:
    """Source text of a variant (library files first) or of a single corpus file."""
    files = VARIANTS[name].files if name in VARIANTS else (name,)
    return "\n".join(read_file(f) for f in files)


def read_file(stem: str) -> str:
    return resources.files(__name__).joinpath(f"{stem}.wf").read_text()


def default_consts(name: str | None = None) -> dict:
    if name is None or name not in VARIANTS:
        return dict(DEFAULT_CONSTS)
    return {k: DEFAULT_CONSTS[k] for k in VARIANTS[name].consts}
