"""End-to-end pipelines: source -> IR -> schedules -> graph -> simulation -> report."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from . import corpus
from .checker import check_all
from .config import BuildConfig
from .frontend.elaborate import elaborate
from .frontend.elaborated import ElaboratedProgram
from .ir import IrProgram, lower_program
from .lowering import PipelineGraph, ResourceReport, compute_resource_report
from .lowering import lower_program as lower_graph
from .scheduler import ProgramSchedule, schedule_program
from .simulator import SimConfig, Trace, simulate


@dataclass
class Build:
    name: str
    source: str
    consts: dict
    elab: ElaboratedProgram
    ir: IrProgram
    schedule: ProgramSchedule
    graph: PipelineGraph
    resources: ResourceReport
    timings: dict = field(default_factory=dict)

    @property
    def lines_of_code(self) -> int:
        return sum(1 for line in self.source.splitlines() if line.strip() and not line.strip().startswith("//"))


def build_source(source: str, cfg: BuildConfig | None = None, name: str = "program") -> Build:
    cfg = cfg or BuildConfig()
    t = {}
    t0 = time.perf_counter()
    elab = elaborate(source, cfg.consts)
    t["frontend"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ir = lower_program(elab)
    t["ir"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    sched = schedule_program(ir, cfg.logic_depth, cfg.latency_table())
    t["schedule"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    g = lower_graph(ir, sched, cfg.fifo_config())
    res = compute_resource_report(g)
    t["lowering"] = time.perf_counter() - t0
    return Build(name, source, dict(cfg.consts), elab, ir, sched, g, res, t)


def build_variant(name: str, cfg: BuildConfig | None = None) -> Build:
    """Build a corpus variant; constants missing from ``cfg`` take their defaults."""
    cfg = cfg or BuildConfig()
    consts = {**corpus.default_consts(name), **cfg.consts}
    return build_source(corpus.source(name), _with_consts(cfg, consts), name)


def _with_consts(cfg: BuildConfig, consts: dict) -> BuildConfig:
    d = cfg.to_json()
    del d["schema"]
    d["consts"] = consts
    return BuildConfig(**d)


def run(b: Build, inputs: dict | None = None, cfg: BuildConfig | None = None) -> Trace:
    cfg = cfg or BuildConfig()
    names = {v.name for v in b.ir.shared}
    inp = {k: v for k, v in (inputs or {}).items() if k in names}
    return simulate(b.graph, inp, SimConfig(max_cycles=cfg.max_cycles, stall=cfg.stall_policy()))


# ---- datasets -----------------------------------------------------------------------------------

DATASET_KINDS = ("conflict-free", "all-conflict", "random")


def gen_data(kind: str, n: int = 512, size: int = 32, seed: int = 0, float_weights: bool = False) -> dict:
    """Histogram inputs. Weights are small integers (as float32) unless ``float_weights``.

    conflict-free: consecutive items hit distinct buckets (feature = i mod SIZE);
    all-conflict: every item hits the last bucket; random: uniform buckets.
    """
    rng = random.Random(seed)
    if kind == "conflict-free":
        feature = [i % size for i in range(n)]
    elif kind == "all-conflict":
        feature = [size - 1] * n
    elif kind == "random":
        feature = [rng.randrange(size) for _ in range(n)]
    else:
        raise ValueError(f"dataset kind must be one of {DATASET_KINDS}")
    if float_weights:
        weight = [rng.uniform(0.0, 4.0) for _ in range(n)]
    elif kind == "random":
        weight = [float(rng.randrange(1, 9)) for _ in range(n)]
    else:
        weight = [float(i % 5 + 1) for i in range(n)]
    return {"feature": feature, "weight": weight}


# ---- bench --------------------------------------------------------------------------------------


@dataclass
class BenchRow:
    variant: str
    cycles: dict  # dataset name -> cycles
    resources: ResourceReport
    check_ok: bool
    lines_of_code: int

    @property
    def best(self) -> int:
        return min(self.cycles.values())

    @property
    def worst(self) -> int:
        return max(self.cycles.values())

    def to_json(self) -> dict:
        r = self.resources
        return {"variant": self.variant, "cycles": self.cycles, "cycles_best": self.best, "cycles_worst": self.worst,
                "ram_bits": r.ram_bits, "register_bits": r.pipeline_register_bits, "fifo_bits": r.fifo_bits,
                "stage_count": r.stage_count, "check_ok": self.check_ok, "lines_of_code": self.lines_of_code,
                "resources": r.to_json()}


def bench(variants, datasets: dict[str, dict], cfg: BuildConfig | None = None, check: bool = True) -> list[BenchRow]:
    cfg = cfg or BuildConfig()
    rows = []
    for v in variants:
        b = build_variant(v, cfg)
        cycles, ok = {}, True
        for dn, data in datasets.items():
            tr = run(b, data, cfg)
            cycles[dn] = tr.cycles
            if check:
                ok = ok and not check_all(tr, b.ir)
        rows.append(BenchRow(v, cycles, b.resources, ok, b.lines_of_code))
    return rows


def bench_table(rows: list[BenchRow]) -> str:
    names = list(rows[0].cycles) if rows else []
    head = ["variant", *names, "best", "worst", "ram-bits", "reg-bits", "fifo-bits", "stages", "check"]
    body = []
    for r in rows:
        x = r.resources
        body.append([r.variant, *(str(r.cycles[n]) for n in names), str(r.best), str(r.worst), str(x.ram_bits),
                     str(x.pipeline_register_bits), str(x.fifo_bits), str(x.stage_count),
                     "ok" if r.check_ok else "FAIL"])
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"
