"""Acceptance criteria. Each test carries a criterion marker; conftest prints one PASS/FAIL line per criterion."""

import json
import time
from pathlib import Path

import pytest

from conftest import build
from helpers import adds_and_depth, ceil_log2, reduce_program, replay, ulp_distance
from progen import tiny_threaded_program
from wavec import corpus
from wavec.checker import check_constraints, check_ordered_loop_exit, check_program_order, check_wavefront_order
from wavec.driver import build_source, gen_data, run
from wavec.frontend import elaborate
from wavec.oracle import enumerate_executions, interpret_sequential_source, interpret_serialized, state_key
from wavec.scheduler import region_occupancy
from wavec.simulator import RandomStall, SimConfig, load_trace, read_csv, simulate

HERE = Path(__file__).parent
FIG = HERE / "fig_ordering.csv"
GOLDEN = HERE / "golden" / "replicated_body_schedule.json"
MUTANTS = sorted((HERE / "data").glob("mut_*.csv"))
XY = {"x": 2, "y": 3}
BENCH_CONSTS = {"N": 512, "SIZE": 32, "THRESHOLD": 8, "L": 8}
CHECKS = (check_program_order, check_wavefront_order, check_constraints, check_ordered_loop_exit)


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def shared_only(b, inp: dict) -> dict:
    names = {s.name for s in b.ir.shared}
    return {k: v for k, v in inp.items() if k in names}


# ---- 1: ordering semantics --------------------------------------------------------------------------


@pytest.mark.criterion(1, "figure-exact ordering semantics")
def test_ordering_figure_trace_and_memberships():
    t0 = time.perf_counter()
    b = build("ordering")
    tr = load_trace(str(FIG))
    for check in CHECKS:
        assert check(tr, b.ir) == [], check.__name__
    assert replay(tr, XY) == {"x": 9, "y": 10}
    states = enumerate_executions(b.elab, XY)
    serial = interpret_serialized(b.elab, XY)
    # T0 (2,3)->(5,4), T1 (5,4)->(9,10), T2 (9,10)->(19,18)
    assert serial == {"x": 19, "y": 18}
    assert state_key({"x": 9, "y": 10}) in states
    assert state_key(serial) in states
    assert time.perf_counter() - t0 < 1.0


# ---- 2: golden schedule -----------------------------------------------------------------------------


@pytest.mark.criterion(2, "replicated body matches the golden five-phase schedule")
def test_replicated_body_golden_schedule():
    t0 = time.perf_counter()
    gold = json.loads(GOLDEN.read_text())
    b = build("replicated", gold["logic_depth"])
    blk = b.ir.function(gold["function"]).blocks[0]
    sc = b.schedule.blocks[blk.id]
    by_id = {o.id: o for o in blk.ops}
    got = [[{"id": i, "kind": by_id[i].kind, **({"op": by_id[i].op} if by_id[i].op else {}),
             **({"var": by_id[i].var} if by_id[i].var else {})} for i in st] for st in sc.stages]
    assert got == gold["stages"]
    assert {str(k): list(v) for k, v in sc.region_spans.items()} == gold["region_spans"]

    def stages_of(pred):
        return sorted({sc.start(o.id) for o in blk.ops if pred(o)})

    assert stages_of(lambda o: o.kind == "read_shared" and o.var in ("feature", "weight")) == [0]
    assert stages_of(lambda o: o.kind == "binop" and o.op == ">") == [1]
    assert stages_of(lambda o: o.kind == "read_shared" and o.var == "hist") == [2]
    assert all(o.pred is not None for o in blk.ops if o.kind in ("read_shared", "write_shared") and o.var == "hist")
    (fadd,) = [o for o in blk.ops if o.kind == "binop" and o.op == "+" and str(o.type) == "float32"]
    assert sc.op_stage[fadd.id] == (3, 9)
    assert stages_of(lambda o: o.kind == "write_shared") == [sc.n_stages - 1]
    assert time.perf_counter() - t0 < 1.0


# ---- 3: latency shape -------------------------------------------------------------------------------


def cycles(variant: str, data: dict) -> int:
    b = build(variant, **BENCH_CONSTS)
    tr, secs = timed(run, b, data)
    assert secs < 10.0
    return tr.cycles


CF = gen_data("conflict-free", 512, 32)
AC = gen_data("all-conflict", 512, 32)
RANDOM = [gen_data("random", 512, 32, seed) for seed in range(5)]


@pytest.mark.criterion(3, "cycle counts at N=512, SIZE=32, THRESHOLD=8, L=8")
def test_static_cycles():
    for data in (CF, AC, *RANDOM):
        assert 4096 <= cycles("static", data) <= 4300


@pytest.mark.criterion(3, "cycle counts at N=512, SIZE=32, THRESHOLD=8, L=8")
def test_dynamic_cycles():
    assert 512 <= cycles("dynamic", CF) <= 800
    ac = cycles("dynamic", AC)
    assert 4096 <= ac <= 7000
    assert ac > cycles("static", AC)


@pytest.mark.criterion(3, "cycle counts at N=512, SIZE=32, THRESHOLD=8, L=8")
def test_replicated_cycles_are_data_independent():
    got = {cycles("replicated", data) for data in RANDOM}
    assert len(got) == 1
    assert 768 <= got.pop() <= 1200


@pytest.mark.criterion(3, "cycle counts at N=512, SIZE=32, THRESHOLD=8, L=8")
def test_speculative_cycles():
    assert 512 <= cycles("speculative", CF) <= 950
    assert cycles("speculative", AC) > cycles("dynamic", AC)


# ---- 4: functional equivalence ----------------------------------------------------------------------


@pytest.mark.criterion(4, "histograms equal the sequential source oracle")
def test_histograms_match_the_sequential_oracle():
    t0 = time.perf_counter()
    n, size = 64, 16
    for floats in (False, True):
        for seed in range(20):
            data = gen_data("random", n, size, seed, float_weights=floats)
            for v in corpus.HISTOGRAMS:
                consts = {**corpus.default_consts(v), "N": n, "SIZE": size, "L": 8}
                want = interpret_sequential_source(corpus.source(v), consts, data)["hist"][:size]
                got = run(build(v, N=n, SIZE=size, L=8), data).final_state["hist"][:size]
                if floats and v == "replicated":
                    assert max(ulp_distance(a, b) for a, b in zip(got, want)) <= 4, (seed, v)
                else:
                    assert [float(x) for x in got] == [float(x) for x in want], (seed, v, floats)
    assert time.perf_counter() - t0 < 30.0


# ---- 5: consistency soundness -----------------------------------------------------------------------


def corpus_inputs(name: str, seed: int) -> dict:
    if name in corpus.HISTOGRAMS:
        c = corpus.default_consts(name)
        return gen_data("random", c["N"], c["SIZE"], seed)
    return {"ordering": XY, "map_reduce": {"data": list(range(16))},
            "cond_order": {"cflag": [False, True, True]}}.get(name, {})


@pytest.mark.criterion(5, "simulator traces pass every check; mutants are rejected")
@pytest.mark.parametrize("name", list(corpus.VARIANTS))
def test_corpus_traces_pass_every_check(name):
    b = build(name)
    for seed in (None, 1, 2, 3, 4, 5):
        cfg = SimConfig(stall=RandomStall(seed, 0.2)) if seed else None
        tr = simulate(b.graph, shared_only(b, corpus_inputs(name, seed or 0)), cfg)
        for check in CHECKS:
            assert check(tr, b.ir) == [], (seed, check.__name__)


@pytest.mark.criterion(5, "simulator traces pass every check; mutants are rejected")
def test_mutated_traces_are_rejected():
    assert len(MUTANTS) >= 12
    ordering_ir = build("ordering").ir
    for path in MUTANTS:
        text = path.read_text()
        head = dict(line[1:].split(":", 1) for line in text.splitlines() if line.startswith("#") and ":" in line)
        head = {k.strip(): v.strip() for k, v in head.items()}
        ir = ordering_ir if head.get("base") == "ordering" else None
        tr = read_csv(text)
        kinds = {d.kind for check in CHECKS for d in check(tr, ir)}
        assert kinds == {head["expect"]}, path.name


# ---- 6: oracle membership ---------------------------------------------------------------------------

INP = {"x": 1, "y": 2, "z": 3}


@pytest.mark.criterion(6, "simulator results are members of the enumerated executions")
def test_tiny_programs_are_members():
    t0 = time.perf_counter()
    for seed in range(50):
        src, threads = tiny_threaded_program(seed)
        assert threads <= 3 and src.count("atomic") <= 1
        b = build_source(src)
        states = enumerate_executions(b.elab, INP)
        assert state_key(run(b, INP).final_state) in states, src
        stalled = simulate(b.graph, INP, SimConfig(stall=RandomStall(seed + 1, 0.3)))
        assert state_key(stalled.final_state) in states, src
    for seed in range(50):
        src, _ = tiny_threaded_program(seed, wrap_atomic=True)
        b = build_source(src)
        assert enumerate_executions(b.elab, INP) == {state_key(run(b, INP).final_state)}, src
    assert time.perf_counter() - t0 < 60.0


# ---- 7: elaboration -----------------------------------------------------------------------------------


@pytest.mark.criterion(7, "reduce tree shape and map_reduce result")
def test_reduce_shape_for_every_small_n():
    for n in range(1, 65):
        adds, depth = adds_and_depth(elaborate(reduce_program(n), {}))
        assert (adds, depth) == (n - 1, ceil_log2(n)), n


@pytest.mark.criterion(7, "reduce tree shape and map_reduce result")
def test_map_reduce_sum_of_squares():
    want = interpret_sequential_source(corpus.source("map_reduce"), {"K": 16}, {"data": list(range(16))})["result"]
    assert want == sum(i * i for i in range(16)) == 1240
    b = build("map_reduce")
    assert run(b, {"data": list(range(16))}).final_state["result"] == want


# ---- 8: constraint mechanics ------------------------------------------------------------------------


@pytest.mark.criterion(8, "atomic gap, thread_rate spacing, schedule(8) occupancy")
def test_static_atomic_entry_gap_is_l():
    tr = run(build("static"), gen_data("random", 512, 32, seed=3))
    enters = [e.c for e in tr.events if e.k == "region-enter"]
    assert len(enters) == 512
    assert {b - a for a, b in zip(enters, enters[1:])} == {8}


@pytest.mark.criterion(8, "atomic gap, thread_rate spacing, schedule(8) occupancy")
def test_thread_rate_spacing():
    for data in (CF, AC):
        tr = run(build("static"), data)
        body = [e.c for e in tr.events if e.k == "fn-enter" and e.var == "body"]
        assert len(body) == 512 and min(b - a for a, b in zip(body, body[1:])) >= 8


@pytest.mark.criterion(8, "atomic gap, thread_rate spacing, schedule(8) occupancy")
def test_schedule_8_occupancy_is_bounded():
    b = build("replicated")
    blk = b.ir.function("replicated_count_if_lambda0").blocks[0]
    (r,) = blk.regions
    assert r.n == 8
    for data in (AC, RANDOM[0]):
        tr = run(b, data)
        occ = peak = 0
        for e in sorted((e for e in tr.events if e.k in ("region-enter", "region-exit")),
                        key=lambda e: (e.c, e.k == "region-enter")):
            occ += 1 if e.k == "region-enter" else -1
            peak = max(peak, occ)
        assert 1 < peak <= 8
    assert region_occupancy(b.schedule.blocks[blk.id], r) <= 8


# ---- 9: resources -------------------------------------------------------------------------------------


@pytest.mark.criterion(9, "resource report ordering")
def test_resource_ordering():
    res = {v: build(v).resources for v in corpus.HISTOGRAMS}
    assert res["replicated"].ram_bits >= 2 * res["static"].ram_bits

    def regs(v):
        return res[v].pipeline_register_bits + res[v].fifo_bits

    assert regs("dynamic") > regs("static")
    assert regs("speculative") > regs("static")
