import json
from pathlib import Path

import pytest

from conftest import build
from wavec import corpus
from wavec.config import BuildConfig
from wavec.driver import build_source
from wavec.errors import ScheduleInfeasible
from wavec.scheduler import (
    LatencyTable, ScheduleConstraintSet, effective_ii, region_occupancy, schedule_program, storage_map, validate_schedule,
)

GOLDEN = Path(__file__).parent / "golden" / "replicated_body_schedule.json"


def body_schedule(name: str, fn: str, depth: int = 6):
    b = build(name, depth)
    blk = b.ir.function(fn).blocks[0]
    return blk, b.schedule.blocks[blk.id]


def test_replicated_body_matches_golden_schedule():
    gold = json.loads(GOLDEN.read_text())
    blk, sc = body_schedule("replicated", gold["function"], gold["logic_depth"])
    assert blk.id == gold["block"]
    by_id = {o.id: o for o in blk.ops}
    got = [[{"id": i, "kind": by_id[i].kind, **({"op": by_id[i].op} if by_id[i].op else {}),
             **({"var": by_id[i].var} if by_id[i].var else {})} for i in st] for st in sc.stages]
    assert got == gold["stages"]
    assert {str(k): list(v) for k, v in sc.region_spans.items()} == gold["region_spans"]


def test_replicated_body_has_the_five_phase_structure():
    """Reads, then compare/offset, then predicated RAM read, an fadd span, and the predicated write."""
    blk, sc = body_schedule("replicated", "replicated_count_if_lambda0")
    by_id = {o.id: o for o in blk.ops}

    def stage_of(pred):
        return sorted({sc.start(o.id) for o in blk.ops if pred(o)})

    assert stage_of(lambda o: o.kind == "read_shared" and o.var in ("feature", "weight")) == [0]
    assert stage_of(lambda o: o.kind == "binop" and o.op == ">") == [1]
    hist_read = stage_of(lambda o: o.kind == "read_shared" and o.var == "hist")
    assert hist_read == [2]
    fadd = [o for o in blk.ops if o.kind == "binop" and o.op == "+" and str(o.type) == "float32"]
    assert len(fadd) == 1 and sc.op_stage[fadd[0].id] == (3, 3 + LatencyTable().fadd_latency)
    write = [o for o in blk.ops if o.kind == "write_shared"]
    assert [sc.start(o.id) for o in write] == [sc.n_stages - 1]
    assert all(by_id[o.id].pred is not None for o in write)
    # the region opens where the hist read samples memory, one RAM latency after issue
    assert sc.region_spans[blk.regions[0].id] == (2 + LatencyTable().ram_read_latency, sc.n_stages - 1)


@pytest.mark.parametrize("name", list(corpus.VARIANTS))
def test_every_block_schedule_validates(name):
    b = build(name)
    for _, blk in b.ir.all_blocks():
        sc = b.schedule.blocks[blk.id]
        diags = validate_schedule(blk, sc, b.schedule.constraints[blk.id], b.schedule.latencies,
                                  storage_map(b.ir))
        assert diags == [], [str(d) for d in diags]


@pytest.mark.parametrize("name", list(corpus.VARIANTS))
def test_stage_count_is_monotone_in_logic_depth(name):
    counts = [build(name, d).resources.stage_count for d in (1, 2, 3, 4, 6, 8, 12)]
    assert counts == sorted(counts, reverse=True)


def test_depth_sweep_changes_stage_counts():
    assert build("replicated", 1).resources.stage_count > build("replicated", 12).resources.stage_count
    assert build("map_reduce", 3).resources.stage_count > build("map_reduce", 12).resources.stage_count


def test_static_atomic_region_spans_the_read_modify_write():
    """The region runs from the cycle the hist read samples RAM to the write; thread_rate(L) pads entries to L."""
    blk, sc = body_schedule("static", "body")
    (r,) = blk.regions
    assert r.n == 1
    lt = LatencyTable()
    assert region_occupancy(sc, r) == lt.fadd_latency + 1 == 7
    assert effective_ii(sc, r) == 7
    assert build("static").schedule.constraints[blk.id].thread_rate == 8


def test_replicated_region_occupancy_fits_its_bound():
    blk, sc = body_schedule("replicated", "replicated_count_if_lambda0")
    (r,) = blk.regions
    assert r.n == 8 and effective_ii(sc, r) == 1


def test_speculative_commit_region_is_compacted():
    b = build("speculative")
    spans = [region_occupancy(b.schedule.blocks[blk.id], r) for _, blk in b.ir.all_blocks() for r in blk.regions]
    # the commit reads and writes hist in consecutive thread cycles, so a retry-free stream runs at II 1
    assert max(spans) == 1


def test_latency_override_shortens_the_fadd_span():
    short = build_source(corpus.source("replicated"), BuildConfig(consts=corpus.default_consts("replicated"),
                                                                  latency={"fadd": 2}))
    blk = short.ir.function("replicated_count_if_lambda0").blocks[0]
    assert short.schedule.blocks[blk.id].n_stages == 6


def test_unknown_latency_entry_is_rejected():
    with pytest.raises(ValueError):
        LatencyTable().override("fsqrt", 3)


def test_depth_must_be_positive():
    with pytest.raises(ValueError):
        ScheduleConstraintSet(depth=0)


def test_dependent_reads_in_one_atomic_region_are_infeasible():
    """N=1 regions read in a single stage, but the second RAM read needs the first one's value."""
    src = """uint32[8] t; uint32[8] u; uint32 out;
void main() { pipelined_for(4, [](uint32 i) { atomic { uint32 a = t[i]; uint32 b = u[a]; out = b; } }); }"""
    with pytest.raises(ScheduleInfeasible):
        build_source(src)


def test_schedule_json_is_versioned():
    b = build("ordering")
    assert b.schedule.to_json()["schema"] == 1
    assert schedule_program(b.ir).to_json() == b.schedule.to_json()
