import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import build
from progen import single_thread_program
from wavec import corpus
from wavec.driver import build_source, run
from wavec.frontend import elaborate
from wavec.ir import build_cfg, lower_program, verify_ir
from wavec.ir.model import TERMINATORS
from wavec.oracle import interpret_serialized, state_key


@pytest.mark.parametrize("name", list(corpus.VARIANTS))
def test_corpus_ir_verifies(name):
    b = build(name)
    assert verify_ir(b.ir) == []
    for _, blk in b.ir.all_blocks():
        assert blk.ops and blk.ops[-1].kind in TERMINATORS
        assert all(o.kind not in TERMINATORS for o in blk.ops[:-1])


def test_if_conversion_leaves_no_branches_inside_pipelined_bodies():
    b = build("replicated")
    body = b.ir.function("replicated_count_if_lambda0")
    assert len(body.blocks) == 1
    preds = [o for o in body.blocks[0].ops if o.kind in ("read_shared", "write_shared") and o.var == "hist"]
    assert preds and all(o.pred is not None for o in preds)


def test_wait_for_gets_its_own_block():
    b = build("dynamic")
    kinds = [blk.kind for _, blk in b.ir.all_blocks()]
    assert "wait" in kinds


def test_loops_are_recorded_with_ordered_flag():
    b = build("replicated")
    loops = [lp for f in b.ir.functions for lp in f.loops]
    assert len(loops) == 1 and loops[0].ordered


def test_site_order_follows_source_order():
    e = elaborate(corpus.source("ordering"), {"T": 3})
    ir = lower_program(e)
    assert ir.site_order == sorted(ir.site_order)
    kinds = [(s.var, s.kind) for s in e.sites]
    assert kinds == [("x", "read"), ("y", "read"), ("x", "write"), ("y", "write")]


def test_cfg_before_conversion_keeps_structured_statements():
    ir = build_cfg(elaborate(corpus.source("cond_order"), {"T": 3}))
    assert any(blk.stmts for _, blk in ir.all_blocks())


def test_ir_json_is_versioned():
    assert build("ordering").ir.to_json()["schema"] == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_if_conversion_and_optimization_are_sound(seed):
    """Single-threaded: predicated, optimized IR executed by the simulator equals the reference interpreter."""
    src = single_thread_program(seed)
    b = build_source(src)
    rng = random.Random(seed)
    inp = {"a": rng.randrange(64), "b": rng.randrange(64), "c": rng.randrange(2**32),
           "arr": [rng.randrange(16) for _ in range(4)]}
    assert state_key(run(b, inp).final_state) == state_key(interpret_serialized(b.elab, inp))


def test_boolean_result_flags_fold_into_their_condition():
    """`bool r = false; if (c) { r = true; } if (!r) {...}` needs no select or double negation."""
    b = build_source("uint32 x; uint32 y; bool z; void main() { bool r = false; "
                     "if (x > y) { r = true; x = 1; } if (!r) { z = true; } }")
    (blk,) = [blk for _, blk in b.ir.all_blocks()]
    assert not [o for o in blk.ops if o.kind == "select"]
    by_id = {o.id: o for o in blk.ops}
    assert not [o for o in blk.ops if o.kind == "unop" and by_id[o.operands[0]].kind == "unop"]
    for x, y in ((1, 2), (3, 2)):
        assert run(b, {"x": x, "y": y}).final_state == interpret_serialized(b.elab, {"x": x, "y": y})

