import json

import pytest

from conftest import build
from wavec import corpus
from wavec.lowering import FIFO_ROLES, NODE_KINDS, FifoConfig, lower_program
from wavec.scheduler import schedule_program


@pytest.mark.parametrize("name", list(corpus.VARIANTS))
def test_graph_is_well_formed(name):
    g = build(name).graph
    ids = [n.id for n in g.nodes]
    assert len(ids) == len(set(ids))
    known = set(ids)
    assert all(a in known and b in known for a, b in g.edges)
    assert g.entry in known
    for n in g.nodes:
        assert n.kind in NODE_KINDS
        if n.kind == "fifo":
            assert n.params["role"] in FIFO_ROLES
            assert n.params["capacity"] >= 1


def test_every_block_becomes_one_pipeline():
    b = build("speculative")
    pipes = {n.id for n in b.graph.nodes if n.kind in ("stage-pipeline", "wait-evaluator")}
    assert pipes == {f"BB{blk.id}" for _, blk in b.ir.all_blocks()}
    for _, blk in b.ir.all_blocks():
        assert b.graph.node(f"BB{blk.id}").params["stages"] == b.schedule.blocks[blk.id].n_stages


def test_batched_call_has_dispatch_and_collect():
    g = build("static").graph
    assert g.by_kind("dispatch-fsm") and g.by_kind("collect-fsm")
    assert g.by_kind("region-guard") and g.by_kind("rate-limiter")


def test_wait_for_lowers_to_an_evaluator():
    g = build("dynamic").graph
    assert len(g.by_kind("wait-evaluator")) == 1
    roles = {n.params["role"] for n in g.by_kind("fifo")}
    assert "wait-context" in roles


def test_ordered_loop_gets_arbiter_and_reorder_buffer():
    g = build("replicated").graph
    assert len(g.by_kind("loop-arbiter")) == 1
    (rob,) = g.by_kind("reorder-buffer")
    assert rob.params["ordered"]


def test_fifo_capacity_is_configurable():
    b = build("dynamic")
    g = lower_program(b.ir, schedule_program(b.ir), FifoConfig(capacity=5))
    caps = {n.params["capacity"] for n in g.by_kind("fifo") if n.params["role"] in ("argument", "context")}
    assert caps == {5}


def test_graph_json_and_dot():
    g = build("ordering").graph
    j = g.to_json()
    assert j["schema"] == 1
    assert json.loads(json.dumps(j)) == j
    dot = g.to_dot()
    assert dot.startswith("digraph") and g.entry in dot


def test_resource_report_fields():
    r = build("static").resources.to_json()
    assert r["schema"] == 1
    for k in ("stage_count", "pipeline_register_bits", "fifo_bits", "ram_bits", "fsm_count"):
        assert r[k] >= 0


def test_read_only_arrays_count_as_rom():
    r = build("static").resources
    assert r.ram_bits == 32 * 32  # hist
    assert r.rom_bits == 512 * 32 * 2  # feature and weight


def test_resource_ordering_matches_the_variants():
    st, dy, rep, sp = (build(v).resources for v in corpus.HISTOGRAMS)
    assert rep.ram_bits >= 2 * st.ram_bits
    base = st.pipeline_register_bits + st.fifo_bits
    assert dy.pipeline_register_bits + dy.fifo_bits > base
    assert sp.pipeline_register_bits + sp.fifo_bits > base
