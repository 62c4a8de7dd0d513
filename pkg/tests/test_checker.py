from pathlib import Path

import pytest

from conftest import build
from helpers import replay
from wavec import corpus
from wavec.checker import (
    check_all, check_constraints, check_ordered_loop_exit, check_program_order, check_wavefront_order,
)
from wavec.driver import gen_data
from wavec.oracle import enumerate_executions, state_key
from wavec.simulator import RandomStall, SimConfig, load_trace, read_csv, simulate

HERE = Path(__file__).parent
FIG = HERE / "fig_ordering.csv"
MUTANTS = sorted((HERE / "data").glob("mut_*.csv"))
PASSING = sorted((HERE / "data").glob("ok_*.csv"))
CHECKS = {
    "ProgramOrderViolation": "program_order", "WavefrontViolation": "wavefront", "FifoOrderViolation": "wavefront",
    "OccupancyViolation": "constraints", "RegionWriteSplit": "constraints", "RegionReadSplit": "constraints",
    "ThreadRateViolation": "constraints", "WaitHeadViolation": "constraints", "LoopOrderViolation": "loop_exit",
}


def header(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        if line.startswith("#") and ":" in line:
            k, v = line[1:].split(":", 1)
            out[k.strip()] = v.strip()
    return out


def ordering_ir():
    return build("ordering").ir


def test_figure_trace_passes_every_check():
    tr = load_trace(str(FIG))
    ir = ordering_ir()
    assert check_program_order(tr, ir) == []
    assert check_wavefront_order(tr, ir) == []
    assert check_constraints(tr, ir) == []
    assert check_ordered_loop_exit(tr, ir) == []


def test_figure_trace_is_self_consistent_and_a_valid_execution():
    tr = load_trace(str(FIG))
    final = replay(tr, {"x": 2, "y": 3})
    assert final == {"x": 9, "y": 10}
    valid = enumerate_executions(build("ordering").elab, {"x": 2, "y": 3})
    assert state_key(final) in valid


def test_figure_accesses_per_site_follow_thread_order():
    tr = load_trace(str(FIG))
    for site in range(4):
        assert [e.t for e in tr.accesses() if e.site == site] == [0, 1, 2]


def test_mutant_library_covers_every_check():
    assert len(MUTANTS) >= 12
    per_check: dict[str, int] = {}
    for p in MUTANTS:
        c = CHECKS[header(p)["expect"]]
        per_check[c] = per_check.get(c, 0) + 1
    assert set(per_check) == {"program_order", "wavefront", "constraints", "loop_exit"}
    assert min(per_check.values()) >= 3


@pytest.mark.parametrize("path", MUTANTS, ids=lambda p: p.stem)
def test_mutated_trace_is_rejected_with_its_diagnostic(path):
    h = header(path)
    ir = ordering_ir() if h.get("base") == "ordering" else None
    kinds = {v.kind for v in check_all(read_csv(path.read_text()), ir)}
    assert kinds == {h["expect"]}


@pytest.mark.parametrize("path", PASSING, ids=lambda p: p.stem)
def test_legal_hand_trace_passes(path):
    assert check_all(read_csv(path.read_text())) == []


@pytest.mark.parametrize("name", list(corpus.VARIANTS))
@pytest.mark.parametrize("seed", [None, 1, 2])
def test_simulator_traces_pass_all_checks(name, seed):
    consts = {"N": 40, "SIZE": 16} if name in corpus.HISTOGRAMS else {}
    b = build(name, **consts)
    if name in corpus.HISTOGRAMS:
        inp = gen_data("random", 40, 16, seed or 0)
    else:
        inp = {"ordering": {"x": 2, "y": 3}, "map_reduce": {"data": list(range(16))},
               "cond_order": {"cflag": [False, True, True]}}.get(name, {})
    inp = {k: v for k, v in inp.items() if k in {s.name for s in b.ir.shared}}
    tr = simulate(b.graph, inp, SimConfig(stall=RandomStall(seed, 0.2)) if seed else None)
    assert [str(v) for v in check_all(tr, b.ir, b.schedule)] == []


def test_checker_accepts_jsonl_traces(tmp_path):
    b = build("mutex")
    tr = simulate(b.graph, {})
    p = tmp_path / "t.jsonl"
    p.write_text(tr.to_jsonl())
    assert check_all(load_trace(str(p)), b.ir) == []


def test_dropped_region_exit_shows_up_as_occupancy_violation():
    """Mutating a real simulator trace: hide one thread's atomic-region exit."""
    b = build("static", N=24, SIZE=16)
    tr = simulate(b.graph, gen_data("all-conflict", 24, 16))
    first_exit = next(i for i, e in enumerate(tr.events) if e.k == "region-exit")
    del tr.events[first_exit]
    assert {v.kind for v in check_constraints(tr, b.ir)} == {"OccupancyViolation"}
