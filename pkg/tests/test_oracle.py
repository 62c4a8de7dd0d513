import random

import pytest
from hypothesis import given, settings, strategies as st

from wavec import corpus
from wavec.driver import build_source, run
from wavec.frontend import elaborate
from wavec.oracle import (
    Bounds, BoundsExceeded, enumerate_executions, interpret_sequential_source, interpret_serialized, state_key,
)
from wavec.simulator import RandomStall, SimConfig, simulate

from progen import tiny_threaded_program

XY = {"x": 2, "y": 3}


def ordering(body_wrap: bool = False, t: int = 3):
    src = corpus.source("ordering")
    if body_wrap:
        src = src.replace("uint32 a = x;", "atomic {\n    uint32 a = x;").replace("y = a*2;      // Write to shared variable y",
                                                                                 "y = a*2;\n    }")
    return elaborate(src, {"T": t})


def test_serialized_ordering_example():
    # T0 (2,3)->(5,4), T1 (5,4)->(9,10), T2 (9,10)->(19,18)
    assert interpret_serialized(ordering(), XY) == {"x": 19, "y": 18}


def test_serialized_histogram_small_example():
    for v in corpus.HISTOGRAMS:
        c = {**corpus.default_consts(v), "N": 4, "SIZE": 4, "THRESHOLD": 0}
        out = interpret_serialized(elaborate(corpus.source(v), c),
                                   {"feature": [1, 1, 2, 3], "weight": [1.0, 2.0, 3.0, 4.0]})
        assert [float(h) for h in out["hist"][:4]] == [0.0, 3.0, 3.0, 4.0]


def test_empty_program_leaves_inputs_unchanged():
    e = elaborate("uint32 x; uint32[3] a; void main() { }", {})
    assert interpret_serialized(e, {"x": 7, "a": [1, 2, 3]}) == {"x": 7, "a": [1, 2, 3]}


def test_enumeration_contains_figure_and_serialized_states():
    states = enumerate_executions(ordering(), XY)
    assert state_key({"x": 9, "y": 10}) in states
    assert state_key({"x": 19, "y": 18}) in states
    assert len(states) > 2


def test_atomic_body_collapses_to_the_serialized_state():
    e = ordering(body_wrap=True)
    assert enumerate_executions(e, XY) == {state_key(interpret_serialized(e, XY))}
    assert enumerate_executions(e, XY) == {state_key({"x": 19, "y": 18})}


def test_single_thread_is_a_singleton():
    e = ordering(t=1)
    assert enumerate_executions(e, XY) == {state_key(interpret_serialized(e, XY))}


def test_lock_protected_program_is_deterministic():
    e = elaborate(corpus.source("mutex"), {"T": 3})
    assert enumerate_executions(e) == {state_key({"counter": 3, "mtx": False})}


def test_too_many_threads_exceeds_bounds():
    with pytest.raises(BoundsExceeded):
        enumerate_executions(ordering(t=4), XY)


def test_too_many_steps_exceeds_bounds():
    with pytest.raises(BoundsExceeded):
        enumerate_executions(ordering(), XY, Bounds(max_threads=4, max_cycles=8))


def test_speculative_loop_is_outside_enumeration_bounds():
    c = {**corpus.default_consts("speculative"), "N": 2, "SIZE": 4}
    with pytest.raises(BoundsExceeded):
        enumerate_executions(elaborate(corpus.source("speculative"), c))


def test_bounds_cannot_be_raised_beyond_the_model():
    with pytest.raises(ValueError):
        Bounds(max_threads=5)


@pytest.mark.parametrize("name", corpus.HISTOGRAMS)
def test_source_oracle_threshold_above_all_features(name):
    c = {**corpus.default_consts(name), "N": 8, "SIZE": 8, "THRESHOLD": 100}
    out = interpret_sequential_source(corpus.source(name), c, {"feature": list(range(8)), "weight": [1.0] * 8})
    assert all(h == 0 for h in out["hist"])


@pytest.mark.parametrize("name", corpus.HISTOGRAMS)
def test_source_oracle_with_no_items(name):
    c = {**corpus.default_consts(name), "N": 0, "SIZE": 4}
    out = interpret_sequential_source(corpus.source(name), c, {})
    assert all(h == 0 for h in out["hist"])


@pytest.mark.parametrize("name", corpus.HISTOGRAMS)
def test_source_and_elaborated_oracles_agree(name):
    c = {**corpus.default_consts(name), "N": 24, "SIZE": 8}
    rng = random.Random(name)
    inp = {"feature": [rng.randrange(8) for _ in range(24)], "weight": [float(rng.randrange(1, 5)) for _ in range(24)]}
    a = interpret_sequential_source(corpus.source(name), c, inp)["hist"][:8]
    b = interpret_serialized(elaborate(corpus.source(name), c), inp)["hist"][:8]
    if name == "replicated":
        # per-lane partials are folded into the first SIZE buckets
        assert [float(x) for x in a] == [float(x) for x in b]
    else:
        assert list(a) == list(b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_serialized_result_is_a_member(seed):
    src, _ = tiny_threaded_program(seed)
    e = elaborate(src, {})
    inp = {"x": 1, "y": 2, "z": 3}
    assert state_key(interpret_serialized(e, inp)) in enumerate_executions(e, inp)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.integers(0, 5))
def test_simulator_final_state_is_a_member(seed, stall_seed):
    src, _ = tiny_threaded_program(seed)
    b = build_source(src)
    inp = {"x": 1, "y": 2, "z": 3}
    cfg = SimConfig(stall=RandomStall(stall_seed, 0.3)) if stall_seed else None
    got = simulate(b.graph, inp, cfg).final_state
    assert state_key(got) in enumerate_executions(b.elab, inp)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000))
def test_fully_atomic_programs_are_singletons(seed):
    src, _ = tiny_threaded_program(seed, wrap_atomic=True)
    b = build_source(src)
    inp = {"x": 1, "y": 2, "z": 3}
    states = enumerate_executions(b.elab, inp)
    assert states == {state_key(run(b, inp).final_state)}
