import pytest
from hypothesis import given, settings, strategies as st

from helpers import adds_and_depth, ceil_log2, reduce_program
from wavec import corpus
from wavec.errors import ElabError, LexError, ParseError, SharedCaptureError, TypeCheckError
from wavec.frontend import elaborate, parse, pretty
from wavec.frontend.elaborated import (
    ERead, SBatched, SRegion, SWrite, stmt_exprs, walk_expr, walk_stmts,
)
from wavec.oracle import interpret_sequential_source, interpret_serialized


@pytest.mark.parametrize("name", list(corpus.VARIANTS))
def test_corpus_elaborates_and_pretty_is_a_fixpoint(name):
    e = elaborate(corpus.source(name), corpus.default_consts(name))
    text = pretty(e)
    assert pretty(elaborate(text, {})) == text


def test_pretty_round_trip_preserves_semantics():
    e = elaborate(corpus.source("ordering"), {"T": 3})
    e2 = elaborate(pretty(e), {})
    assert interpret_serialized(e, {"x": 2, "y": 3}) == interpret_serialized(e2, {"x": 2, "y": 3})


@pytest.mark.parametrize("src,exc", [
    ("uint32 x; void f() { x = 1 @ 2; }", LexError),
    ("uint32 x; void f() { x = ; }", ParseError),
    ("uint32 x; void f() { bool b = 1.5 + true; }", TypeCheckError),
    ("void f() { y = 1; }", ElabError),
    ("uint32 x; void f() { pipelined_for(4, [x](uint32 i) { }); }", SharedCaptureError),
])
def test_frontend_errors(src, exc):
    with pytest.raises(exc):
        elaborate(src, {})


def test_missing_const_is_an_elaboration_error():
    with pytest.raises(ElabError):
        elaborate(corpus.source("static"), {})


def test_parse_error_reports_position_and_expected_tokens():
    with pytest.raises(ParseError) as ei:
        parse("uint32 x; void f() { x = ; }")
    assert "ident" in ei.value.expected


def test_sites_are_unique_and_cover_every_access():
    e = elaborate(corpus.source("speculative"), corpus.default_consts("speculative"))
    sites = [s.site for s in e.sites]
    assert len(sites) == len(set(sites))
    used = set()
    for f in e.functions:
        for s in walk_stmts(f.body):
            if isinstance(s, SWrite):
                used.add(s.site)
            for x in stmt_exprs(s):
                used |= {r.site for r in walk_expr(x) if isinstance(r, ERead)}
    assert used == set(sites)


def test_static_for_unrolls_and_lambdas_become_functions():
    e = elaborate(corpus.source("replicated"), corpus.default_consts("replicated"))
    calls = [s for f in e.functions for s in walk_stmts(f.body) if isinstance(s, SBatched)]
    assert len(calls) == 2
    body = e.function(calls[0].fn)
    regions = [s for s in walk_stmts(body.body) if isinstance(s, SRegion)]
    assert [r.n for r in regions] == [8]


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 16, 31, 64])
def test_reduce_shape(n):
    adds, depth = adds_and_depth(elaborate(reduce_program(n), {}))
    assert adds == n - 1
    assert depth == ceil_log2(n)


def test_map_reduce_sum_of_squares():
    e = elaborate(corpus.source("map_reduce"), {"K": 16})
    assert interpret_serialized(e, {"data": list(range(16))})["result"] == 1240
    assert interpret_sequential_source(corpus.source("map_reduce"), {"K": 16}, {"data": list(range(16))})[
        "result"] == 1240


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 2**32 - 1), min_size=1, max_size=12))
def test_closure_rewriting_preserves_results(values):
    """Interpreting the source directly equals interpreting the elaborated program."""
    src = reduce_program(len(values))
    a = interpret_sequential_source(src, {}, {"data": values})["result"]
    b = interpret_serialized(elaborate(src, {}), {"data": values})["result"]
    assert a == b == sum(values) % 2**32
