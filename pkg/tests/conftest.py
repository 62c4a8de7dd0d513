from __future__ import annotations

import functools
import sys
from pathlib import Path

import pytest

from wavec import corpus
from wavec.config import BuildConfig
from wavec.driver import build_variant

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))


@functools.lru_cache(maxsize=None)
def _build(name: str, consts: tuple, depth: int):
    return build_variant(name, BuildConfig(logic_depth=depth, consts=dict(consts)))


def build(name: str, depth: int = 6, **consts):
    """Cached corpus build; builds are immutable once made."""
    return _build(name, tuple(sorted(consts.items())), depth)


@pytest.fixture
def builder():
    return build


@pytest.fixture(params=list(corpus.VARIANTS))
def variant(request):
    return request.param


# ---- acceptance report ---------------------------------------------------------------------------

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion a test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    m = item.get_closest_marker("criterion")
    if m is None or (rep.when != "call" and rep.passed):
        return
    n, title = m.args
    c = _criteria.setdefault(n, {"title": title, "ok": True, "secs": 0.0, "tests": 0})
    c["secs"] += rep.duration
    if rep.when == "call":
        c["tests"] += 1
    if rep.failed or rep.skipped:
        c["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        c = _criteria[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if c['ok'] else 'FAIL'}  {c['secs']:6.2f}s  {c['title']} ({c['tests']} tests)")
