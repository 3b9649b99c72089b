from importlib.resources import files
from pathlib import Path

import pytest

from gahmm.config import load_config
from gahmm.events import parse_event_stream
from gahmm.ontology import parse_catalog

DATA = Path(str(files("gahmm") / "data"))
SCENARIO_ALIASES = {"H2_H3_Hand_shaking": "H2_H3_Handshaking"}


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def load_catalog(name):
    return parse_catalog((DATA / name).read_text())


@pytest.fixture
def cabinet_catalog():
    return load_catalog("ontology_x1.onto").merge(load_catalog("ontology_x2.onto"))


@pytest.fixture
def table1_catalog():
    return load_catalog("table1.onto")


@pytest.fixture
def scenario_catalog():
    return load_catalog("table1.onto").merge(load_catalog("scenario.onto"))


@pytest.fixture
def scenario_events():
    return parse_event_stream((DATA / "group_exchanging_boxes.txt").read_text(), SCENARIO_ALIASES)


@pytest.fixture
def table2_golden():
    rows = {}
    for line in (DATA / "table2_contexts.txt").read_text().splitlines():
        key, seq = line.split("\t")
        rows[key] = [t.strip() for t in seq.split(",")]
    return rows


@pytest.fixture
def scenario_config():
    return load_config(DATA / "scenario.toml")


_CRITERIA: dict[int, tuple[str, str, float]] = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion; printed at session end."""
    import time

    number, title = request.node.get_closest_marker("criterion").args
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    report = getattr(request.node, "rep_call", None)
    status = "PASS" if report is not None and report.passed else "FAIL"
    _CRITERIA[number] = (title, status, elapsed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, elapsed = _CRITERIA[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title} ({elapsed:.3f}s)")
