"""Shared fixtures and the acceptance-criteria report.

Every test in test_acceptance.py maps to one acceptance criterion; the
terminal summary prints one PASS/FAIL line per criterion at the end of
the run.
"""

import pytest

import dpcl
from dpcl.engine import scenario_from_json

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_results[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_results):
        outcome = _acceptance_results[nodeid]
        name = nodeid.split("::")[-1]
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")


@pytest.fixture(scope="session")
def corpus_source():
    return dpcl.corpus_source()


@pytest.fixture(scope="session")
def corpus_program(corpus_source):
    return dpcl.load_program(corpus_source, "library.dpcl")


CANONICAL_STEPS = [
    {"assert": {"name": "alice", "descriptors": ["student"], "properties": {"id_card": "c1"}}},
    {"assert": {"name": "library"}},
    {"do": {"actor": "alice", "event": "register", "refinements": {"instrument": "c1"}}},
    {"do": {"actor": "alice", "event": "borrow", "refinements": {"item": "book1"}}},
    {"advance": "1m"},
    {"advance": "1s"},
    {"do": {"actor": "library", "event": "fine", "refinements": {}}},
]


@pytest.fixture(scope="session")
def canonical_scenario():
    return scenario_from_json({"steps": CANONICAL_STEPS})
