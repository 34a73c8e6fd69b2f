from pathlib import Path

import pytest

from kgraph.graph import read_graph

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture(scope="session")
def events():
    return read_graph(FIXTURES / "fig2.tsv")


@pytest.fixture(scope="session")
def airports():
    return read_graph(FIXTURES / "fig25.tsv")


@pytest.fixture(scope="session")
def transport():
    return read_graph(FIXTURES / "fig12.tsv")


# Verdict lines recorded by test_acceptance.py, keyed by criterion number.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
