import sys
from pathlib import Path

import pytest

from termcee.corpus import ingest_parsed, load_stoplist
from termcee.ontology import default_ontology, number_roles

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def ont():
    return default_ontology()


@pytest.fixture(scope="session")
def num(ont):
    return number_roles(ont)


@pytest.fixture(scope="session")
def sample_raw(ont):
    return ingest_parsed(DATA / "sample_doc.jsonl", ont)[0]


@pytest.fixture(scope="session")
def stoplist():
    return load_stoplist()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
