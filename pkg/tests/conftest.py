import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgaspects.kg import TripleStore, build_ontology  # noqa: E402


def graph_from_edges(edges):
    return build_ontology(TripleStore.from_triples((c, "subClassOf", p) for c, p in edges))


TOY_EDGES = [("A1", "A"), ("A", "R"), ("A2", "A"), ("B1", "B"), ("B", "R")]


@pytest.fixture
def toy_graph():
    return graph_from_edges(TOY_EDGES)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
