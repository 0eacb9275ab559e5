import numpy as np
import pytest

from polyaurn import corpus
from polyaurn.urn_core import ReplacementDistribution, UrnSpec


@pytest.fixture
def polya():
    return UrnSpec.deterministic((1, 1), [(1, 0), (0, 1)], (1, 1))


@pytest.fixture
def friedman():
    return UrnSpec.deterministic((1, 1), [(0, 1), (1, 0)], (1, 1))


@pytest.fixture
def critical():
    return UrnSpec.deterministic((1, 1), [(3, 1), (1, 3)], (1, 1))


@pytest.fixture
def large():
    return UrnSpec.deterministic((1, 1), [(4, 1), (1, 4)], (1, 1))


@pytest.fixture
def mixed():
    xi1 = ReplacementDistribution.from_atoms([(0.5, (2, 0)), (0.5, (0, 2))])
    return UrnSpec((1, 1), (xi1, ReplacementDistribution.deterministic((0, 2))), (1, 1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


BALANCED_CORPUS = [n for n in corpus.NAMES if n != "unbalanced"]


@pytest.fixture(params=BALANCED_CORPUS)
def corpus_urn(request):
    return corpus.load(request.param)
