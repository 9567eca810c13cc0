import sys
from pathlib import Path

import pytest

from csma_backoff import ConflictGraph

sys.path.insert(0, str(Path(__file__).parent))  # make `reference` importable


@pytest.fixture
def path3():
    return ConflictGraph(3, [(0, 1), (1, 2)])


@pytest.fixture
def k2():
    return ConflictGraph(2, [(0, 1)])


@pytest.fixture
def k3():
    return ConflictGraph(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def k4():
    return ConflictGraph(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])


@pytest.fixture
def cycle4():
    return ConflictGraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def star4():
    # center 0 with three leaves
    return ConflictGraph(4, [(0, 1), (0, 2), (0, 3)])


@pytest.fixture
def pentagon_house():
    # 5-node graph with a chordless 4-cycle 0-1-4-3 and a triangle 1-2-4
    return ConflictGraph(5, [(0, 1), (1, 2), (1, 4), (2, 4), (3, 4), (0, 3)])
