"""Shared fixtures: enumerated state spaces are expensive, cache per session."""

import pytest

from latticetri.geometry import GridSpec
from latticetri.triangulation import ConstraintSet
from latticetri.flipgraph import enumerate_triangulations

_cache = {}


def space_for(m: int, n: int):
    key = (m, n)
    if key not in _cache:
        _cache[key] = enumerate_triangulations(ConstraintSet(GridSpec(m, n)))
    return _cache[key]


@pytest.fixture(scope="session")
def spaces():
    return space_for
