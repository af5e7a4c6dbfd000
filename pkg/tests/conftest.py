import itertools
import os
import random

import pytest
from hypothesis import HealthCheck, settings

from relay_dmt.scheduling import Schedule, validate_schedule
from relay_dmt.topology import NetworkTopology, Path, parse_topology, simple_paths

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# 3-hop graph with 12 source-sink paths and min cut 4 (antennas 2 at both ends)
MESH_TEXT = """
nodes 6
ant 0:2 1:1 2:1 3:1 4:1 5:2
edges 0-1 0-2 1-2 1-3 1-4 2-3 2-4 3-5 4-5
src 0
sink 5
"""

GAPPED_PATHS = ((0, 1, 3, 5), (0, 2, 4, 5), (0, 1, 4, 5), (0, 2, 3, 5))
DENSE_PATHS = ((0, 1, 3, 5), (0, 2, 4, 5), (0, 1, 3, 5), (0, 2, 4, 5))


def gapped_timing():
    return tuple(tuple(i + i // 3 + j - 1 for j in range(1, 4)) for i in range(1, 5))


def dense_timing():
    return tuple(tuple(i + j - 1 for j in range(1, 4)) for i in range(1, 5))


@pytest.fixture
def mesh():
    return parse_topology(MESH_TEXT)


@pytest.fixture
def gapped():
    return Schedule(tuple(Path(p) for p in GAPPED_PATHS), gapped_timing(), label="gapped")


@pytest.fixture
def dense():
    return Schedule(tuple(Path(p) for p in DENSE_PATHS), dense_timing(), label="dense")


DIAMOND = "nodes 4; ant 0:1 1:1 2:1 3:1; edges 0-1 0-2 1-3 2-3; src 0; sink 3"


@pytest.fixture
def diamond():
    return parse_topology(DIAMOND)


def random_graph(rnd: random.Random, n_min=3, n_max=8, p=0.45, max_ant=1, connected=True):
    """Random graph on ``0..n-1`` with source 0 and sink n-1."""
    while True:
        n = rnd.randint(n_min, n_max)
        edges = {(a, b) for a, b in itertools.combinations(range(n), 2) if rnd.random() < p}
        ants = {v: rnd.randint(1, max_ant) for v in range(n)}
        g = NetworkTopology(n, ants, frozenset(edges), (0,), n - 1)
        if not connected or next(simple_paths(g, limit=1), None) is not None:
            return g


def greedy_schedule(g, paths):
    """Earliest-start timing for ``paths`` that passes validation.

    Each path runs on consecutive slots; its start is pushed back until the
    prefix schedule is valid, which always terminates because a late enough
    start is fully serial.
    """
    timing = []
    start = 0
    for i, p in enumerate(paths):
        start += 1
        while True:
            row = tuple(start + j for j in range(p.length))
            trial = Schedule(tuple(paths[:i + 1]), tuple(timing) + (row,))
            if validate_schedule(g, trial).ok:
                timing.append(row)
                break
            start += 1
    return Schedule(tuple(paths), tuple(timing), label="greedy")


def random_schedule(rnd, g, max_paths=4):
    options = list(simple_paths(g, limit=200))
    paths = [rnd.choice(options) for _ in range(rnd.randint(1, max_paths))]
    return greedy_schedule(g, paths)
