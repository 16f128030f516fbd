import numpy as np
import pytest

from threshnet import GROUND, Link, Linear, NetworkGraph


def make_graph(n, pairs, chars, caps=None):
    links = tuple(Link(a, b) for a, b in pairs)
    caps = np.ones(len(links)) if caps is None else np.asarray(caps, dtype=float)
    return NetworkGraph(n, links, caps, tuple(chars))


@pytest.fixture
def single_link():
    return make_graph(1, [(0, GROUND)], [Linear(1.0)])


@pytest.fixture
def parallel_13():
    """Two parallel linear links, R=1 and R=3, from node 0 to ground."""
    return make_graph(1, [(0, GROUND), (0, GROUND)], [Linear(1.0), Linear(3.0)])
