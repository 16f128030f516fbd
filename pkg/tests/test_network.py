import json

import numpy as np
import pytest

from threshnet import (
    GROUND,
    ConnectivityError,
    DimensionError,
    Link,
    Linear,
    NetworkGraph,
    PiecewiseThreshold,
    TopologyError,
    attach_grounded_object,
    build_grid,
    build_incidence,
    enumerate_min_path,
    load_graph,
    min_threshold_path,
    save_graph,
)
from threshnet.network import dumps_graph, graph_from_dict, loads_graph

from conftest import make_graph


def test_grid_1x1():
    g = build_grid(1, 1)
    assert (g.n, g.m) == (1, 1)
    np.testing.assert_array_equal(build_incidence(g), [[1.0]])


def test_grid_2x2_counts():
    g = build_grid(2, 2)
    assert (g.n, g.m) == (4, 6)
    assert sum(l.touches_ground() for l in g.links) == 2


def test_grid_3x3_rank_full():
    g = build_grid(3, 3)
    assert g.m == 15
    assert sum(l.touches_ground() for l in g.links) == 3
    assert np.linalg.matrix_rank(g.incidence) == 9


@pytest.mark.parametrize("rows, cols", [(0, 3), (3, 0), (-1, 2)])
def test_grid_rejects_empty(rows, cols):
    with pytest.raises(DimensionError):
        build_grid(rows, cols)


def test_grid_source_outside():
    with pytest.raises(TopologyError):
        build_grid(3, 3, source=(5, 0))


def test_single_link_columns():
    assert make_graph(1, [(0, GROUND)], [Linear(1)]).incidence.tolist() == [[1.0]]
    assert make_graph(1, [(GROUND, 0)], [Linear(1)]).incidence.tolist() == [[-1.0]]


def test_incidence_column_sums_2x2():
    g = build_grid(2, 2)
    B = g.incidence
    for k, link in enumerate(g.links):
        s = B[:, k].sum()
        assert s in (0.0, 1.0, -1.0)
        assert (s == 0.0) == (not link.touches_ground())
        assert np.count_nonzero(B[:, k]) == (1 if link.touches_ground() else 2)


def test_incidence_sparse_matches_dense():
    g = build_grid(4, 5)
    np.testing.assert_array_equal(g.incidence_sparse.toarray(), g.incidence)


def test_incidence_is_read_only():
    g = build_grid(2, 2)
    with pytest.raises(ValueError):
        g.incidence[0, 0] = 5.0


def test_grid_is_deterministic():
    assert build_grid(5, 4) == build_grid(5, 4)
    assert build_grid(5, 4).links == build_grid(5, 4).links


def test_grid_source_is_node_zero_and_links_point_away():
    g = build_grid(4, 4, source=(1, 2))
    assert g.coords[0] == (1, 2)
    for link in g.links:
        assert link.head == GROUND or link.tail < link.head


def test_node_at_roundtrip():
    g = build_grid(3, 5)
    for i, (r, c) in enumerate(g.coords):
        assert g.node_at(r, c) == i


def test_self_loop_rejected():
    with pytest.raises(TopologyError):
        make_graph(2, [(0, 0), (0, GROUND), (1, GROUND)], [Linear(1)] * 3)


def test_node_out_of_range_rejected():
    with pytest.raises(TopologyError):
        make_graph(1, [(0, 3)], [Linear(1)])


def test_nonpositive_capacitance_rejected():
    with pytest.raises((TopologyError, ValueError)):
        make_graph(1, [(0, GROUND)], [Linear(1)], caps=[0.0])


def test_disconnected_rejected():
    with pytest.raises(ConnectivityError):
        make_graph(2, [(0, GROUND)], [Linear(1)])


def test_length_mismatch_rejected():
    with pytest.raises((DimensionError, ValueError)):
        NetworkGraph(1, (Link(0, GROUND),), np.ones(2), (Linear(1),))


def test_attach_empty_object_is_identity():
    g = build_grid(3, 3)
    assert attach_grounded_object(g, [], 1e-6, 1e3) is g


def test_attach_single_bottom_node():
    g = build_grid(3, 3)
    node = g.node_at(2, 0)
    h = attach_grounded_object(g, [node], 1e-6, 1e3)
    assert h.m == g.m + 1
    assert h.links[-1] == Link(node, GROUND)
    assert h.characteristics[-1] == Linear(1e-6)
    assert h.capacitances[-1] == 1e3
    assert h.links[: g.m] == g.links


def test_attach_out_of_range():
    with pytest.raises(TopologyError):
        attach_grounded_object(build_grid(2, 2), [7], 1e-6, 1e3)


def test_attach_chain_replaces_existing_links():
    g = build_grid(4, 4)
    cells = [g.node_at(1, 1), g.node_at(2, 1), g.node_at(3, 1)]
    h = attach_grounded_object(g, cells, 1e-6, 1e3)
    assert h.m == g.m + 1
    for a, b in zip(cells, cells[1:]):
        k = next(i for i, l in enumerate(h.links) if {l.tail, l.head} == {a, b})
        assert h.characteristics[k] == Linear(1e-6)


def test_object_path_dijkstra_matches_enumeration():
    # A 2-node grounded object inside a small threshold grid; the object links
    # have zero rigidity so they act as a free shortcut when they are cheap to reach.
    rng = np.random.default_rng(3)
    g = build_grid(3, 3)
    g = g.with_characteristics([PiecewiseThreshold(float(v), 1e-5, 800) for v in rng.uniform(0.15, 0.85, g.m)])
    g = attach_grounded_object(g, [g.node_at(1, 0), g.node_at(2, 0)], 1e-6, 1e3)
    assert g.m <= 16
    path = min_threshold_path(g)
    best, winners = enumerate_min_path(g)
    assert path.cost == pytest.approx(best, abs=1e-12)
    assert path.links in winners


def test_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    g = build_grid(3, 4).with_characteristics(
        [PiecewiseThreshold(float(v), 1e-5, 800) for v in rng.uniform(0.2, 0.8, 21)]
    )
    g = attach_grounded_object(g, [g.node_at(2, 3)], 1e-6, 1e3)
    save_graph(g, tmp_path / "g.json")
    h = load_graph(tmp_path / "g.json")
    assert h == g
    assert dumps_graph(h) == dumps_graph(g)


def test_file_grid_shorthand():
    doc = {"grid": {"rows": 3, "cols": 3, "source": [0, 0]}, "characteristic": "linear R=2.0", "capacitance": 2}
    g = graph_from_dict(doc)
    assert g == build_grid(3, 3, (0, 0), Linear(2.0), 2.0)


def test_file_explicit_form():
    text = json.dumps(
        {
            "nodes": 2,
            "characteristics": {"a": "pwl V=0.3 eps=1e-05 r=800", "b": "linear R=1"},
            "links": [[0, 1, 1.0, "a"], [1, "ground", 1.0, "b"], ["ground", 0, 2.0, "a"]],
        }
    )
    g = loads_graph(text)
    assert g.links == (Link(0, 1), Link(1, GROUND), Link(GROUND, 0))
    assert g.characteristics[0] == PiecewiseThreshold(0.3, 1e-5, 800)
    assert loads_graph(dumps_graph(g)) == g


@pytest.mark.parametrize(
    "doc",
    [
        {"nodes": 1, "characteristics": {}, "links": [[0, "ground", 1.0, "zz"]]},
        {"nodes": 1, "characteristics": {"a": "linear R=1"}, "links": [[0, "ground", 1.0]]},
        {"nodes": 1, "characteristics": {"a": "linear R=1"}, "links": [[0, "earth", 1.0, "a"]]},
        {"nodes": 1},
        {"format": "other/9", "grid": {"rows": 1, "cols": 1}},
    ],
)
def test_file_errors(doc):
    with pytest.raises(ValueError):
        graph_from_dict(doc)
