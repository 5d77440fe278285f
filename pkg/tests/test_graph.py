import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dto_sim.errors import GraphError
from dto_sim.graph import build_graph, incidence, is_connected, laplacian, path, ring

L_A = np.array([[2, -1, 0, -1], [-1, 2, -1, 0], [0, -1, 2, -1], [-1, 0, -1, 2]], dtype=float)
L_B = np.array([[1, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 1]], dtype=float)


def test_ring_and_path_laplacians():
    a = build_graph(4, [(1, 2), (2, 3), (3, 4), (4, 1)])
    b = build_graph(4, [(1, 2), (2, 3), (3, 4)])
    assert a.edge_count == 4 and b.edge_count == 3
    np.testing.assert_array_equal(laplacian(a), L_A)
    np.testing.assert_array_equal(laplacian(b), L_B)
    assert a == ring(4) and b == path(4)


def test_single_node():
    g = build_graph(1, [])
    np.testing.assert_array_equal(laplacian(g), [[0.0]])
    assert incidence(g).shape == (1, 0)
    assert is_connected(g)


def test_single_edge_incidence():
    np.testing.assert_array_equal(incidence(build_graph(2, [(1, 2)])), [[-1.0], [1.0]])


def test_disconnected():
    assert not is_connected(build_graph(2, []))
    assert not is_connected(build_graph(4, [(1, 2), (3, 4)]))
    assert is_connected(ring(4)) and is_connected(path(4))


@pytest.mark.parametrize("edges", [[(1, 1)], [(1, 2), (2, 1)], [(1, 5)], [(0, 2)]])
def test_invalid_edges(edges):
    with pytest.raises(GraphError):
        build_graph(4, edges)


def test_neighbors():
    # neighbors are 0-based agent indices
    g = ring(4)
    assert set(g.neighbors(0)) == {1, 3}
    assert set(path(4).neighbors(3)) == {2}


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 8))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return build_graph(n, [p for p, keep in zip(pairs, mask) if keep])


def _bfs_components(g):
    seen, comps = set(), 0
    for s in range(g.node_count):
        if s in seen:
            continue
        comps += 1
        stack = [s]
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(g.neighbors(u))
    return comps


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_laplacian_properties(g):
    L = laplacian(g)
    D = incidence(g)
    np.testing.assert_array_equal(D @ D.T, L)
    np.testing.assert_array_equal(L, L.T)
    np.testing.assert_array_equal(L.sum(axis=1), 0)
    assert np.all(np.linalg.eigvalsh(L) > -1e-9)
    # connected iff the zero eigenvalue is simple
    zero = int(np.sum(np.abs(np.linalg.eigvalsh(L)) < 1e-9))
    assert zero == _bfs_components(g)
    assert is_connected(g) == (zero == 1)
