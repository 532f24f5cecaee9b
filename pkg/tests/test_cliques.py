import itertools

import networkx as nx
import numpy as np
import pytest

from backend.app.services.clique_service import (
    clique_sizes,
    extend_to_maximal,
    independent_maximal_cliques,
    simplicial_vertices,
)
from backend.app.services.corr_service import EdgeSet
from backend.app.utils.errors import InputError


def _complete(p):
    return EdgeSet.from_pairs(p, itertools.combinations(range(p), 2))


CYCLE4 = EdgeSet.from_pairs(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
TWO_TRIANGLES = EdgeSet.from_pairs(5, [(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 4)])


def test_empty_graph_all_simplicial():
    assert simplicial_vertices(EdgeSet.from_pairs(4, [])) == {0, 1, 2, 3}


def test_complete_graph_all_simplicial():
    assert simplicial_vertices(_complete(5)) == {0, 1, 2, 3, 4}


def test_four_cycle_has_no_simplicial_vertex():
    assert simplicial_vertices(CYCLE4) == frozenset()
    assert len(independent_maximal_cliques(CYCLE4)) == 0


def test_two_triangles_sharing_a_vertex():
    C = independent_maximal_cliques(TWO_TRIANGLES)
    assert C.cliques == ((0, 1, 2), (2, 3, 4))
    np.testing.assert_array_equal(clique_sizes(C), [3.0, 3.0])


def test_four_clique_with_extra_vertex():
    # {0, 1, 3, 4} complete; 2 touches 1 and 4 only
    pairs = list(itertools.combinations([0, 1, 3, 4], 2)) + [(1, 2), (2, 4)]
    C = independent_maximal_cliques(EdgeSet.from_pairs(5, pairs))
    assert (0, 1, 3, 4) in C.cliques
    assert (1, 2, 4) in C.cliques


def test_isolated_vertices_are_singleton_cliques():
    C = independent_maximal_cliques(EdgeSet.from_pairs(4, [(1, 2)]))
    assert C.cliques == ((0,), (1, 2), (3,))


def test_deterministic_ordering():
    a = independent_maximal_cliques(TWO_TRIANGLES)
    b = independent_maximal_cliques(EdgeSet.from_pairs(5, sorted(TWO_TRIANGLES.edges, reverse=True)))
    assert a.cliques == b.cliques


def _oracle(G: EdgeSet):
    """Maximal cliques (Bron-Kerbosch) that own at least one vertex no other maximal clique holds."""
    g = nx.Graph()
    g.add_nodes_from(range(G.p))
    g.add_edges_from(G.edges)
    maximal = [frozenset(c) for c in nx.find_cliques(g)]
    out = set()
    for c in maximal:
        others = set().union(*(o for o in maximal if o != c))
        if c - others:
            out.add(tuple(sorted(c)))
    return out


@pytest.mark.parametrize("density", [0.2, 0.5, 0.8])
def test_matches_bron_kerbosch_oracle(density):
    rng = np.random.default_rng(int(density * 100))
    for _ in range(70):
        p = int(rng.integers(1, 13))
        pairs = [(i, j) for i, j in itertools.combinations(range(p), 2) if rng.uniform() < density]
        G = EdgeSet.from_pairs(p, pairs)
        got = independent_maximal_cliques(G)
        assert set(got.cliques) == _oracle(G)
        assert len(set(got.cliques)) == len(got.cliques)
        for c in got.cliques:
            assert all((i, j) in G for i, j in itertools.combinations(c, 2))


def test_extend_to_maximal():
    assert extend_to_maximal(TWO_TRIANGLES, (0, 1)) == (0, 1, 2)
    assert extend_to_maximal(TWO_TRIANGLES, (3,)) == (2, 3, 4)
    assert extend_to_maximal(TWO_TRIANGLES, (2, 4, 3)) == (2, 3, 4)
    assert extend_to_maximal(CYCLE4, (0,)) == (0, 1)


def test_extend_to_maximal_agrees_with_networkx(rng):
    for _ in range(20):
        a = np.triu(rng.random((9, 9)) < 0.5, k=1)
        G = EdgeSet(9, a | a.T)
        cliques = {tuple(sorted(c)) for c in nx.find_cliques(nx.from_numpy_array(G.adjacency.astype(int)))}
        for v in range(9):
            assert extend_to_maximal(G, (v,)) in cliques


def test_extend_to_maximal_rejects_non_clique():
    with pytest.raises(InputError):
        extend_to_maximal(CYCLE4, (0, 2))
