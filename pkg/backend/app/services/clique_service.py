from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .corr_service import EdgeSet
from ..utils.errors import InputError


@dataclass(frozen=True)
class CliqueSet:
    """Independent maximal cliques, members ascending, cliques ordered by smallest member."""
    p: int
    cliques: Tuple[Tuple[int, ...], ...]

    def __len__(self):
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)

    def sizes(self):
        return [len(c) for c in self.cliques]


def _closed_neighbourhoods(G: EdgeSet) -> np.ndarray:
    closed = G.adjacency.copy()
    np.fill_diagonal(closed, True)
    return closed


def simplicial_vertices(G: EdgeSet) -> frozenset:
    """
    Vertices whose closed neighbourhood N[v] induces a clique.

    v is simplicial iff N[v] is contained in N[u] for every u in N[v];
    missing[v, u] = |N[v] minus N[u]| is one matrix product over the whole graph.
    """
    if G.p == 0:
        return frozenset()
    closed = _closed_neighbourhoods(G)
    b = closed.astype(np.float32)
    missing = b @ (1.0 - b).T
    broken = np.any((missing > 0.5) & closed, axis=1)
    return frozenset(np.flatnonzero(~broken).tolist())


def independent_maximal_cliques(G: EdgeSet) -> CliqueSet:
    """
    Maximal cliques holding at least one vertex that lies in no other maximal clique.

    A vertex sits in exactly one maximal clique iff it is simplicial, and that clique
    is N[v]; so the answer is the deduplicated closed neighbourhoods of simplicial vertices.
    """
    closed = _closed_neighbourhoods(G)
    found = {}
    for v in sorted(simplicial_vertices(G)):
        members = tuple(np.flatnonzero(closed[v]).tolist())
        found.setdefault(members, None)
    ordered = sorted(found, key=lambda c: (c[0], c))
    return CliqueSet(G.p, tuple(ordered))


def clique_sizes(cliques: CliqueSet) -> np.ndarray:
    return np.asarray(cliques.sizes(), dtype=float)


def extend_to_maximal(G: EdgeSet, members) -> Tuple[int, ...]:
    """
    Grow a clique of G to a maximal one, adding the lowest-index common neighbour each step.
    Returns `members` unchanged (sorted) when it is already maximal.
    """
    idx = sorted(set(members))
    if not np.array_equal(G.adjacency[np.ix_(idx, idx)], ~np.eye(len(idx), dtype=bool)):
        raise InputError(f"Vertices {idx} do not form a clique.")
    inside = np.zeros(G.p, dtype=bool)
    inside[idx] = True
    while True:
        common = np.all(G.adjacency[:, inside], axis=1) & ~inside
        if not common.any():
            return tuple(np.flatnonzero(inside).tolist())
        inside[int(np.argmax(common))] = True
