from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Tuple

import numpy as np

from .clique_service import CliqueSet
from .corr_service import EdgeSet, true_edge_set
from ..utils.errors import StructureError

# ==========================================
# 1. DOMAIN TYPES
# ==========================================


class SingletonPolicy(str, Enum):
    DROP = "drop"
    KEEP = "keep"


@dataclass(frozen=True)
class FactorStructure:
    """
    The pair (d, support): factor count and the (variable, factor) positions of free loadings.
    Variables appearing in no support entry are pure-noise variables.
    Estimation needs d < p (or d = 0); kept singleton cliques can produce d = p,
    which is representable but not estimable.
    """
    p: int
    d: int
    support: FrozenSet[Tuple[int, int]] = frozenset()

    def __post_init__(self):
        if self.p < 1 or self.d < 0:
            raise StructureError(f"Invalid dimensions p = {self.p}, d = {self.d}.")
        support = frozenset((int(i), int(j)) for i, j in self.support)
        object.__setattr__(self, "support", support)
        for i, j in support:
            if not (0 <= i < self.p and 0 <= j < self.d):
                raise StructureError(f"Support entry ({i}, {j}) outside a {self.p} x {self.d} pattern.")
        used = {j for _, j in support}
        if len(used) != self.d:
            empty = sorted(set(range(self.d)) - used)
            raise StructureError(f"Factors without indicators: {empty}.")

    # --- derived views ---
    def parents(self, i: int) -> FrozenSet[int]:
        return frozenset(j for v, j in self.support if v == i)

    def children(self, j: int) -> Tuple[int, ...]:
        return tuple(sorted(v for v, f in self.support if f == j))

    def child_sets(self):
        return [self.children(j) for j in range(self.d)]

    def loading_mask(self) -> np.ndarray:
        mask = np.zeros((self.p, self.d), dtype=bool)
        for i, j in self.support:
            mask[i, j] = True
        return mask

    def edge_set(self) -> EdgeSet:
        return true_edge_set(self)

    @property
    def is_estimable(self) -> bool:
        return self.d == 0 or self.d < self.p

    def is_independent_cluster(self) -> bool:
        return all(len(self.parents(i)) <= 1 for i in range(self.p))

    # --- serialisation ---
    def to_dict(self) -> dict:
        return {"p": self.p, "d": self.d, "support": [list(e) for e in sorted(self.support)]}

    @classmethod
    def from_dict(cls, payload: dict) -> "FactorStructure":
        try:
            return cls(int(payload["p"]), int(payload["d"]), frozenset(tuple(e) for e in payload["support"]))
        except (KeyError, TypeError, ValueError) as e:
            raise StructureError(f"Malformed structure payload: {e}")

    @classmethod
    def from_loadings(cls, loadings, tol: float = 0.0) -> "FactorStructure":
        lam = np.atleast_2d(np.asarray(loadings, dtype=float))
        rows, cols = np.nonzero(np.abs(lam) > tol)
        return cls(lam.shape[0], lam.shape[1], frozenset(zip(rows.tolist(), cols.tolist())))

    @classmethod
    def from_child_sets(cls, p: int, child_sets) -> "FactorStructure":
        support = frozenset((i, j) for j, members in enumerate(child_sets) for i in members)
        return cls(p, len(child_sets), support)


@dataclass(frozen=True)
class UniqueChildReport:
    unique: Tuple[Tuple[int, ...], ...]
    holds: bool


# ==========================================
# 2. CLIQUES -> STRUCTURE
# ==========================================

def cliques_to_structure(C: CliqueSet, policy: SingletonPolicy = SingletonPolicy.DROP) -> FactorStructure:
    """One factor per retained clique; clique members load on it."""
    policy = SingletonPolicy(policy)
    kept = [c for c in C.cliques if policy is SingletonPolicy.KEEP or len(c) > 1]
    return FactorStructure.from_child_sets(C.p, kept)


def unique_child_report(S: FactorStructure) -> UniqueChildReport:
    sets = [set(c) for c in S.child_sets()]
    unique = []
    for k, own in enumerate(sets):
        others = set().union(*(s for j, s in enumerate(sets) if j != k))
        unique.append(tuple(sorted(own - others)))
    return UniqueChildReport(tuple(unique), all(len(u) > 0 for u in unique))


# ==========================================
# 3. CANONICAL FORM
# ==========================================

def canonicalize(S: FactorStructure) -> FactorStructure:
    """Columns ordered by (smallest child, child tuple). Idempotent."""
    sets = S.child_sets()
    order = sorted(range(S.d), key=lambda j: (sets[j][0], sets[j]))
    return FactorStructure.from_child_sets(S.p, [sets[j] for j in order])


def canonical_key(S: FactorStructure):
    """Hashable identity of a structure up to column permutation."""
    return (S.p, tuple(sorted(S.child_sets())))


def same_structure(a: FactorStructure, b: FactorStructure) -> bool:
    return canonicalize(a) == canonicalize(b)


def permute_columns(S: FactorStructure, order) -> FactorStructure:
    """Column j of the result is column order[j] of S."""
    if sorted(order) != list(range(S.d)):
        raise StructureError("Column order must be a permutation of range(d).")
    position = {old: new for new, old in enumerate(order)}
    return FactorStructure(S.p, S.d, frozenset((i, position[j]) for i, j in S.support))
