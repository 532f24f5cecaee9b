from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Tuple

import numpy as np

from ..utils.errors import DimensionError, EmptyGrid, InputError, ZeroVarianceColumn

MatrixKind = Literal["sample", "population"]

# ==========================================
# 1. DOMAIN TYPES
# ==========================================


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """
    Symmetric p x p matrix with an exact unit diagonal.
    Build through `from_array` so symmetry and the diagonal are written, not computed.
    """
    entries: np.ndarray
    kind: MatrixKind = "sample"

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        object.__setattr__(self, "entries", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionError(f"Correlation matrix must be square, got shape {m.shape}.")
        if not np.array_equal(m, m.T):
            raise InputError("Correlation matrix is not symmetric.")
        if not np.all(np.diag(m) == 1.0):
            raise InputError("Correlation matrix must have a unit diagonal.")
        if np.any(np.abs(m) > 1.0) or not np.all(np.isfinite(m)):
            raise InputError("Correlation entries must be finite and within [-1, 1].")
        m.setflags(write=False)

    @classmethod
    def from_array(cls, values, kind: MatrixKind = "sample", tol: float = 1e-8) -> "CorrelationMatrix":
        m = np.array(values, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"Correlation matrix must be square, got shape {m.shape}.")
        if not np.all(np.isfinite(m)):
            raise InputError("Correlation matrix contains non-finite values.")
        if np.max(np.abs(m - m.T), initial=0.0) > tol:
            raise InputError("Correlation matrix is not symmetric.")
        if np.max(np.abs(np.diag(m) - 1.0), initial=0.0) > tol:
            raise InputError("Correlation matrix diagonal must be 1.")
        if np.max(np.abs(m), initial=0.0) > 1.0 + tol:
            raise InputError("Correlation entries must lie in [-1, 1].")
        m = np.clip((m + m.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(m, 1.0)
        return cls(m, kind)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    def off_diagonal(self) -> np.ndarray:
        """Upper-triangle magnitudes |r_ij|, i < j, in row-major order."""
        iu = np.triu_indices(self.p, k=1)
        return np.abs(self.entries[iu])

    def to_list(self):
        return self.entries.tolist()


@dataclass(frozen=True, eq=False)
class EdgeSet:
    """Undirected graph over p vertices held as a boolean adjacency matrix."""
    p: int
    adjacency: np.ndarray

    def __post_init__(self):
        a = self.adjacency
        if a.shape != (self.p, self.p) or a.dtype != bool:
            raise DimensionError("Adjacency must be a p x p boolean matrix.")
        if np.any(np.diag(a)) or not np.array_equal(a, a.T):
            raise InputError("Edge sets are undirected and carry no self-loops.")
        a.setflags(write=False)

    @classmethod
    def from_pairs(cls, p: int, pairs) -> "EdgeSet":
        a = np.zeros((p, p), dtype=bool)
        for i, j in pairs:
            if i == j or not (0 <= i < p and 0 <= j < p):
                raise InputError(f"Invalid edge ({i}, {j}) for p = {p}.")
            a[i, j] = a[j, i] = True
        return cls(p, a)

    @cached_property
    def edges(self) -> frozenset:
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def complement(self) -> "EdgeSet":
        a = ~self.adjacency
        np.fill_diagonal(a, False)
        return EdgeSet(self.p, a)

    def issubset(self, other: "EdgeSet") -> bool:
        return not np.any(self.adjacency & ~other.adjacency)

    def __len__(self):
        return int(np.count_nonzero(self.adjacency)) // 2

    def __contains__(self, pair) -> bool:
        i, j = pair
        return bool(self.adjacency[i, j])

    def __eq__(self, other):
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.adjacency, other.adjacency)

    __hash__ = None


@dataclass(frozen=True)
class ThresholdGrid:
    values: Tuple[float, ...]
    mode: str = "unique"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size and (np.any(v < 0.0) or np.any(v > 1.0)):
            raise InputError("Thresholds must lie in [0, 1].")
        if v.size > 1 and np.any(np.diff(v) <= 0):
            raise InputError("Thresholds must be strictly increasing.")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


# ==========================================
# 2. CORRELATION CONSTRUCTION
# ==========================================

def sample_correlation(data) -> CorrelationMatrix:
    """Pearson correlation of the columns of an n x p matrix."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"Data must be an n x p matrix, got {x.ndim} dimensions.")
    n, p = x.shape
    if n < 2:
        raise DimensionError(f"At least two observations are required, got n = {n}.")
    if not np.all(np.isfinite(x)):
        raise InputError("Data contains missing or non-finite values.")
    for j in range(p):
        if np.all(x[:, j] == x[0, j]):
            raise ZeroVarianceColumn(j)

    z = x - x.mean(axis=0)
    z /= np.sqrt(np.einsum("ij,ij->j", z, z))
    r = z.T @ z
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(r, "sample")


def population_correlation(sigma) -> CorrelationMatrix:
    """Standardise a covariance matrix: D^-1 Sigma D^-1."""
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"Covariance must be square, got shape {s.shape}.")
    sd = np.sqrt(np.diag(s))
    if np.any(~np.isfinite(sd)) or np.any(sd <= 0):
        raise InputError("Covariance diagonal must be strictly positive.")
    r = s / np.outer(sd, sd)
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(r, "population")


# ==========================================
# 3. THRESHOLDING
# ==========================================

def threshold_edges(R: CorrelationMatrix, tau: float) -> EdgeSet:
    """Edges (i, j) with |r_ij| > tau (strict)."""
    if not (0.0 <= tau <= 1.0):
        raise InputError(f"Threshold must lie in [0, 1], got {tau}.")
    a = np.abs(R.entries) > tau
    np.fill_diagonal(a, False)
    return EdgeSet(R.p, a)


def true_edge_set(structure) -> EdgeSet:
    """E0: pairs (i, j) whose parent sets intersect under `structure`."""
    m = structure.loading_mask().astype(np.int64)
    shared = (m @ m.T) > 0
    np.fill_diagonal(shared, False)
    return EdgeSet(structure.p, shared)


def complement_edges(E: EdgeSet) -> EdgeSet:
    return E.complement()


def parse_grid(spec: str) -> Tuple[str, int]:
    """'unique' -> ('unique', 0); 'equi:50' -> ('equi', 50)."""
    text = (spec or "").strip().lower()
    if text == "unique":
        return "unique", 0
    if text.startswith("equi"):
        _, _, count = text.partition(":")
        try:
            m = int(count) if count else 50
        except ValueError:
            raise InputError(f"Bad grid size in '{spec}'.")
        if m < 1:
            raise InputError("Equidistant grid needs at least one point.")
        return "equi", m
    raise InputError(f"Unknown grid '{spec}'. Use 'unique' or 'equi:m'.")


def candidate_thresholds(R: CorrelationMatrix, mode: str = "unique", m: int = 50) -> ThresholdGrid:
    """
    'unique' -> sorted distinct off-diagonal |r_ij| (each used as a strict cutoff);
    'equi'   -> m equally spaced interior points of (0, 1).
    """
    if R.p < 2:
        raise EmptyGrid("A threshold grid needs at least two variables.")
    if mode == "unique":
        values = np.unique(R.off_diagonal())
        return ThresholdGrid(tuple(float(v) for v in values), "unique")
    if mode == "equi":
        values = np.linspace(0.0, 1.0, m + 2)[1:-1]
        return ThresholdGrid(tuple(float(v) for v in values), f"equi:{m}")
    raise InputError(f"Unknown grid mode '{mode}'.")
