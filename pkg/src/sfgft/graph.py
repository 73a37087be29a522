"""Weighted undirected graphs, KNN construction and Laplacian assembly.

Storage is dense; intended for a few thousand vertices at most.
"""
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import InsufficientPointsError, NotPositiveDefiniteError
from .spectral import cholesky_lower

SOFT_VERTEX_LIMIT = 2000
ADMISSIBLE_PIVOT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph with a symmetric, nonnegative, zero-diagonal weight table."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weights must be square, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-loops are not allowed")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n, edges):
        """Build from ``(i, j, w)`` triples; each undirected edge listed once."""
        w = np.zeros((n, n))
        for i, j, wij in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            w[i, j] = w[j, i] = float(wij)
        return cls(w)

    def edges(self):
        """Yield ``(i, j, w)`` with ``i < j`` for every nonzero weight."""
        iu, ju = np.nonzero(np.triu(self.weights, 1))
        for i, j in zip(iu.tolist(), ju.tolist()):
            yield i, j, float(self.weights[i, j])


@dataclass(frozen=True, eq=False)
class VertexPartition:
    """Sampling set S (sorted, unique) inside ``range(n)``; S^c is implied."""

    sample_set: np.ndarray
    n: int

    def __post_init__(self):
        s = np.asarray(self.sample_set, dtype=np.int64).ravel()
        if s.size == 0 or s.size >= self.n:
            raise ValueError(
                f"sampling set must be a nonempty strict subset, got |S|={s.size}, n={self.n}"
            )
        if np.any(np.diff(s) <= 0):
            raise ValueError("sampling set indices must be strictly increasing")
        if s[0] < 0 or s[-1] >= self.n:
            raise ValueError(f"sampling set indices must lie in [0, {self.n})")
        s.setflags(write=False)
        object.__setattr__(self, "sample_set", s)
        mask = np.zeros(self.n, dtype=bool)
        mask[s] = True
        comp = np.flatnonzero(~mask)
        comp.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "_mask", mask)
        object.__setattr__(self, "complement", comp)

    @classmethod
    def from_indices(cls, indices, n):
        return cls(np.unique(np.asarray(list(indices), dtype=np.int64)), n)

    @property
    def size(self):
        return int(self.sample_set.size)

    @property
    def mask(self):
        return self._mask

    @property
    def order(self):
        """Vertex permutation placing S first, then S^c."""
        return np.concatenate([self.sample_set, self.complement])

    @property
    def undersampling_violated(self):
        """True when |S| >= |S^c|, i.e. the usual |S| < |S^c| assumption fails."""
        return self.size >= self.n - self.size


def build_knn_graph(points, k, sigma_d):
    """Symmetric KNN graph with Gaussian kernel weights.

    Vertex ``j`` is linked to ``i`` when either is among the other's ``k``
    nearest neighbours (ties broken by lower index).  Weights are
    ``exp(-d_ij**2 / (2 sigma_d**2))``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    n = pts.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if sigma_d <= 0:
        raise ValueError("sigma_d must be positive")
    if n < 2 or n < k + 1:
        raise InsufficientPointsError(
            f"insufficient points: need at least k+1={k + 1}, got {n}"
        )

    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps the lower index first among equal distances
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]

    adj = np.zeros((n, n), dtype=bool)
    adj[np.repeat(np.arange(n), k), nearest.ravel()] = True
    adj |= adj.T
    np.fill_diagonal(d2, 0.0)
    w = np.where(adj, np.exp(-d2 / (2.0 * sigma_d**2)), 0.0)
    return Graph(w)


def degree_table(g):
    return g.weights.sum(axis=1)


def laplacian(g):
    """Combinatorial Laplacian ``D - W``."""
    lap = -np.array(g.weights)
    np.fill_diagonal(lap, degree_table(g))
    return lap


def principal_submatrix(a, rows, cols):
    a = np.asarray(a)
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    for name, idx, bound in (("row", rows, a.shape[0]), ("column", cols, a.shape[1])):
        if idx.size and (idx.min() < 0 or idx.max() >= bound):
            raise IndexError(f"{name} index out of range [0, {bound})")
    return a[np.ix_(rows, cols)]


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    diagnostic: str

    def __bool__(self):
        return self.ok


def _isolated_components(lap, inside, outside):
    """Components of the subgraph induced on ``inside`` with no edge to ``outside``."""
    w_in = -principal_submatrix(lap, inside, inside)
    np.fill_diagonal(w_in, 0.0)
    _, labels = connected_components(w_in != 0, directed=False)
    cut = -principal_submatrix(lap, inside, outside).sum(axis=1)
    bad = []
    for lab in np.unique(labels):
        members = inside[labels == lab]
        if not np.any(cut[labels == lab] > 0):
            bad.append(members.tolist())
    return bad


def check_partition_admissible(lap, partition, pivot_tol=ADMISSIBLE_PIVOT_TOL):
    """Check that both diagonal blocks ``L_SS`` and ``L_ScSc`` are positive definite.

    Returns an Admissibility that is truthy on success; otherwise its
    diagnostic names the block and any component cut off from the other side.
    """
    lap = np.asarray(lap, dtype=float)
    s, sc = partition.sample_set, partition.complement
    problems = []
    for label, inside, outside in (("S", s, sc), ("S^c", sc, s)):
        block = principal_submatrix(lap, inside, inside)
        try:
            cholesky_lower(block, pivot_tol=pivot_tol)
        except NotPositiveDefiniteError as exc:
            comps = _isolated_components(lap, inside, outside)
            if comps:
                detail = "; ".join(f"component {c} has no edge to the other side" for c in comps)
            else:
                detail = str(exc)
            problems.append(f"block L_{label}{label} is singular: {detail}")
    if problems:
        return Admissibility(False, " | ".join(problems))
    return Admissibility(True, "both diagonal blocks are positive definite")


def write_positions_csv(path, points):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(np.asarray(points, dtype=float)):
            writer.writerow([i, repr(float(x)), repr(float(y))])


def read_positions_csv(path):
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "x", "y"]:
            raise ValueError(f"{path}: expected header id,x,y, got {reader.fieldnames}")
        rows = [(int(r["id"]), float(r["x"]), float(r["y"])) for r in reader]
    ids = [r[0] for r in rows]
    if ids != list(range(len(rows))):
        raise ValueError(f"{path}: ids must be contiguous 0..n-1")
    return np.array([[x, y] for _, x, y in rows]).reshape(-1, 2)


def write_edges_csv(path, g):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "j", "w"])
        for i, j, w in g.edges():
            writer.writerow([i, j, repr(w)])


def read_edges_csv(path, n):
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["i", "j", "w"]:
            raise ValueError(f"{path}: expected header i,j,w, got {reader.fieldnames}")
        edges = []
        for r in reader:
            i, j = int(r["i"]), int(r["j"])
            if not i < j:
                raise ValueError(f"{path}: edge ({i},{j}) must satisfy i < j")
            edges.append((i, j, float(r["w"])))
    return Graph.from_edges(n, edges)
