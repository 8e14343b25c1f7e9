"""Undirected communication graphs and their spectral objects.

Provides the adjacency/degree/Laplacian matrices, incidence matrices under a
canonical (or caller-supplied) edge orientation, weighted Laplacians, and the
minimum positive eigenvalue used throughout the stability analysis.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import GraphError

# Eigenvalues below ZERO_EIG_SCALE * max(1, spectral radius) count as zero.
# Floating-point Laplacians always carry a numerically nonzero kernel eigenvalue.
ZERO_EIG_SCALE = 1e-9


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph on nodes 0..n-1 with a fixed edge list.

    Edges are stored canonically as (i, j) with i < j, sorted. Immutable after
    construction; construction fails on self loops, duplicates, out-of-range
    indices, or a disconnected topology.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"node count must be positive, got {self.n}")
        seen = set()
        canonical = []
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self loop on node {i + 1}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i + 1},{j + 1}) out of range for n={self.n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge ({key[0] + 1},{key[1] + 1})")
            seen.add(key)
            canonical.append(key)
        object.__setattr__(self, "edges", tuple(sorted(canonical)))
        if not self._connected():
            raise GraphError("graph is not connected")

    def _connected(self) -> bool:
        if self.n == 1:
            return True
        adj = self.neighbor_lists()
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbor_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return [sorted(a) for a in adj]

    def neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(self.neighbor_lists()[i])

    def edge_index(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        try:
            return self.edges.index(key)
        except ValueError:
            raise GraphError(f"({i + 1},{j + 1}) is not an edge") from None

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def degree(self) -> np.ndarray:
        return np.diag(self.adjacency().sum(axis=1))

    def laplacian(self) -> np.ndarray:
        return self.degree() - self.adjacency()

    def incidence(self, orientation=None) -> np.ndarray:
        """Node-by-edge incidence matrix D with one -1 (tail) and +1 (head) per column.

        The canonical orientation is tail=min(i,j), head=max(i,j), which keeps
        traces reproducible. `orientation` optionally flips edges: a sequence
        of +1 (canonical) / -1 (reversed), one entry per edge.
        """
        if orientation is None:
            orientation = np.ones(self.m)
        orientation = np.asarray(orientation, dtype=float)
        if orientation.shape != (self.m,) or not np.all(np.abs(orientation) == 1.0):
            raise GraphError("orientation must be a length-m sequence of +/-1")
        d = np.zeros((self.n, self.m))
        for k, (i, j) in enumerate(self.edges):
            d[i, k] = -orientation[k]
            d[j, k] = orientation[k]
        return d


def weighted_laplacian(g: Graph, weights, orientation=None) -> np.ndarray:
    """D W D^T for nonnegative per-edge weights; symmetric PSD with zero row sums."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (g.m,):
        raise GraphError(f"expected {g.m} edge weights, got shape {w.shape}")
    if np.any(w < 0):
        raise GraphError("edge weights must be nonnegative")
    d = g.incidence(orientation)
    return d @ np.diag(w) @ d.T


def centering_matrix(n: int) -> np.ndarray:
    """I_n - (1/n) 11^T, the projector removing the all-ones direction."""
    return np.eye(n) - np.ones((n, n)) / n


def rho2(matrix: np.ndarray, zero_scale: float = ZERO_EIG_SCALE) -> float:
    """Minimum positive eigenvalue of a symmetric PSD matrix.

    Eigenvalues below zero_scale * max(1, spectral radius) are treated as part
    of the kernel. Raises GraphError when no eigenvalue clears the threshold.
    """
    eig = np.linalg.eigvalsh(np.asarray(matrix, dtype=float))
    cutoff = zero_scale * max(1.0, float(np.max(np.abs(eig))) if eig.size else 1.0)
    positive = eig[eig > cutoff]
    if positive.size == 0:
        raise GraphError("matrix has no positive eigenvalue above the zero threshold")
    return float(positive[0])


def centering_psd_check(g: Graph, tol: float = 1e-9) -> bool:
    """True iff L - rho2(L) * K_n is positive semidefinite.

    Holds for every connected graph; exposed as a test oracle.
    """
    lap = g.laplacian()
    shifted = lap - rho2(lap) * centering_matrix(g.n)
    return float(np.linalg.eigvalsh(shifted)[0]) >= -tol
