"""Desired-formation data and the feasibility / margin / initial-state checks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graphs import Graph

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class FormationSpec:
    """A connected graph, per-edge desired displacements, and the shared radius.

    Displacements are stored once per undirected edge in the canonical
    direction (low index minus high index); the reversed sign is computed,
    never stored.
    """

    graph: Graph
    p: int
    displacements: np.ndarray  # (m, p), canonical edge direction
    delta: float

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError(f"spatial dimension must be positive, got {self.p}")
        if self.delta <= 0:
            raise ValidationError(f"communication radius must be positive, got {self.delta}")
        d = np.asarray(self.displacements, dtype=float)
        if d.shape != (self.graph.m, self.p):
            raise ValidationError(
                f"expected displacement array of shape ({self.graph.m}, {self.p}), "
                f"got {d.shape}"
            )
        object.__setattr__(self, "displacements", d)

    def displacement(self, i: int, j: int) -> np.ndarray:
        """Desired displacement x_i - x_j for the (i, j) direction."""
        k = self.graph.edge_index(i, j)
        d = self.displacements[k]
        return d if i < j else -d

    def margins(self) -> np.ndarray:
        """Per-edge barrier pole: delta minus the displacement length."""
        return self.delta - np.linalg.norm(self.displacements, axis=1)

    def margin(self, i: int, j: int) -> float:
        return float(self.margins()[self.graph.edge_index(i, j)])


@dataclass(frozen=True)
class InitialState:
    """Initial positions and, for second-order dynamics, initial velocities."""

    x0: np.ndarray  # (n, p)
    q0: np.ndarray | None = None  # (n, p) or None

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.q0 is not None:
            object.__setattr__(self, "q0", np.asarray(self.q0, dtype=float))


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    anchors: np.ndarray | None  # (n, p) witness positions realizing the formation
    residuals: np.ndarray  # (m,) per-edge witness error
    worst_edge: tuple[int, int]
    worst_residual: float


@dataclass(frozen=True)
class MarginResult:
    ok: bool
    margins: np.ndarray  # (m,) delta - ||d|| per edge
    margin_max: float  # largest per-edge margin


@dataclass(frozen=True)
class InitialCheckResult:
    ok: bool
    offsets: np.ndarray  # (m,) initial offset length per edge
    slacks: np.ndarray  # (m,) margin minus offset length


def edge_vectors(graph: Graph, x: np.ndarray) -> np.ndarray:
    """Per-edge x_i - x_j in the canonical direction; x has shape (n, p)."""
    idx = np.array(graph.edges)
    return x[idx[:, 0]] - x[idx[:, 1]]


def edge_offsets(spec: FormationSpec, x: np.ndarray) -> np.ndarray:
    """Per-edge x_i - x_j - d_ij in the canonical direction."""
    return edge_vectors(spec.graph, x) - spec.displacements


def check_feasible(spec: FormationSpec, tol: float = FEASIBILITY_TOL) -> FeasibilityResult:
    """Propagate anchor positions over a spanning tree, then verify every edge.

    Sets the first node's anchor to the origin and walks a breadth-first
    spanning tree; the formation is feasible iff all residual edge errors stay
    within tol. Returns the witness anchors on success.
    """
    g = spec.graph
    anchors = np.zeros((g.n, spec.p))
    visited = [False] * g.n
    visited[0] = True
    adj = g.neighbor_lists()
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not visited[v]:
                # anchor_u - anchor_v = d_uv  =>  anchor_v = anchor_u - d_uv
                anchors[v] = anchors[u] - spec.displacement(u, v)
                visited[v] = True
                queue.append(v)

    residuals = np.linalg.norm(
        edge_vectors(g, anchors) - spec.displacements, axis=1
    )
    worst = int(np.argmax(residuals))
    feasible = bool(residuals[worst] <= tol)
    return FeasibilityResult(
        feasible=feasible,
        anchors=anchors if feasible else None,
        residuals=residuals,
        worst_edge=g.edges[worst],
        worst_residual=float(residuals[worst]),
    )


def check_margins(spec: FormationSpec) -> MarginResult:
    """True iff every displacement is strictly shorter than the radius."""
    margins = spec.margins()
    return MarginResult(
        ok=bool(np.all(margins > 0)),
        margins=margins,
        margin_max=float(np.max(margins)),
    )


def check_initial(spec: FormationSpec, state: InitialState) -> InitialCheckResult:
    """True iff every initial offset is strictly inside its edge margin."""
    if state.x0.shape != (spec.graph.n, spec.p):
        raise ValidationError(
            f"expected initial positions of shape ({spec.graph.n}, {spec.p}), "
            f"got {state.x0.shape}"
        )
    offsets = np.linalg.norm(edge_offsets(spec, state.x0), axis=1)
    slacks = spec.margins() - offsets
    return InitialCheckResult(ok=bool(np.all(slacks > 0)), offsets=offsets, slacks=slacks)
